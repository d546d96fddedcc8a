#pragma once

#include "mlirt/dataset_io.hpp"
#include "mlirt/em.hpp"
#include "mlirt/report_io.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mlirt {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNotConverged = 2;

/// Flags of the command-line tool; unset flags fall back to the config file.
struct CommandOptions {
  std::optional<std::filesystem::path> students;
  std::optional<std::filesystem::path> schools;
  std::optional<std::filesystem::path> config;  // model config (design file for simulate)
  std::optional<std::filesystem::path> report;  // classify only
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> starts;
  std::optional<std::size_t> max_iter;
  std::optional<double> tol;
  std::optional<std::string> parameterization;
  std::optional<std::size_t> kv;
  std::optional<std::string> ku;  // integer, or a..b for sweep
  std::optional<std::string> bic_n;
  std::optional<unsigned> threads;
};

/// "3" -> {3}; "1..4" -> {1, 2, 3, 4}. Throws std::invalid_argument.
std::vector<std::size_t> parse_ku_values(const std::string& text);

/// The config file with command-line overrides applied and re-validated.
ModelConfig effective_config(const CommandOptions& opts);

/// Report contents for a finished fit (classification at the final parameters).
FitReport build_fit_report(const ModelConfig& config, const ResponseDataset& data,
                           const FitResult& fit, const BicSampleSize& bic_n);

/// Each writes its files under opts.out and returns an exit code; messages go
/// to `log`, errors to `err`.
int run_fit(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int run_sweep(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int run_simulate(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int run_classify(const CommandOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace mlirt
