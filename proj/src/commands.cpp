#include "mlirt/commands.hpp"

#include "mlirt/selection.hpp"
#include "mlirt/simulate.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace mlirt {

namespace {

std::size_t parse_count(const std::string& text) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || v == 0)
    throw std::invalid_argument("expected a positive integer, found '" + text + "'");
  return v;
}

const std::filesystem::path& required(const std::optional<std::filesystem::path>& p,
                                      const char* flag) {
  if (!p) throw std::invalid_argument(std::string("missing required flag ") + flag);
  return *p;
}

void require_file(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw ParseError(p.string(), 0, 0, "file not found");
}

void prepare_out(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::invalid_argument("cannot create output directory " + dir.string());
}

LoadedDataset load_inputs(const CommandOptions& opts, const ModelConfig& config,
                          std::ostream& log) {
  const auto& students = required(opts.students, "--students");
  const auto& schools = required(opts.schools, "--schools");
  require_file(students);
  require_file(schools);
  LoadedDataset loaded = load_dataset(students, schools, config);
  log << "read " << loaded.student_rows << " student rows and " << loaded.school_rows
      << " school rows (" << loaded.item_columns << " items)\n";
  for (const auto& w : loaded.warnings) log << "warning: " << w << "\n";
  return loaded;
}

// Runs body and maps exceptions onto the exit-code contract.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const SpecMismatch& e) {
    err << "error: spec mismatch: " << e.what() << "\n";
    return kExitInputError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const AllStartsFailed& e) {
    err << "error: " << e.what() << "\n";
    return kExitNotConverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNotConverged;
  }
}

}  // namespace

std::vector<std::size_t> parse_ku_values(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) return {parse_count(text)};
  const std::size_t lo = parse_count(text.substr(0, dots));
  const std::size_t hi = parse_count(text.substr(dots + 2));
  if (hi < lo) throw std::invalid_argument("empty k_U range '" + text + "'");
  std::vector<std::size_t> out;
  for (std::size_t k = lo; k <= hi; ++k) out.push_back(k);
  return out;
}

ModelConfig effective_config(const CommandOptions& opts) {
  const auto& path = required(opts.config, "--config");
  require_file(path);
  ModelConfig cfg = load_config(path);
  if (opts.seed) cfg.controls.seed = *opts.seed;
  if (opts.starts) cfg.controls.n_starts = *opts.starts;
  if (opts.max_iter) cfg.controls.max_iter = *opts.max_iter;
  if (opts.tol) cfg.controls.tol_loglik = *opts.tol;
  if (opts.threads) cfg.controls.threads = *opts.threads;
  if (opts.parameterization) cfg.spec.parameterization = parse_parameterization(*opts.parameterization);
  if (opts.kv) cfg.spec.k_v = *opts.kv;
  if (opts.ku) {
    const auto values = parse_ku_values(*opts.ku);
    cfg.spec.k_u = values.front();
  }
  if (opts.bic_n) cfg.bic_n = *opts.bic_n;
  if (const auto issues = validate_spec(cfg.spec); !issues.empty())
    throw std::invalid_argument("invalid model: " + issues.front());
  check_controls(cfg.controls);
  BicSampleSize::parse(cfg.bic_n);
  return cfg;
}

FitReport build_fit_report(const ModelConfig& config, const ResponseDataset& data,
                           const FitResult& fit, const BicSampleSize& bic_n) {
  const ModelSpec& spec = config.spec;
  const PosteriorTables post = e_step(data, fit.params, spec, config.controls.threads);
  const ClassificationResult cls = classify(data, fit.params, spec, post);
  FitReport rep;
  rep.config = config;
  rep.params = fit.params;
  rep.loglik = fit.loglik;
  rep.n_par = count_free_parameters(spec);
  rep.bic_n = bic_n.resolve(data);
  rep.bic_n_rule = bic_n.describe();
  rep.bic = bic(fit.loglik, rep.n_par, rep.bic_n);
  rep.n_iter = fit.n_iter;
  rep.converged = fit.converged;
  rep.start_index = fit.start_index;
  rep.trace = fit.trace;
  rep.n_schools = data.n_groups();
  rep.n_students = data.n_students();
  rep.average_class_weights = cls.average.classes;
  rep.average_type_weights = cls.average.types;
  rep.standardized_xi = cls.standardized_xi;
  rep.support = cls.support;
  rep.profiles = school_profiles(data, config, fit.params);
  return rep;
}

int run_fit(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const ModelConfig cfg = effective_config(opts);
    const LoadedDataset loaded = load_inputs(opts, cfg, log);
    const BicSampleSize bic_n = BicSampleSize::parse(cfg.bic_n);
    prepare_out(opts.out);
    const FitResult fit = multistart_fit(loaded.data, cfg.spec, cfg.controls);
    const FitReport rep = build_fit_report(cfg, loaded.data, fit, bic_n);
    write_fit_report(opts.out / "report.json", rep);
    // assignments use the parameters as stored, so classify reproduces them
    const ParameterSet stored = read_fit_report(opts.out / "report.json").params;
    const PosteriorTables post = e_step(loaded.data, stored, cfg.spec, cfg.controls.threads);
    write_student_assignments(opts.out / "student_classes.csv", loaded.data, post);
    write_school_assignments(opts.out / "school_types.csv", loaded.data, post);
    log << std::setprecision(12) << "loglik " << rep.loglik << ", " << rep.n_par
        << " parameters, BIC " << rep.bic << " (n = " << rep.bic_n << "), " << rep.n_iter
        << " iterations, " << (rep.converged ? "converged" : "NOT converged") << "\n";
    return rep.converged ? kExitOk : kExitNotConverged;
  });
}

int run_sweep(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    CommandOptions base = opts;
    base.ku.reset();
    const ModelConfig cfg = effective_config(base);
    const std::vector<std::size_t> values =
        opts.ku ? parse_ku_values(*opts.ku) : std::vector<std::size_t>{cfg.spec.k_u};
    const LoadedDataset loaded = load_inputs(opts, cfg, log);
    prepare_out(opts.out);
    const SweepResult sweep = sweep_school_types(loaded.data, cfg.spec, values, cfg.controls,
                                                 BicSampleSize::parse(cfg.bic_n));
    const std::string text = sweep_text(sweep, cfg.spec);
    {
      std::ofstream f(opts.out / "sweep.txt", std::ios::binary);
      f << text;
      std::ofstream c(opts.out / "sweep.csv", std::ios::binary);
      c << sweep_csv(sweep);
    }
    log << text;
    if (sweep.chosen_k_u == 0) return kExitNotConverged;
    for (const auto& row : sweep.rows)
      if (row.k_u == sweep.chosen_k_u && row.fit) {
        ModelConfig chosen = cfg;
        chosen.spec.k_u = row.k_u;
        write_fit_report(opts.out / "report.json",
                         build_fit_report(chosen, loaded.data, *row.fit,
                                          BicSampleSize::parse(cfg.bic_n)));
        return row.converged ? kExitOk : kExitNotConverged;
      }
    return kExitNotConverged;
  });
}

int run_simulate(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    SimulationDesign design;
    if (opts.config) {
      require_file(*opts.config);
      design = load_design(*opts.config);
      if (opts.seed) design.seed = *opts.seed;
    } else {
      design = desk_design(opts.seed.value_or(0));
    }
    check_design(design);
    prepare_out(opts.out);
    const SimulatedData sim = generate_dataset(design, opts.threads.value_or(1));
    ModelConfig cfg = config_for_design(design);
    cfg.controls.seed = design.seed;
    write_dataset(opts.out / "students.csv", opts.out / "schools.csv", sim.data, cfg);
    save_config(opts.out / "config.json", cfg);
    write_truth(opts.out / "truth.json", design, sim);
    log << "wrote " << sim.data.n_students() << " students in " << sim.data.n_groups()
        << " schools to " << opts.out.string() << "\n";
    return kExitOk;
  });
}

int run_classify(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto& report_path = required(opts.report, "--report");
    require_file(report_path);
    const FitReport rep = read_fit_report(report_path);
    ModelConfig cfg = rep.config;
    if (opts.threads) cfg.controls.threads = *opts.threads;
    const LoadedDataset loaded = load_inputs(opts, cfg, log);
    prepare_out(opts.out);
    const PosteriorTables post = e_step(loaded.data, rep.params, cfg.spec, cfg.controls.threads);
    write_student_assignments(opts.out / "student_classes.csv", loaded.data, post);
    write_school_assignments(opts.out / "school_types.csv", loaded.data, post);
    log << std::setprecision(12) << "classified " << loaded.data.n_students() << " students in "
        << loaded.data.n_groups() << " schools, loglik " << post.loglik << "\n";
    return kExitOk;
  });
}

}  // namespace mlirt
