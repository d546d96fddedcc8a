#include "mlirt/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

void shared_flags(CLI::App* cmd, mlirt::CommandOptions& o) {
  cmd->add_option("--students", o.students, "students file (comma-separated)");
  cmd->add_option("--schools", o.schools, "schools file (comma-separated)");
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--threads", o.threads, "worker threads for the E-step and simulation");
}

void model_flags(CLI::App* cmd, mlirt::CommandOptions& o) {
  cmd->add_option("--config", o.config, "model config file (JSON)");
  cmd->add_option("--starts", o.starts, "number of EM starts");
  cmd->add_option("--max-iter", o.max_iter, "maximum EM iterations per start");
  cmd->add_option("--tol", o.tol, "log-likelihood change tolerance");
  cmd->add_option("--parameterization", o.parameterization, "lc, 1pl or 2pl");
  cmd->add_option("--kv", o.kv, "number of student classes");
  cmd->add_option("--bic-n", o.bic_n, "BIC sample size: students, schools or an integer");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel latent-class IRT models: fit, sweep, simulate, classify"};
  app.require_subcommand(1);
  mlirt::CommandOptions o;

  auto* fit = app.add_subcommand("fit", "fit one model by EM");
  shared_flags(fit, o);
  model_flags(fit, o);
  fit->add_option("--ku", o.ku, "number of school types");

  auto* sweep = app.add_subcommand("sweep", "fit increasing k_U and choose by BIC");
  shared_flags(sweep, o);
  model_flags(sweep, o);
  sweep->add_option("--ku", o.ku, "k_U value or range a..b");

  auto* sim = app.add_subcommand("simulate", "draw a dataset from a design");
  sim->add_option("--config", o.config, "design file (JSON); default is the desk design");
  sim->add_option("--out", o.out, "output directory")->capture_default_str();
  sim->add_option("--seed", o.seed, "random seed");
  sim->add_option("--threads", o.threads, "worker threads");

  auto* cls = app.add_subcommand("classify", "MAP assignments under a fitted report");
  shared_flags(cls, o);
  cls->add_option("--report", o.report, "report.json written by fit")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mlirt::kExitInputError;
  }

  if (fit->parsed()) return mlirt::run_fit(o, std::cout, std::cerr);
  if (sweep->parsed()) return mlirt::run_sweep(o, std::cout, std::cerr);
  if (sim->parsed()) return mlirt::run_simulate(o, std::cout, std::cerr);
  return mlirt::run_classify(o, std::cout, std::cerr);
}
