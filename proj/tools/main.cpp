// Command-line frontend: fit panel models from CSV, run simulation studies,
// and run model selection. See README.md for the file formats.
#include <CLI11.hpp>

#include "lssc/commands.hpp"

namespace {

void add_common(CLI::App* cmd, std::uint64_t& seed, int& threads) {
  cmd->add_option("--seed", seed, "master RNG seed")->capture_default_str();
  cmd->add_option("--threads", threads,
                  "worker threads (0: LSSC_THREADS env or hardware)")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Least squares subspace clustering for panel data"};
  app.require_subcommand(1);
  app.set_config("--config", "", "plain-text config file (key=value)");
  app.allow_config_extras(false);
  app.get_config_formatter_base()->valueSeparator('=');

  lssc::FitOptions fit;
  auto* cmd_fit = app.add_subcommand("fit", "fit the model on a panel CSV");
  cmd_fit->add_option("--input", fit.input, "long-format panel CSV")
      ->required();
  cmd_fit->add_option("--out", fit.out_dir, "output directory")
      ->capture_default_str();
  cmd_fit->add_option("--k", fit.k, "number of subspaces");
  cmd_fit->add_option("--r", fit.r, "factor dimension");
  cmd_fit->add_option("--dims", fit.dims, "subspace dimensions d_1..d_k")
      ->delimiter(',');
  cmd_fit->add_flag("--auto-select", fit.auto_select,
                    "estimate r, k, dims before fitting");
  cmd_fit->add_option("--rmax", fit.rmax, "max factor count for --auto-select")
      ->capture_default_str();
  cmd_fit->add_option("--beta-tol", fit.beta_tol, "convergence tolerance")
      ->capture_default_str();
  cmd_fit->add_option("--max-iter", fit.max_iter, "iteration cap")
      ->capture_default_str();
  cmd_fit->add_option("--starts", fit.n_starts, "random restarts")
      ->capture_default_str();
  cmd_fit->add_option("--rank-tol", fit.rank_tol_noisy,
                      "vanishing-polynomial threshold")
      ->capture_default_str();
  add_common(cmd_fit, fit.seed, fit.threads);

  lssc::SimulateOptions sim;
  auto* cmd_sim = app.add_subcommand("simulate", "run a Monte Carlo study");
  cmd_sim->add_option("--setting", sim.setting, "1, 2a, or 2b")
      ->capture_default_str();
  cmd_sim->add_option("--dims", sim.dims, "true subspace dimensions")
      ->delimiter(',')
      ->capture_default_str();
  cmd_sim->add_option("--group-size", sim.group_size, "units per subspace")
      ->capture_default_str();
  cmd_sim->add_option("--T", sim.T, "time periods")->capture_default_str();
  cmd_sim->add_option("--r", sim.r, "factor dimension")->capture_default_str();
  cmd_sim->add_option("--rho", sim.rho, "loading correlation (setting 2b)")
      ->capture_default_str();
  cmd_sim->add_option("--reps", sim.reps, "replications")
      ->capture_default_str();
  cmd_sim->add_option("--eps-var", sim.eps_var, "idiosyncratic error variance")
      ->capture_default_str();
  cmd_sim->add_flag("--dimselect", sim.dimselect,
                    "report correct-dimension selection rates");
  cmd_sim->add_option("--beta-tol", sim.beta_tol, "convergence tolerance")
      ->capture_default_str();
  cmd_sim->add_option("--max-iter", sim.max_iter, "iteration cap")
      ->capture_default_str();
  cmd_sim->add_option("--out", sim.out_dir, "output directory")
      ->capture_default_str();
  add_common(cmd_sim, sim.seed, sim.threads);

  lssc::SelectOptions sel;
  auto* cmd_sel = app.add_subcommand("select", "estimate r, k, and dims");
  cmd_sel->add_option("--input", sel.input, "long-format panel CSV")
      ->required();
  cmd_sel->add_option("--out", sel.out_dir, "output directory")
      ->capture_default_str();
  cmd_sel->add_option("--rmax", sel.rmax, "max factor count")
      ->capture_default_str();
  cmd_sel->add_option("--k", sel.k, "number of subspaces (skip estimation)");
  cmd_sel->add_option("--r", sel.r, "factor dimension (skip estimation)");
  double gamma_in = -1.0;
  cmd_sel->add_option("--gamma", gamma_in,
                      "factor-count threshold (default: noise calibration)");
  cmd_sel->add_option("--lambda-lrr", sel.lambda_lrr, "LRR trade-off")
      ->capture_default_str();
  cmd_sel->add_option("--tau-cut", sel.tau_cut, "Laplacian cut-off")
      ->capture_default_str();
  double tol_in = -1.0;
  cmd_sel->add_option("--tolerance", tol_in,
                      "SSR tolerance (default: per-candidate rule)");
  add_common(cmd_sel, sel.seed, sel.threads);

  CLI11_PARSE(app, argc, argv);

  if (cmd_fit->parsed()) return lssc::run_fit(fit);
  if (cmd_sim->parsed()) return lssc::run_simulate(sim);
  if (cmd_sel->parsed()) {
    if (gamma_in >= 0) sel.gamma = gamma_in;
    if (tol_in >= 0) sel.tolerance_tau = tol_in;
    return lssc::run_select(sel);
  }
  return lssc::kExitInvalidInput;
}
