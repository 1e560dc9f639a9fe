// Batch command drivers behind the CLI: fit a panel from CSV, run the
// simulation harness, and run the model-selection pipeline. Each driver
// writes its artifacts and returns the process exit code; stdout carries
// only the report paths and a one-line summary.
#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lssc/io.hpp"
#include "lssc/selection.hpp"
#include "lssc/simulation.hpp"

namespace lssc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalidInput = 2;
inline constexpr int kExitEstimationFailure = 3;
inline constexpr int kExitInfeasible = 4;

struct FitOptions {
  std::string input;
  std::string out_dir = ".";
  int k = 0;  // 0 means unspecified
  int r = 0;
  std::vector<int> dims;
  bool auto_select = false;
  int rmax = 8;
  double beta_tol = 1e-6;
  int max_iter = 500;
  int n_starts = 1;
  std::uint64_t seed = 1;
  double rank_tol_noisy = 1e-2;
  int threads = 0;
};

struct SimulateOptions {
  std::string setting = "1";  // 1 | 2a | 2b
  std::vector<int> dims = {1, 1, 1};
  int group_size = 100;
  int T = 6;
  int r = 3;
  double rho = 0.0;
  int reps = 100;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  double eps_var = 0.5;
  bool dimselect = false;  // report correct-dimension rates instead of bias/RMSE
  double beta_tol = 1e-6;
  int max_iter = 500;
  int threads = 0;
};

struct SelectOptions {
  std::string input;
  std::string out_dir = ".";
  int rmax = 8;
  int k = 0;  // 0: estimate via LRR
  int r = 0;  // 0: estimate via the factor-count criterion
  std::optional<double> gamma;
  double lambda_lrr = 0.1;
  double tau_cut = 0.1;
  std::optional<double> tolerance_tau;
  std::uint64_t seed = 1;
  int threads = 0;
};

namespace detail {

inline std::filesystem::path ensure_out_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace detail

inline int run_fit(const FitOptions& opt) {
  PanelData data;
  try {
    data = read_panel_csv(opt.input);
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInvalidInput;
  }

  LsscConfig cfg;
  cfg.beta_tol = opt.beta_tol;
  cfg.max_iter = opt.max_iter;
  cfg.n_starts = opt.n_starts;
  cfg.seed = opt.seed;
  cfg.rank_tol_noisy = opt.rank_tol_noisy;

  nlohmann::json selection_info;
  try {
    if (opt.auto_select) {
      const double gamma = default_gamma(data.T(), data.N());
      cfg.r = opt.r > 0 ? opt.r : estimate_num_factors(data, opt.rmax, gamma);
      if (cfg.r < 1)
        throw EstimationError("no factor structure detected (r = 0)");
      LrrConfig lrr;
      cfg.k = opt.k > 0 ? opt.k : estimate_num_subspaces(data, cfg.r, lrr);
      if (!opt.dims.empty()) {
        cfg.dims = opt.dims;
      } else if (cfg.k > 1) {
        DimSelectionConfig dim_cfg;
        dim_cfg.base = cfg;
        cfg.dims = select_dims(data, cfg.k, cfg.r, dim_cfg).dims;
      }
      selection_info["r"] = cfg.r;
      selection_info["k"] = cfg.k;
      selection_info["dims"] = cfg.dims;
    } else {
      if (opt.k < 1 || opt.r < 1) {
        std::cerr << "input error: supply --k and --r or use --auto-select\n";
        return kExitInvalidInput;
      }
      cfg.k = opt.k;
      cfg.r = opt.r;
      cfg.dims = opt.dims;
      if (cfg.k > 1 && static_cast<int>(cfg.dims.size()) != cfg.k) {
        std::cerr << "input error: --dims must list one value per subspace\n";
        return kExitInvalidInput;
      }
    }
  } catch (const InvalidInput& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "selection error: " << e.what() << "\n";
    return kExitEstimationFailure;
  }

  FitResult fit;
  try {
    fit = fit_lssc(data, cfg);
  } catch (const InvalidInput& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return kExitEstimationFailure;
  }

  const auto out = detail::ensure_out_dir(opt.out_dir);
  nlohmann::json j = fit_result_json(data, fit);
  if (!selection_info.empty()) j["auto_select"] = selection_info;
  const auto json_path = out / "fit_result.json";
  const auto csv_path = out / "membership.csv";
  write_json(j, json_path.string());
  write_membership_csv(data, fit, csv_path.string());
  std::cout << json_path.string() << "\n";
  std::cout << "fit: k=" << cfg.k << " r=" << cfg.r
            << " ssr=" << j["ssr"].get<double>()
            << " converged=" << (fit.converged ? "yes" : "no") << "\n";
  return kExitOk;
}

inline int run_simulate(const SimulateOptions& opt) {
  if (opt.setting != "1" && opt.setting != "2a" && opt.setting != "2b") {
    std::cerr << "input error: unknown setting '" << opt.setting << "'\n";
    return kExitInvalidInput;
  }
  Setting1Config gen_cfg;
  gen_cfg.dims = opt.dims;
  gen_cfg.group_sizes.assign(opt.dims.size(), opt.group_size);
  gen_cfg.T = opt.T;
  gen_cfg.r = opt.r;
  gen_cfg.eps_var = opt.eps_var;

  const auto out = detail::ensure_out_dir(opt.out_dir);
  try {
    if (opt.dimselect) {
      // Correct-dimension-rate experiment: covariate-free panels, selection
      // per replication.
      gen_cfg.beta = Vector(0);
      int correct = 0, failed = 0;
      std::vector<int> selected_ok(opt.reps, 0);
      std::vector<int> selected_fail(opt.reps, 0);
      parallel_for(opt.reps, opt.threads, [&](int rep) {
        const std::uint64_t rep_seed =
            Rng::derive(opt.seed, static_cast<std::uint64_t>(rep));
        auto [data, truth] = gen_setting1(gen_cfg, rep_seed);
        DimSelectionConfig dim_cfg;
        dim_cfg.base.seed = Rng::derive(rep_seed, 0xd13ULL);
        dim_cfg.base.beta_tol = opt.beta_tol;
        dim_cfg.base.max_iter = opt.max_iter;
        try {
          const auto sel = select_dims(data, gen_cfg.k(), gen_cfg.r, dim_cfg);
          std::vector<int> want(opt.dims);
          std::sort(want.begin(), want.end(), std::greater<int>());
          selected_ok[rep] = (sel.dims == want) ? 1 : 0;
        } catch (const std::exception&) {
          selected_fail[rep] = 1;
        }
      });
      for (int rep = 0; rep < opt.reps; ++rep) {
        correct += selected_ok[rep];
        failed += selected_fail[rep];
      }
      nlohmann::json j;
      j["setting"] = "dimselect";
      j["dims"] = opt.dims;
      j["N"] = gen_cfg.N();
      j["T"] = opt.T;
      j["r"] = opt.r;
      j["n_reps"] = opt.reps;
      j["n_failed"] = failed;
      j["correct_rate"] =
          static_cast<double>(correct) / std::max(opt.reps - failed, 1);
      const auto path = out / "dimselect_report.json";
      write_json(j, path.string());
      std::cout << path.string() << "\n";
      std::cout << "dimselect: correct_rate=" << j["correct_rate"].get<double>()
                << " n_failed=" << failed << "\n";
      return kExitOk;
    }

    PanelGenerator generate;
    if (opt.setting == "1") {
      generate = [gen_cfg](std::uint64_t s) { return gen_setting1(gen_cfg, s); };
    } else if (opt.setting == "2a") {
      generate = [gen_cfg](std::uint64_t s) { return gen_setting2a(gen_cfg, s); };
    } else {
      const double rho = opt.rho;
      generate = [gen_cfg, rho](std::uint64_t s) {
        return gen_setting2b(gen_cfg, rho, s);
      };
    }

    LsscConfig est;
    est.k = gen_cfg.k();
    est.r = gen_cfg.r;
    est.dims = gen_cfg.dims;
    est.beta_tol = opt.beta_tol;
    est.max_iter = opt.max_iter;

    const ReplicationReport report =
        run_replications(generate, est, opt.reps, opt.seed, opt.threads);
    const auto rows = report_rows(opt.setting, opt.dims, report);
    const auto csv_path = out / "simulation_report.csv";
    const auto json_path = out / "simulation_report.json";
    write_report_csv(rows, csv_path.string());
    write_json(report_json(rows, report), json_path.string());
    std::cout << json_path.string() << "\n";
    std::cout << "simulate: setting=" << opt.setting;
    for (const auto& r : rows)
      if (r.parameter != "none")
        std::cout << " " << r.parameter << " bias=" << r.bias
                  << " rmse=" << r.rmse;
    std::cout << " misclass=" << report.mean_misclass
              << " n_failed=" << report.n_failed << "\n";
    return kExitOk;
  } catch (const InvalidInput& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return kExitEstimationFailure;
  }
}

inline int run_select(const SelectOptions& opt) {
  PanelData data;
  try {
    data = read_panel_csv(opt.input);
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInvalidInput;
  }

  try {
    nlohmann::json j;
    const double gamma =
        opt.gamma ? *opt.gamma : default_gamma(data.T(), data.N());
    const int r =
        opt.r > 0 ? opt.r : estimate_num_factors(data, opt.rmax, gamma);
    j["gamma"] = gamma;
    j["r"] = r;
    const auto out = detail::ensure_out_dir(opt.out_dir);
    const auto path = out / "selection_report.json";
    if (r < 1) {
      j["conclusion"] = "no factor structure detected";
      write_json(j, path.string());
      std::cout << path.string() << "\n";
      std::cout << "select: r=0 (no factor structure)\n";
      return kExitOk;
    }

    LrrConfig lrr;
    lrr.lambda_lrr = opt.lambda_lrr;
    lrr.tau_cut = opt.tau_cut;
    const int k = opt.k > 0 ? opt.k : estimate_num_subspaces(data, r, lrr);
    j["k"] = k;

    DimSelectionConfig dim_cfg;
    dim_cfg.tolerance_tau = opt.tolerance_tau;
    dim_cfg.base.seed = opt.seed;
    if (k > 1 && r >= 2) {
      const auto sel = select_dims(data, k, r, dim_cfg);
      j["dims"] = sel.dims;
      j["sigma2_hat"] = sel.sigma2_hat;
      nlohmann::json cands = nlohmann::json::array();
      for (const auto& c : sel.candidates) {
        nlohmann::json jc;
        jc["dims"] = c.dims;
        jc["ssr"] = c.ssr;
        jc["penalty"] = c.penalty;
        jc["criterion"] = c.criterion;
        jc["tau"] = c.tau;
        jc["feasible"] = c.feasible;
        if (c.fit_failed) jc["error"] = c.error;
        cands.push_back(std::move(jc));
      }
      j["candidates"] = std::move(cands);
    }
    write_json(j, path.string());
    std::cout << path.string() << "\n";
    std::cout << "select: r=" << r << " k=" << k;
    if (j.contains("dims")) {
      std::cout << " dims=";
      const auto& d = j["dims"];
      for (std::size_t q = 0; q < d.size(); ++q)
        std::cout << (q ? "," : "") << d[q].get<int>();
    }
    std::cout << "\n";
    return kExitOk;
  } catch (const InfeasibleTolerance& e) {
    std::cerr << "infeasible tolerance: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const InvalidInput& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "selection error: " << e.what() << "\n";
    return kExitEstimationFailure;
  }
}

}  // namespace lssc
