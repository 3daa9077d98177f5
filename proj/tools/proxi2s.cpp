#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "proxi2s/csv.hpp"
#include "proxi2s/error.hpp"
#include "proxi2s/inference.hpp"
#include "proxi2s/proximal.hpp"
#include "proxi2s/report.hpp"
#include "proxi2s/simharness.hpp"
#include "proxi2s/study_io.hpp"

namespace {

using namespace proxi2s;

LinkKind link_from_string(const std::string& name) {
  if (name == "identity") return LinkKind::identity;
  if (name == "log") return LinkKind::log;
  if (name == "logit") return LinkKind::logit;
  if (name == "multinomial") return LinkKind::multinomial;
  throw DataError("unknown link '" + name +
                  "' (expected identity, log, logit, or multinomial)");
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  for (char c : csv) {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else {
      item += c;
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

struct FitArgs {
  std::string input;
  std::string y = "y", a = "a", w = "w";
  std::string z_list, x_list, u_col;
  std::string y_link = "identity", w_link = "identity";
  bool interactions = false;
  bool restrict_symmetry = false;
  std::string variance = "sandwich";
  int boot_b = 300;
  std::uint64_t seed = 1;
  double level = 0.95;
  std::string out;
};

int cmd_fit(const FitArgs& args) {
  ColumnRoles roles;
  roles.y = args.y;
  roles.a = args.a;
  roles.w = args.w;
  roles.z = split_list(args.z_list);
  roles.x = split_list(args.x_list);
  if (!args.u_col.empty()) roles.u = args.u_col;
  Dataset data = load_csv(args.input, roles);

  ModelSpec spec = ModelSpec::defaults(link_from_string(args.y_link),
                                       link_from_string(args.w_link),
                                       !roles.x.empty());
  if (roles.z.empty())
    throw DataError("at least one treatment confounding proxy column (--z) "
                    "is required");
  spec.interactions = args.interactions;
  spec.restrict_symmetry = args.restrict_symmetry;

  const VarianceMethod method = variance_from_string(args.variance);
  TwoStageFit fit = fit_two_stage(data, spec);

  std::optional<SandwichResult> sw;
  if (method == VarianceMethod::sandwich || method == VarianceMethod::both)
    sw = sandwich(data, fit);
  std::optional<BootstrapResult> boot;
  if (method == VarianceMethod::bootstrap || method == VarianceMethod::both)
    boot = bootstrap(data, fit.plan, args.boot_b, args.seed, args.level);

  nlohmann::json report =
      fit_report_json(data, fit, sw ? &*sw : nullptr,
                      boot ? &*boot : nullptr, args.level);
  const std::string text = report.dump(2) + "\n";
  if (args.out.empty())
    std::cout << text;
  else
    write_text_file(args.out, text);
  return 0;
}

struct SimulateArgs {
  std::string config_path;
  std::string preset;
  std::vector<int> sizes;
  int reps = -1;
  int boot_b = -1;
  std::int64_t seed = -1;
  std::string variance;
  double level = -1.0;
  bool naive_linear = false;
  int jobs = 1;
  std::string out_dir;
};

int cmd_simulate(const SimulateArgs& args) {
  StudyConfig config;
  if (!args.config_path.empty()) {
    config = load_study_config(args.config_path);
  } else if (args.preset.empty() || args.preset == "ss_default") {
    config = StudyConfig::ss_default();
  } else {
    throw DataError("unknown preset '" + args.preset + "'");
  }
  if (!args.sizes.empty()) config.sample_sizes = args.sizes;
  if (args.reps > 0) config.replications = args.reps;
  if (args.boot_b > 0) config.bootstrap_b = args.boot_b;
  if (args.seed >= 0)
    config.master_seed = static_cast<std::uint64_t>(args.seed);
  if (!args.variance.empty())
    config.variance = variance_from_string(args.variance);
  if (args.level > 0.0) config.ci_level = args.level;
  if (args.naive_linear) config.include_naive_linear = true;
  config.validate();

  SimReport report = run_study(config, args.jobs);

  nlohmann::json out = sim_report_json(report);
  nlohmann::json echoed;  // execution details like --jobs are not echoed
  echoed["sizes"] = config.sample_sizes;
  echoed["replications"] = config.replications;
  echoed["bootstrap_b"] = config.bootstrap_b;
  echoed["ci_level"] = config.ci_level;
  echoed["variance"] = to_string(config.variance);
  echoed["seed"] = config.master_seed;
  echoed["dgp"] = {{"beta0", config.dgp.beta0},
                   {"beta_a", config.dgp.beta_a},
                   {"beta_u", config.dgp.beta_u},
                   {"beta_w", config.dgp.beta_w},
                   {"alpha0", config.dgp.alpha0},
                   {"alpha_u", config.dgp.alpha_u},
                   {"m", {config.dgp.m.c0, config.dgp.m.ca, config.dgp.m.cz,
                          config.dgp.m.caz}},
                   {"eps", config.dgp.eps.kind == EpsDist::Kind::logistic
                               ? "logistic"
                               : "normal"},
                   {"eps_mu", config.dgp.eps.mu},
                   {"eps_scale", config.dgp.eps.scale},
                   {"sd_a", config.dgp.az.sd_a},
                   {"sd_z", config.dgp.az.sd_z}};
  out["config"] = echoed;

  std::filesystem::create_directories(args.out_dir);
  write_text_file(args.out_dir + "/simreport.csv", summarize_csv(report));
  write_text_file(args.out_dir + "/simreport.json", out.dump(2) + "\n");
  std::cout << summarize_text(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage proximal causal inference with GLMs"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand(
      "fit", "Fit a two-stage proximal regression from a CSV file");
  fit->add_option("--input", fit_args.input, "input CSV path")->required();
  fit->add_option("--y", fit_args.y, "outcome column");
  fit->add_option("--a", fit_args.a, "treatment column");
  fit->add_option("--w", fit_args.w, "outcome proxy column");
  fit->add_option("--z", fit_args.z_list,
                  "treatment proxy columns, comma separated");
  fit->add_option("--x", fit_args.x_list,
                  "covariate columns, comma separated");
  fit->add_option("--u", fit_args.u_col, "latent column (diagnostics only)");
  fit->add_option("--y-link", fit_args.y_link,
                  "identity|log|logit|multinomial");
  fit->add_option("--w-link", fit_args.w_link,
                  "identity|log|logit|multinomial");
  fit->add_flag("--interactions", fit_args.interactions,
                "latent-interaction variant (mixed links)");
  fit->add_flag("--restrict-symmetry", fit_args.restrict_symmetry,
                "logit-logit offset variant");
  fit->add_option("--variance", fit_args.variance,
                  "bootstrap|sandwich|both");
  fit->add_option("--boot-b", fit_args.boot_b, "bootstrap replicates");
  fit->add_option("--seed", fit_args.seed, "bootstrap seed");
  fit->add_option("--level", fit_args.level, "confidence level");
  fit->add_option("--out", fit_args.out, "report JSON path (default stdout)");

  SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run a Monte Carlo study of the estimators");
  simulate->add_option("--config", sim_args.config_path,
                       "study configuration (TOML)");
  simulate->add_option("--preset", sim_args.preset,
                       "named preset (ss_default)");
  simulate->add_option("--sizes", sim_args.sizes, "sample sizes");
  simulate->add_option("--reps", sim_args.reps, "replications");
  simulate->add_option("--boot-b", sim_args.boot_b, "bootstrap replicates");
  simulate->add_option("--seed", sim_args.seed, "master seed");
  simulate->add_option("--variance", sim_args.variance,
                       "bootstrap|sandwich|both");
  simulate->add_option("--level", sim_args.level, "confidence level");
  simulate->add_flag("--naive-linear", sim_args.naive_linear,
                     "also run the literal linear naive estimator");
  simulate->add_option("--jobs", sim_args.jobs, "worker threads");
  simulate->add_option("--out-dir", sim_args.out_dir, "output directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return cmd_fit(fit_args);
    if (*simulate) return cmd_simulate(sim_args);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
