// catnet: command-line front end for scenario runs, ensembles, diagnostics,
// copula fitting and the structural stability experiment.

#include "catnet/catnet.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_config = 2;
constexpr int exit_aborted = 3;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::string format = "csv";
  int jobs = 0;
};

catnet::ScenarioConfig load(const std::string &path, const Globals &g) {
  catnet::ScenarioConfig c = catnet::load_config(path);
  if (g.seed)
    c.base_seed = *g.seed;
  if (g.out_dir)
    c.out_dir = *g.out_dir;
  for (const auto &w : c.warnings)
    std::cerr << "warning: " << w << '\n';
  return c;
}

int cmd_run(const std::string &config, const Globals &g) {
  const auto c = load(config, g);
  const std::filesystem::path out = c.out_dir;
  catnet::CascadeReport rep;
  try {
    rep = catnet::run_single(c, catnet::replicate_seed(c.base_seed, 0), true);
  } catch (const catnet::ScenarioAborted &e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_aborted;
  }
  catnet::write_text(out / "config.json", catnet::dump_json(catnet::config_to_json(c)));
  catnet::write_text(out / "events.json", catnet::dump_json(catnet::events_to_json(rep)));
  catnet::write_text(out / "cascade.json", catnet::dump_json(catnet::cascade_to_json(rep)));
  if (g.format == "json")
    catnet::write_text(out / "timeseries.json", catnet::dump_json(catnet::timeseries_to_json(rep)));
  else
    catnet::write_text(out / "timeseries.csv", catnet::timeseries_csv(rep));
  std::cout << "events: " << rep.events.size()
            << ", apocalyptic times: " << rep.apocalyptic_times.size() << ", output: " << out.string()
            << '\n';
  return exit_ok;
}

int cmd_ensemble(const std::string &config, const Globals &g) {
  const auto c = load(config, g);
  const auto res = catnet::run_ensemble(c, g.jobs);
  catnet::write_ensemble(c.out_dir, c, res);
  const auto &s = res.stats;
  std::cout << "replicates: " << s.replicates << ", aborted: " << s.aborted
            << ", hitting fraction: " << catnet::format_double(s.hitting_fraction)
            << ", co-event rate: " << catnet::format_double(s.co_event_rate)
            << ", coverage fraction: " << catnet::format_double(s.coverage_fraction) << '\n';
  if (static_cast<double>(s.aborted) > c.max_abort_fraction * s.replicates) {
    std::cerr << "error: " << s.aborted << " of " << s.replicates
              << " replicates aborted (limit " << catnet::format_double(c.max_abort_fraction)
              << " of the ensemble)\n";
    return exit_aborted;
  }
  return exit_ok;
}

int cmd_diagnose(const std::string &config, const std::vector<double> &at, const Globals &g) {
  const auto c = load(config, g);
  const catnet::NetworkSystem sys = catnet::make_system(c);
  if (static_cast<int>(at.size()) != sys.p())
    throw catnet::ConfigError("--at", "expected " + std::to_string(sys.p()) + " control values");
  const catnet::Vector alpha = catnet::detail::to_vector(at);
  const auto eqs =
      catnet::find_equilibria(sys, alpha, catnet::SearchBox{c.box_lo, c.box_hi});
  catnet::json out = catnet::json::array();
  for (const auto &eq : eqs) {
    catnet::json e;
    e["x"] = catnet::to_json(eq.x);
    e["stable"] = eq.is_minimum();
    catnet::json sig = catnet::json::array();
    for (const auto &s : eq.sector_signatures)
      sig.push_back(catnet::to_json(s));
    e["sector_signatures"] = std::move(sig);
    e["diagnostics"] = catnet::to_json(catnet::diagnose(sys, eq));
    out.push_back(std::move(e));
  }
  std::cout << catnet::dump_json(catnet::json{{"alpha", catnet::to_json(alpha)},
                                              {"equilibria", std::move(out)}});
  return exit_ok;
}

int cmd_copula_fit(const std::string &summary_path, const Globals &g) {
  std::ifstream in(summary_path);
  if (!in)
    throw catnet::ConfigError(summary_path, "cannot open file");
  catnet::json summary;
  try {
    summary = catnet::json::parse(in);
  } catch (const catnet::json::parse_error &e) {
    throw catnet::ConfigError(summary_path, std::string("invalid JSON: ") + e.what());
  }
  const auto dep = catnet::dependence_from_magnitudes(catnet::magnitudes_from_summary(summary));
  const std::string text = catnet::dump_json(catnet::to_json(dep));
  std::cout << text;
  if (g.out_dir)
    catnet::write_text(std::filesystem::path(*g.out_dir) / "copula_fit.json", text);
  return dep.error ? exit_failure : exit_ok;
}

int cmd_stability(const std::string &config, std::optional<double> eta, std::optional<int> trials,
                  const Globals &g) {
  auto c = load(config, g);
  if (eta)
    c.stability_eta = *eta;
  if (trials)
    c.stability_trials = *trials;
  if (!(c.stability_eta >= 0.0))
    throw catnet::ConfigError("--eta", "must be >= 0");
  if (c.stability_trials < 1)
    throw catnet::ConfigError("--trials", "must be >= 1");
  const catnet::NetworkSystem sys = catnet::make_system(c);
  const auto path = catnet::simulate_path(
      catnet::make_path_spec(c, catnet::replicate_seed(c.base_seed, 0)),
      catnet::detail::to_vector(c.alpha0));
  catnet::StabilityResult r;
  try {
    r = catnet::structural_stability_experiment(sys, path, catnet::initial_state(c, sys),
                                                catnet::make_cascade_options(c), c.stability_eta,
                                                c.stability_trials,
                                                g.seed ? *g.seed : c.stability_seed);
  } catch (const catnet::ScenarioAborted &e) {
    std::cerr << "error: unperturbed scenario aborted: " << e.what() << '\n';
    return exit_aborted;
  }
  const catnet::json j{{"eta", c.stability_eta},
                       {"trials", r.trials},
                       {"preserved", r.preserved},
                       {"aborted", r.aborted},
                       {"fraction", r.fraction},
                       {"reference_partition", r.reference}};
  const std::string text = catnet::dump_json(j);
  std::cout << text;
  catnet::write_text(std::filesystem::path(c.out_dir) / "stability.json", text);
  if (static_cast<double>(r.aborted) > c.max_abort_fraction * r.trials)
    return exit_aborted;
  return exit_ok;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Coupled catastrophe networks: scenarios, ensembles, diagnostics"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Base seed (overrides the config)");
  app.add_option("--out-dir", g.out_dir, "Output directory (overrides the config)");
  app.add_option("--format", g.format, "Time series format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads for ensembles (0: all cores)")
      ->check(CLI::NonNegativeNumber);

  std::string config;
  auto *run = app.add_subcommand("run", "Run a single scenario");
  run->add_option("config", config, "Scenario config (JSON)")->required();
  auto *ensemble = app.add_subcommand("ensemble", "Run a Monte Carlo ensemble");
  ensemble->add_option("config", config, "Scenario config (JSON)")->required();
  auto *diag = app.add_subcommand("diagnose", "Singularity diagnostics at a control point");
  diag->add_option("config", config, "Scenario config (JSON)")->required();
  std::vector<double> at;
  diag->add_option("--at", at, "Control values alpha (p numbers)")->required()->allow_extra_args();
  auto *fit = app.add_subcommand("copula-fit", "Fit copulas to an ensemble summary");
  std::string summary;
  fit->add_option("summary", summary, "summary.json of an ensemble")->required();
  auto *stab = app.add_subcommand("stability", "Structural stability experiment");
  stab->add_option("config", config, "Scenario config (JSON)")->required();
  std::optional<double> eta;
  std::optional<int> trials;
  stab->add_option("--eta", eta, "Perturbation size");
  stab->add_option("--trials", trials, "Number of perturbed runs");
  for (auto *sub : {run, ensemble, diag, fit, stab})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << app.help() << '\n';
    app.exit(e);
    return exit_config;
  }

  try {
    if (*run)
      return cmd_run(config, g);
    if (*ensemble)
      return cmd_ensemble(config, g);
    if (*diag)
      return cmd_diagnose(config, at, g);
    if (*fit)
      return cmd_copula_fit(summary, g);
    if (*stab)
      return cmd_stability(config, eta, trials, g);
  } catch (const catnet::ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const catnet::PreconditionError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_failure;
  }
  return exit_config;
}
