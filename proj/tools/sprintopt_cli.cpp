// sprintopt command-line front door. Every subcommand is a thin wrapper over
// the engine and service layers; state lives in the store directory.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sprintopt/errors.hpp"
#include "sprintopt/service.hpp"
#include "sprintopt/testbed.hpp"
#include "sprintopt/three_phase.hpp"

using namespace sprintopt;

namespace {

constexpr int kFailed = 2;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, sep)) out.push_back(part);
  return out;
}

PrimingRequest parse_prime(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() < 2 || parts.size() > 3) throw InvalidArgument("--prime expects {warm|cold}:{sprint}[:{topN}]");
  PrimingRequest r;
  r.mode = priming_mode_from_string(parts[0]);
  r.source = parts[1];
  if (parts.size() == 3) r.top_n = std::stoul(parts[2]);
  return r;
}

Value parse_value(const Dimension& dim, const std::string& text) {
  switch (dim.kind) {
    case DimensionKind::integer: return static_cast<std::int64_t>(std::stoll(text));
    case DimensionKind::categorical: return text;
    default: return std::stod(text);
  }
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_score(const std::optional<double>& s) {
  if (!s || !std::isfinite(*s)) return "";
  std::ostringstream out;
  out.precision(17);
  out << *s;
  return out.str();
}

// Timestamps are dropped so identical seeds give identical reports.
json report_json(const Sprint& sprint, const SearchSpace& space) {
  json trials = json::array();
  for (const auto& t : sprint.trials) {
    json j = t;
    j.erase("started_at");
    j.erase("finished_at");
    trials.push_back(std::move(j));
  }
  json dims = json::array();
  for (const auto& d : space.dimensions()) {
    json view = to_json_view(scatter_series(sprint, space, d.name));
    view.erase("points");
    dims.push_back(std::move(view));
  }
  json incumbent = nullptr;
  if (auto i = sprint.incumbent()) incumbent = trials[*i];
  return {{"sprint", sprint.id},
          {"thread", sprint.thread_id},
          {"name", sprint.name},
          {"status", to_string(sprint.status)},
          {"space_version", sprint.space_version},
          {"trials", trials},
          {"incumbent", incumbent},
          {"dimensions", dims}};
}

std::string report_csv(const Sprint& sprint, const SearchSpace& space) {
  std::ostringstream out;
  out << "trial_id,status,score";
  for (const auto& d : space.dimensions()) out << ',' << csv_cell(d.name);
  out << '\n';
  for (const auto& t : sprint.trials) {
    out << t.id << ',' << to_string(t.status) << ',' << format_score(t.final_score);
    for (const auto& d : space.dimensions()) {
      out << ',';
      auto it = t.point.values.find(d.name);
      if (it != t.point.values.end()) out << csv_cell(to_string(it->second));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sprintopt: sprint-based hyperparameter optimization"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults");

  std::string store_path = "./sprintopt-store";
  app.add_option("--store", store_path, "Store directory")->envname("SPRINTOPT_STORE");

  // init-thread
  auto* init = app.add_subcommand("init-thread", "Create a thread and its initial space");
  std::string thread_name, grouping = "GLOBAL", objective = "multitask_sim";
  init->add_option("--name", thread_name, "Thread id")->required();
  init->add_option("--grouping", grouping, "GLOBAL or LR0-L2")->capture_default_str();
  init->add_option("--objective", objective, "quadratic_bowl|branin_like|multitask_sim|toy_pipeline")
      ->capture_default_str();

  // run-sprint
  auto* run = app.add_subcommand("run-sprint", "Create and execute a sprint");
  std::string run_thread, sampler = "gp", pruner = "none", fidelity = "T1_V1_M25", prime, sprint_label;
  std::size_t calls = 10, random = 5;
  std::uint64_t seed = 0;
  int workers = 1, calibration_epochs = 0;
  std::optional<std::int64_t> space_version;
  run->add_option("--thread", run_thread)->required();
  run->add_option("--sampler", sampler)->check(CLI::IsMember({"gp", "tpe"}))->capture_default_str();
  run->add_option("--pruner", pruner)->check(CLI::IsMember({"none", "hyperband"}))->capture_default_str();
  run->add_option("--fidelity", fidelity, "T{k}_V{k}_M{e}")->capture_default_str();
  bool scheduler = false;
  std::string early_stop = "none";
  run->add_flag("--scheduler", scheduler, "Enable the learning-rate scheduler");
  run->add_option("--early-stop", early_stop)->check(CLI::IsMember({"none", "end_of_warmup"}))->capture_default_str();
  run->add_option("--calls", calls)->capture_default_str();
  run->add_option("--random", random)->capture_default_str();
  run->add_option("--seed", seed)->envname("SPRINTOPT_SEED")->capture_default_str();
  run->add_option("--prime", prime, "{warm|cold}:{sprint}:{topN}");
  run->add_option("--space-version", space_version, "Space version (latest by default)");
  run->add_option("--calibration-epochs", calibration_epochs)->capture_default_str();
  run->add_option("--workers", workers, "Worker pool size")->envname("SPRINTOPT_WORKERS")->capture_default_str();
  run->add_option("--sprint-name", sprint_label, "Explicit sprint name");

  // prune
  auto* prune = app.add_subcommand("prune", "Prune a complete sprint's space to its top-k hull");
  std::string prune_sprint;
  std::size_t k = 10;
  std::vector<std::string> freezes;
  MarginPolicy margins;
  prune->add_option("--sprint", prune_sprint)->required();
  prune->add_option("--k", k)->capture_default_str();
  prune->add_option("--freeze", freezes, "dim=value, repeatable");
  prune->add_option("--log-factor", margins.log_factor)->capture_default_str();
  prune->add_option("--uniform-delta", margins.uniform_delta)->capture_default_str();
  prune->add_option("--integer-delta", margins.integer_delta)->capture_default_str();

  // three-phase
  auto* phases = app.add_subcommand("three-phase", "Run the three-phase baseline on a thread");
  std::string phase_thread;
  std::uint64_t phase_seed = 0;
  int phase_workers = 1;
  phases->add_option("--thread", phase_thread)->required();
  phases->add_option("--seed", phase_seed)->envname("SPRINTOPT_SEED")->capture_default_str();
  phases->add_option("--workers", phase_workers)->envname("SPRINTOPT_WORKERS")->capture_default_str();

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Fit the toy pipeline with threshold calibration");
  std::uint64_t pipeline_seed = 7;
  int epochs = 25, n_docs = 1000, classes = 96;
  calibrate::CalibrationPolicy policy;
  cal->add_option("--pipeline-seed", pipeline_seed)->capture_default_str();
  cal->add_option("--epochs", epochs)->capture_default_str();
  cal->add_option("--calib-iters", policy.max_calib_iters)->capture_default_str();
  cal->add_option("--docs", n_docs, "Validation/test documents")->capture_default_str();
  cal->add_option("--classes", classes, "Relation classes")->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "Trials, incumbent and per-dimension hulls of a sprint");
  std::string report_sprint, format = "json";
  report->add_option("--sprint", report_sprint)->required();
  report->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  std::string addr = "127.0.0.1:8080";
  serve->add_option("--addr", addr, "HOST:PORT")->envname("SPRINTOPT_ADDR")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cal) {
      auto corpus = generate_corpus(pipeline_seed, n_docs, classes);
      ToyPipeline model(std::move(corpus));
      const auto initial = calibrate::ThresholdSet::uniform(0.5, model.relation_classes());
      const auto fit = calibrate::fit_with_calibration(model, epochs, policy, initial);
      std::cout << json(fit).dump(2) << '\n';
      return fit.failed ? kFailed : 0;
    }

    Store store(store_path);
    Engine engine(store);

    if (*init) {
      init_thread(engine, thread_name, objective, grouping);
      std::cout << json(store.read([&](const StoreState& s) { return s.thread(thread_name).space(1); })).dump(2)
                << '\n';
      return 0;
    }

    if (*run) {
      SprintConfig config;
      config.sampler = sampler_from_string(sampler);
      config.pruner = pruner_from_string(pruner);
      config.fidelity = FidelitySpec::parse(fidelity);
      config.fidelity.scheduler_enabled = scheduler;
      config.fidelity.early_stop = early_stop_from_string(early_stop);
      config.n_calls = calls;
      config.n_random = random;
      config.seed = seed;
      config.calibration_epochs = calibration_epochs;
      std::optional<PrimingRequest> priming;
      if (!prime.empty()) priming = parse_prime(prime);
      const std::string id = engine.create_sprint(run_thread, config, space_version, sprint_label, priming);
      const Thread thread = store.read([&](const StoreState& s) { return s.thread(run_thread); });
      const auto handle = default_objective(thread);
      const SprintResult r = engine.run_sprint(id, *handle, workers);
      std::cout << sprint_view(store.read([&](const StoreState& s) { return s.sprint(id); })).dump(2) << '\n';
      if (r.status != SprintStatus::complete) {
        std::cerr << "sprint " << id << " failed: " << r.error << '\n';
        return kFailed;
      }
      return 0;
    }

    if (*prune) {
      const SearchSpace base = store.read([&](const StoreState& s) {
        const Sprint& sp = s.sprint(prune_sprint);
        return s.thread(sp.thread_id).space(sp.space_version);
      });
      std::vector<std::pair<std::string, Value>> pins;
      for (const auto& f : freezes) {
        const auto eq = f.find('=');
        if (eq == std::string::npos) throw InvalidArgument("--freeze expects dim=value, got '" + f + "'");
        const std::string dim = f.substr(0, eq);
        pins.emplace_back(dim, parse_value(base.dimension(dim), f.substr(eq + 1)));
      }
      const SearchSpace pruned = engine.prune_sprint(prune_sprint, k, margins, pins);
      std::cout << pruned.version() << '\n' << json(pruned).dump(2) << '\n';
      return 0;
    }

    if (*phases) {
      const Thread thread = store.read([&](const StoreState& s) { return s.thread(phase_thread); });
      const auto handle = default_objective(thread);
      auto config = ThreePhaseConfig::defaults(phase_thread, phase_seed, thread.nominal_epochs);
      config.worker_limit = phase_workers;
      const PhaseReport r = run_three_phase(engine, *handle, config);
      std::cout << json(r).dump(2) << '\n';
      if (!r.complete) {
        std::cerr << "three-phase run failed: " << r.error << '\n';
        return kFailed;
      }
      return 0;
    }

    if (*report) {
      const auto [sprint, space] = store.read([&](const StoreState& s) {
        const Sprint& sp = s.sprint(report_sprint);
        return std::make_pair(sp, s.thread(sp.thread_id).space(sp.space_version));
      });
      if (format == "csv")
        std::cout << report_csv(sprint, space);
      else
        std::cout << report_json(sprint, space).dump(2) << '\n';
      return 0;
    }

    if (*serve) {
      const auto colon = addr.rfind(':');
      if (colon == std::string::npos) throw InvalidArgument("--addr expects HOST:PORT");
      Service service(engine);
      std::cerr << "serving " << store_path << " on " << addr << '\n';
      service.listen(addr.substr(0, colon), std::stoi(addr.substr(colon + 1)));
      return 0;
    }
  } catch (const PrimingError& e) {
    std::cerr << "priming rejected (" << to_string(e.reason()) << "): " << e.what() << '\n';
    return kFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
