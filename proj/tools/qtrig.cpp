// qtrig - percentile-sampling trigger detection for scalar field series.
//
// Subcommands wire the library into reproducible experiments: sample-size
// calculus, indicator series, trigger runs and threshold studies, quantile
// error studies, and synthetic series generation. Every run with an --out
// directory records a manifest.json describing inputs, outputs and the
// full parameter set; reruns with the same seed reproduce outputs byte for
// byte.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qtrig/qtrig.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qtrig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDegenerate = 4;

struct RunRecorder {
  std::string command;
  json parameters = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();

  void write(const fs::path& out_dir) {
    json j;
    j["tool"] = "qtrig";
    j["version"] = QTRIG_VERSION_STRING;
    j["command"] = command;
    j["parameters"] = parameters;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    atomic_write_file(out_dir / "manifest.json", j.dump(2) + "\n");
  }
};

void emit(const std::optional<fs::path>& out_dir, const std::string& filename,
          const std::string& content, RunRecorder& rec) {
  if (out_dir) {
    const auto path = *out_dir / filename;
    atomic_write_file(path, content);
    rec.outputs.push_back(path.string());
  } else {
    std::cout << content;
  }
}

void prepare_out(std::optional<fs::path>& out_dir) {
  if (out_dir) fs::create_directories(*out_dir);
}

/// Resolves --scenario values: a builtin name, or a path to a scenario.json.
ScenarioSpec resolve_scenario(const std::string& value) {
  if (fs::exists(value) && fs::is_regular_file(value))
    return load_scenario(value);
  return builtin_scenario(value);
}

std::vector<std::int64_t> parse_steps_subset(const std::string& text,
                                             std::int64_t max_steps) {
  std::vector<std::int64_t> steps;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-', 1);  // allow negative sign at front
    std::int64_t lo, hi;
    if (dash == std::string::npos) {
      lo = hi = std::stoll(item);
    } else {
      lo = std::stoll(item.substr(0, dash));
      hi = std::stoll(item.substr(dash + 1));
    }
    if (lo > hi || lo < 0 || hi >= max_steps)
      throw std::invalid_argument("--steps-subset: bad range '" + item + "'");
    for (std::int64_t s = lo; s <= hi; ++s) steps.push_back(s);
  }
  if (steps.empty())
    throw std::invalid_argument("--steps-subset: no steps given");
  return steps;
}

// Shared sampling/input options for indicator and trigger runs.
struct SourceOptions {
  std::string input_dir;
  std::string scenario;

  struct Resolved {
    SnapshotProvider provider;
    std::vector<std::int64_t> steps;
    std::optional<GroundTruth> window;
    std::optional<ScenarioSpec> spec;
  };

  Resolved resolve(RunRecorder& rec) const {
    Resolved r;
    if (!scenario.empty()) {
      r.spec = resolve_scenario(scenario);
      r.provider = scenario_provider(*r.spec);
      r.steps = scenario_steps(*r.spec);
      r.window = r.spec->window;
      rec.inputs.push_back("scenario:" + r.spec->name);
    } else {
      auto entries = ingest_series(input_dir);
      if (entries.empty())
        throw format_error(input_dir + ": no snapshots found");
      for (const auto& e : entries) r.steps.push_back(e.step);
      r.provider = series_provider(std::move(entries));
      rec.inputs.push_back(input_dir);
    }
    return r;
  }

  void add_to(CLI::App* cmd) {
    auto* in = cmd->add_option("--input", input_dir,
                               "Directory of step_NNNNNN.qf1/.txt snapshots");
    auto* sc = cmd->add_option(
        "--scenario", scenario,
        "Builtin scenario name or path to a scenario.json");
    in->excludes(sc);
    sc->excludes(in);
  }

  void require_one() const {
    if (input_dir.empty() == scenario.empty())
      throw CLI::ValidationError(
          "source", "exactly one of --input or --scenario is required");
  }
};

struct SamplingOptions {
  bool exact = false;
  std::uint64_t k = 0;
  std::uint64_t samples_per_rank = 0;
  std::uint64_t ranks = 0;

  void add_to(CLI::App* cmd) {
    auto* ex = cmd->add_flag("--exact", exact,
                             "Exact full-data percentiles (reference path)");
    auto* kopt = cmd->add_option(
        "--k", k, "Global sample count per evaluated step");
    auto* spr = cmd->add_option("--samples-per-rank", samples_per_rank,
                                "Stratified samples drawn from each rank");
    cmd->add_option("--ranks", ranks,
                    "Rank count for --samples-per-rank sampling");
    kopt->excludes(spr);
    spr->excludes(kopt);
    ex->excludes(kopt);
    ex->excludes(spr);
  }

  SamplingPlan plan() const {
    if (exact) return SamplingPlan::exact();
    if (samples_per_rank > 0) {
      if (ranks == 0)
        throw CLI::ValidationError("--samples-per-rank",
                                   "requires --ranks");
      return SamplingPlan::per_rank(samples_per_rank, ranks);
    }
    if (k > 0) return SamplingPlan::global(SampleBudget::from_samples(k));
    // Default budget: 1% percentile error at 99.9% confidence for the
    // three-read indicator bound.
    return SamplingPlan::global(
        SampleBudget::from_error(0.01, 0.001, BoundKind::p_indicator));
  }

  json to_json() const { return sampling_plan_json(plan()); }
};

IndicatorParams params_from(double alpha, double beta, double gamma) {
  IndicatorParams p;
  p.alpha = alpha;
  p.beta = beta;
  p.gamma = gamma;
  p.validate();
  return p;
}

// ---------------------------------------------------------------------
// samples-needed

int cmd_samples_needed(double epsilon, double delta, const std::string& bound,
                       bool table, std::optional<fs::path> out_dir) {
  RunRecorder rec;
  rec.command = "samples-needed";
  const BoundKind kind = bound == "single" ? BoundKind::single_percentile
                                           : BoundKind::p_indicator;
  rec.parameters = {{"epsilon", epsilon},
                    {"delta", delta},
                    {"bound", bound},
                    {"table", table}};
  prepare_out(out_dir);

  const auto k = samples_needed(epsilon, delta, kind);
  std::cout << k << "\n";

  if (table) {
    std::ostringstream csv;
    csv << "epsilon,confidence,delta,k\n";
    for (const double eps : {0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001}) {
      for (const double conf : {0.9, 0.99, 0.999}) {
        const double d = 1.0 - conf;
        csv << fmt_double(eps) << ',' << fmt_double(conf) << ','
            << fmt_double(d) << ',' << samples_needed(eps, d, kind) << '\n';
      }
    }
    emit(out_dir, "table.csv", csv.str(), rec);
  }
  if (out_dir) rec.write(*out_dir);
  return kExitOk;
}

// ---------------------------------------------------------------------
// indicator

int cmd_indicator(const SourceOptions& source, const SamplingOptions& sampling,
                  double alpha, double beta, double gamma,
                  std::uint64_t cadence, std::uint64_t seed,
                  std::optional<fs::path> out_dir) {
  RunRecorder rec;
  rec.command = "indicator";
  const auto params = params_from(alpha, beta, gamma);
  const auto resolved = source.resolve(rec);
  const auto plan = sampling.plan();
  rec.parameters = {{"alpha", alpha},     {"beta", beta}, {"gamma", gamma},
                    {"cadence", cadence}, {"seed", seed},
                    {"sampling", sampling.to_json()}};
  prepare_out(out_dir);

  const auto series = compute_indicator_series(
      resolved.provider, resolved.steps, params, plan, seed, cadence);
  const bool any_usable =
      std::any_of(series.begin(), series.end(),
                  [](const IndicatorPoint& pt) { return pt.value.has_value(); });
  if (!any_usable)
    throw degenerate_range_error(
        "indicator: every step has a collapsed value range (constant field?)");
  emit(out_dir, "indicator.csv", indicator_series_csv(series), rec);
  if (out_dir) rec.write(*out_dir);
  return kExitOk;
}

// ---------------------------------------------------------------------
// trigger

int cmd_trigger(const SourceOptions& source, const SamplingOptions& sampling,
                double alpha, double beta, double gamma,
                std::optional<double> tau, std::vector<double> tau_range,
                std::uint64_t confirm, std::uint64_t cadence,
                std::uint64_t realizations, std::vector<std::int64_t> window,
                std::uint64_t seed, std::optional<fs::path> out_dir) {
  RunRecorder rec;
  rec.command = "trigger";
  const auto params = params_from(alpha, beta, gamma);
  const auto resolved = source.resolve(rec);
  const auto plan = sampling.plan();
  rec.parameters = {{"alpha", alpha},       {"beta", beta},
                    {"gamma", gamma},       {"confirm", confirm},
                    {"cadence", cadence},   {"seed", seed},
                    {"sampling", sampling.to_json()}};
  prepare_out(out_dir);

  if (tau) {
    rec.parameters["tau"] = *tau;
    TriggerConfig config;
    config.tau = *tau;
    config.confirm = confirm;
    config.cadence = cadence;
    config.validate();
    const auto fired = run_trigger(resolved.provider, resolved.steps, params,
                                   plan, config, seed);
    const auto report = trigger_report_json(fired, config, params, plan, seed);
    emit(out_dir, "trigger.json", report.dump(2) + "\n", rec);
    if (out_dir) rec.write(*out_dir);
    return kExitOk;
  }

  // Threshold study: tau drawn uniformly per realization.
  const LevelRange range{tau_range[0], tau_range[1]};
  rec.parameters["tau_range"] = {range.lo, range.hi};
  rec.parameters["realizations"] = realizations;
  std::optional<GroundTruth> truth = resolved.window;
  if (window.size() == 2) truth = GroundTruth{window[0], window[1]};
  if (!truth)
    throw std::invalid_argument(
        "--tau-range study over --input needs --window LO HI");
  const auto study = trigger_variability_study(
      resolved.provider, resolved.steps, *truth, params, plan, realizations,
      range, confirm, cadence, seed);
  emit(out_dir, "study.csv", variability_study_csv(study), rec);
  emit(out_dir, "study.json", variability_study_json(study).dump(2) + "\n",
       rec);
  if (out_dir) rec.write(*out_dir);
  return kExitOk;
}

// ---------------------------------------------------------------------
// error-study

int cmd_error_study(const std::string& input, const std::string& scenario,
                    std::int64_t step, double alpha, const std::string& k_list,
                    std::uint64_t runs, std::uint64_t seed,
                    std::optional<fs::path> out_dir) {
  RunRecorder rec;
  rec.command = "error-study";
  if (input.empty() == scenario.empty())
    throw CLI::ValidationError("source",
                               "exactly one of --input or --scenario is required");

  FieldSnapshot snapshot = [&] {
    if (!input.empty()) {
      rec.inputs.push_back(input);
      return read_snapshot(input, 0);
    }
    const auto spec = resolve_scenario(scenario);
    rec.inputs.push_back("scenario:" + spec.name);
    return generate_eager(spec, step);
  }();

  std::vector<std::uint64_t> ks;
  {
    std::stringstream stream(k_list);
    std::string item;
    while (std::getline(stream, item, ',')) {
      if (!item.empty()) ks.push_back(std::stoull(item));
    }
  }
  if (ks.empty()) throw std::invalid_argument("--k-list: no sample counts");

  rec.parameters = {{"alpha", alpha}, {"k_list", ks},
                    {"runs", runs},   {"seed", seed},
                    {"step", step}};
  prepare_out(out_dir);

  json summary = json::array();
  for (const auto k : ks) {
    const auto stats = quantile_error_study(
        snapshot, alpha, SampleBudget::from_samples(k), runs, seed);
    summary.push_back(error_stats_json(stats));
    emit(out_dir, "errors_k" + std::to_string(k) + ".csv",
         error_stats_csv(stats), rec);
    std::fprintf(stderr, "k=%llu mean|eps|=%.6f max|eps|=%.6f\n",
                 static_cast<unsigned long long>(k), stats.mean_abs,
                 stats.max_abs);
  }
  emit(out_dir, "summary.json", summary.dump(2) + "\n", rec);
  if (out_dir) rec.write(*out_dir);
  return kExitOk;
}

// ---------------------------------------------------------------------
// generate

int cmd_generate(const std::string& scenario, const fs::path& out_dir,
                 const std::string& steps_subset, bool force) {
  RunRecorder rec;
  rec.command = "generate";
  const auto spec = resolve_scenario(scenario);
  rec.inputs.push_back("scenario:" + spec.name);

  const auto series_dir = out_dir / "series";
  if (fs::exists(series_dir) && !fs::is_empty(series_dir) && !force)
    throw CLI::ValidationError(
        "--out", series_dir.string() + " already holds files (use --force)");
  fs::create_directories(series_dir);

  std::vector<std::int64_t> steps;
  if (steps_subset.empty()) {
    steps = scenario_steps(spec);
  } else {
    steps = parse_steps_subset(steps_subset, spec.steps);
  }
  rec.parameters = {{"scenario", spec.name},
                    {"steps_subset", steps_subset},
                    {"force", force},
                    {"steps_written", steps.size()}};

  for (const auto t : steps) {
    const auto snap = generate_eager(spec, t);
    const auto path = series_dir / step_filename(t);
    write_qf1(path, snap.eager_values());
    rec.outputs.push_back(path.string());
  }
  json series_manifest;
  series_manifest["steps"] = steps;
  atomic_write_file(series_dir / "manifest.json",
                    series_manifest.dump(2) + "\n");
  rec.outputs.push_back((series_dir / "manifest.json").string());

  const json spec_json = spec;
  atomic_write_file(out_dir / "scenario.json", spec_json.dump(2) + "\n");
  rec.outputs.push_back((out_dir / "scenario.json").string());

  rec.write(out_dir);
  std::cout << "wrote " << steps.size() << " snapshots under " << series_dir
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Percentile-sampling trigger detection for scalar field series"};
  app.require_subcommand(1);
  app.set_version_flag("--version", QTRIG_VERSION_STRING);

  // Common knobs, registered per subcommand.
  std::uint64_t seed = 12345;
  std::string out_str;
  auto add_common = [&](CLI::App* cmd, bool with_seed = true) {
    cmd->add_option("--out", out_str, "Output directory (holds manifest.json)");
    if (with_seed)
      cmd->add_option("--seed", seed, "Master seed")->envname("QTRG_SEED");
  };

  // samples-needed
  double epsilon = 0.01, delta = 0.001;
  std::string bound = "pind";
  bool table = false;
  auto* sn = app.add_subcommand("samples-needed",
                                "Sample count for an (epsilon, delta) budget");
  sn->add_option("--epsilon", epsilon, "Percentile-level error in (0,1)")
      ->required();
  sn->add_option("--delta", delta, "Failure probability in (0,1)")->required();
  sn->add_option("--bound", bound, "Bound kind: single | pind")
      ->check(CLI::IsMember({"single", "pind"}));
  sn->add_flag("--table", table, "Emit the error/confidence level-curve table");
  add_common(sn, false);

  // indicator
  SourceOptions ind_source;
  SamplingOptions ind_sampling;
  double alpha = 0.94, beta = 0.98, gamma = 0.01;
  std::uint64_t cadence = 1;
  auto* ind = app.add_subcommand("indicator",
                                 "Indicator time series over a snapshot series");
  ind_source.add_to(ind);
  ind_sampling.add_to(ind);
  ind->add_option("--alpha", alpha, "Lower bound of the top percentile band");
  ind->add_option("--beta", beta, "High reference percentile");
  ind->add_option("--gamma", gamma, "Low reference percentile");
  ind->add_option("--cadence", cadence, "Evaluate every n-th step");
  add_common(ind);

  // trigger
  SourceOptions trg_source;
  SamplingOptions trg_sampling;
  std::optional<double> tau;
  std::vector<double> tau_range;
  std::vector<std::int64_t> window;
  std::uint64_t confirm = 1, trg_cadence = 1, realizations = 200;
  auto* trg = app.add_subcommand("trigger",
                                 "Trigger run or randomized-threshold study");
  trg_source.add_to(trg);
  trg_sampling.add_to(trg);
  trg->add_option("--alpha", alpha, "Lower bound of the top percentile band");
  trg->add_option("--beta", beta, "High reference percentile");
  trg->add_option("--gamma", gamma, "Low reference percentile");
  auto* tau_opt = trg->add_option("--tau", tau, "Threshold in (0,1)");
  auto* tau_range_opt =
      trg->add_option("--tau-range", tau_range,
                      "Draw tau uniformly from [LO, HI] per realization")
          ->expected(2);
  tau_opt->excludes(tau_range_opt);
  tau_range_opt->excludes(tau_opt);
  trg->add_option("--confirm", confirm,
                  "Consecutive sub-threshold steps required");
  trg->add_option("--cadence", trg_cadence, "Consume every n-th step");
  trg->add_option("--realizations", realizations,
                  "Realization count for --tau-range studies");
  trg->add_option("--window", window,
                  "Ground-truth window LO HI (for --input studies)")
      ->expected(2);
  add_common(trg);

  // error-study
  std::string es_input, es_scenario, k_list = "12000,24000,48000";
  std::int64_t es_step = 0;
  std::uint64_t runs = 100;
  double es_alpha = 0.94;
  auto* es = app.add_subcommand("error-study",
                                "Percentile-rank error of repeated estimates");
  auto* es_in = es->add_option("--input", es_input, "Snapshot file (.qf1/.txt)");
  auto* es_sc = es->add_option("--scenario", es_scenario,
                               "Builtin scenario name or scenario.json path");
  es_in->excludes(es_sc);
  es_sc->excludes(es_in);
  es->add_option("--step", es_step, "Scenario step to materialize");
  es->add_option("--alpha", es_alpha, "Percentile level under study");
  es->add_option("--k-list", k_list, "Comma-separated sample counts");
  es->add_option("--runs", runs, "Estimator repetitions per sample count");
  add_common(es);

  // generate
  std::string gen_scenario, steps_subset;
  bool force = false;
  auto* gen = app.add_subcommand("generate",
                                 "Materialize a scenario to snapshot files");
  gen->add_option("--scenario", gen_scenario,
                  "Builtin scenario name or scenario.json path")
      ->required();
  gen->add_option("--steps-subset", steps_subset,
                  "Steps to write, e.g. 0,5,10-20 (default: all)");
  gen->add_flag("--force", force, "Overwrite an existing series directory");
  add_common(gen);

  try {
    app.parse(argc, argv);

    const std::optional<fs::path> out_dir =
        out_str.empty() ? std::nullopt : std::optional<fs::path>(out_str);

    if (sn->parsed())
      return cmd_samples_needed(epsilon, delta, bound, table, out_dir);
    if (ind->parsed()) {
      ind_source.require_one();
      return cmd_indicator(ind_source, ind_sampling, alpha, beta, gamma,
                           cadence, seed, out_dir);
    }
    if (trg->parsed()) {
      trg_source.require_one();
      if (!tau && tau_range.size() != 2)
        throw CLI::ValidationError("--tau",
                                   "one of --tau or --tau-range is required");
      return cmd_trigger(trg_source, trg_sampling, alpha, beta, gamma, tau,
                         tau_range, confirm, trg_cadence, realizations, window,
                         seed, out_dir);
    }
    if (es->parsed())
      return cmd_error_study(es_input, es_scenario, es_step, es_alpha, k_list,
                             runs, seed, out_dir);
    if (gen->parsed()) {
      if (!out_dir)
        throw CLI::ValidationError("--out", "generate requires --out");
      return cmd_generate(gen_scenario, *out_dir, steps_subset, force);
    }
    return kExitUsage;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return kExitUsage;
  } catch (const degenerate_range_error& e) {
    std::cerr << "error (degenerate data): " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const format_error& e) {
    std::cerr << "error (data/format): " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (filesystem): " << e.what() << "\n";
    return kExitData;
  } catch (const std::out_of_range& e) {
    std::cerr << "error (data): " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error (usage): " << e.what() << "\n";
    return kExitUsage;
  }
}
