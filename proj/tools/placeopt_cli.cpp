// placeopt command-line tool. One subcommand per pipeline stage.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "placeopt/acquisition.hpp"
#include "placeopt/error.hpp"
#include "placeopt/io.hpp"
#include "placeopt/subprocess_evaluator.hpp"

namespace fs = std::filesystem;
using namespace placeopt;
using io::json;

namespace {

constexpr const char* kDefaultCatalog = "FA:A,SWA:S,KDA:K,GDN:G";

struct Common {
  std::string catalog = kDefaultCatalog;
  std::uint64_t seed = 0;
  std::string out;
};

void add_catalog(CLI::App* cmd, Common& c) {
  cmd->add_option("--catalog", c.catalog, "Mixer types as NAME:CODE,...")->capture_default_str();
}

// Output locations are not inputs, so they stay out of the config hash.
json config_of(const CLI::App* cmd) {
  std::istringstream all(cmd->config_to_str(true, false));
  std::string line, kept;
  while (std::getline(all, line)) {
    const std::string key = line.substr(0, line.find('='));
    if (key.ends_with("out") || key.starts_with("csv-dir")) continue;
    kept += line + "\n";
  }
  return {{"command", cmd->get_name()}, {"options", kept}};
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << text;
}

void write_artifact(const std::string& path, const json& artifact) { write_text(path, artifact.dump(2) + "\n"); }

std::optional<CostBand> parse_band(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ValidationError("cost band must look like LO:HI");
  try {
    CostBand b{std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
    if (!(b.lo <= b.hi)) throw ValidationError("cost band '" + text + "' is empty");
    return b;
  } catch (const std::logic_error&) {
    throw ValidationError("malformed cost band '" + text + "'");
  }
}

std::vector<ExpansionConfig> parse_candidates(const std::string& text) {
  std::vector<ExpansionConfig> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(ExpansionConfig::parse(item));
  if (out.empty()) throw ValidationError("no expansion candidates given");
  return out;
}

CostModel load_cost_model(const std::string& path, const MixerCatalog& catalog) {
  const json j = io::read_json_file(path);
  io::check_schema(j, path);
  return io::cost_model_from_json(j, catalog);
}

/// "synthetic:<landscape.json>" or "cmd:<shell command>".
std::unique_ptr<Evaluator> make_evaluator(const std::string& spec, const MixerCatalog& catalog, bool noisy_cmd) {
  if (spec.rfind("synthetic:", 0) == 0) {
    const std::string path = spec.substr(10);
    const json j = io::read_json_file(path);
    io::check_schema(j, path);
    auto land = io::landscape_from_json(j);
    if (land.potentials.num_types != catalog.size())
      throw ValidationError("landscape has " + std::to_string(land.potentials.num_types) + " types, catalog has " +
                            std::to_string(catalog.size()));
    return std::make_unique<SyntheticEvaluator>(std::move(land));
  }
  if (spec.rfind("cmd:", 0) == 0) return std::make_unique<SubprocessEvaluator>(spec.substr(4), catalog, noisy_cmd);
  throw ValidationError("unknown evaluator '" + spec + "' (expected synthetic:<path> or cmd:<command>)");
}

struct PriorFlags {
  double alpha = 1.0;
  double a0 = 1e-3;
  double b0 = 1e-3;
  std::string candidates = "o1,o2r1,o2r2,o2r3,o3r1,o3r2,o3r3";
  double guard_ratio = 2.0;
  std::string normalize_ref;
  std::string normalize_order = "normalize-then-fit";

  void add(CLI::App* cmd) {
    cmd->add_option("--alpha", alpha, "Prior precision scale")->capture_default_str();
    cmd->add_option("--a0", a0, "Inverse-gamma shape")->capture_default_str();
    cmd->add_option("--b0", b0, "Inverse-gamma scale")->capture_default_str();
    cmd->add_option("--candidates", candidates, "Expansion candidates, e.g. o1,o2r1")->capture_default_str();
    cmd->add_option("--guard-ratio", guard_ratio, "Minimum samples per feature")->capture_default_str();
    cmd->add_option("--normalize-ref", normalize_ref, "Records whose score range defines min-max normalization");
    cmd->add_option("--normalize-order", normalize_order, "normalize-then-fit or fit-then-normalize")
        ->capture_default_str();
  }

  NIGPrior prior() const {
    NIGPrior p{alpha, a0, b0};
    p.validate();
    return p;
  }

  FitOptions fit(const MixerCatalog& catalog) const {
    FitOptions f;
    if (!normalize_ref.empty()) {
      std::vector<double> ref;
      for (const auto& r : io::read_records(normalize_ref, catalog)) ref.push_back(r.score);
      f.normalization = ScoreNormalization::fit(ref);
    }
    if (normalize_order == "normalize-then-fit")
      f.order = NormalizeOrder::kNormalizeThenFit;
    else if (normalize_order == "fit-then-normalize")
      f.order = NormalizeOrder::kFitThenNormalize;
    else
      throw ValidationError("unknown normalize order '" + normalize_order + "'");
    return f;
  }
};

void warn_fallback(const ExpansionSelection& sel, std::size_t n) {
  if (sel.fell_back)
    std::cerr << "warning: " << n << " records pass the feature guard for no candidate; using "
              << sel.selected.label() << "\n";
}

// ---------------------------------------------------------------- fit-cost

struct FitCostArgs {
  Common c;
  std::string records;
  int min_count = 3;
  std::string reference;
  bool intercept = false;
};

void cmd_fit_cost(const CLI::App* cmd, const FitCostArgs& a) {
  const auto catalog = MixerCatalog::parse(a.c.catalog);
  const auto all = io::read_throughput_records(a.records, catalog);
  const auto kept = filter_singletons(all, a.min_count);
  RegressionOptions opt;
  opt.reference_type = a.reference.empty() ? 0 : catalog.index_of_name(a.reference);
  opt.fit_intercept = a.intercept;
  const CostModel model = fit_regression(kept, catalog.size(), opt);
  const auto& s = *model.fit_stats();
  std::cerr << "records: " << all.size() << " read, " << kept.size() << " kept (min count " << a.min_count << ")\n"
            << "r2: " << s.r_squared << "  mae_frac: " << s.mean_abs_error_frac << "\n";
  for (int m = 0; m < catalog.size(); ++m)
    std::cerr << "  " << catalog.name(m) << ": " << model.normalized()[static_cast<std::size_t>(m)] << "\n";
  write_artifact(a.c.out, io::stamp(io::cost_model_to_json(model, catalog), config_of(cmd)));
}

// ---------------------------------------------------------------- explore

struct ExploreArgs {
  Common c;
  int layers = 48;
  int n = 1000;
  std::string scheme = "global";
  int min_count = 0;
  std::string cost_model;
  std::string band;
  std::string evaluator;
  bool noisy = false;
};

void cmd_explore(const ExploreArgs& a) {
  const auto catalog = MixerCatalog::parse(a.c.catalog);
  const int M = catalog.size();
  if (a.n < 0) throw ValidationError("--n must be >= 0");
  std::optional<CostModel> cost;
  if (!a.cost_model.empty()) cost = load_cost_model(a.cost_model, catalog);
  const auto band = parse_band(a.band);

  std::vector<Placement> placements;
  if (a.scheme == "feasible") {
    placements = sample_exploration(a.c.seed, a.n, a.layers, M, a.min_count, cost ? &*cost : nullptr, band);
  } else {
    if (band || a.min_count > 0) throw ValidationError("--band and --min-count need --scheme feasible");
    PlacementSampler sampler(a.c.seed, a.layers, M, parse_sampling_scheme(a.scheme));
    for (int i = 0; i < a.n; ++i) placements.push_back(sampler.next());
  }

  if (a.evaluator.empty()) {
    std::string text;
    for (const auto& p : placements) text += to_code_string(p, catalog) + "\n";
    write_text(a.c.out, text);
    return;
  }
  auto ev = make_evaluator(a.evaluator, catalog, a.noisy);
  const auto scores = placements.empty() ? std::vector<double>{} : ev->evaluate(placements);
  if (scores.size() != placements.size()) throw EvaluatorError("evaluator returned the wrong number of scores");
  std::vector<EvaluationRecord> records;
  for (std::size_t i = 0; i < placements.size(); ++i) {
    EvaluationRecord r{placements[i], scores[i], std::nullopt, std::nullopt};
    if (cost) r.cost = cost->placement_cost(placements[i]);
    records.push_back(std::move(r));
  }
  std::ostringstream out;
  io::write_records(out, records, catalog);
  write_text(a.c.out, out.str());
}

// ---------------------------------------------------------------- optimize

struct OptimizeArgs {
  Common c;
  std::string records;
  std::string cost_model;
  std::optional<double> budget;
  int min_count = 0;
  PriorFlags prior;
  std::string posterior_out;
  std::string potentials_out;
};

void cmd_optimize(const CLI::App* cmd, const OptimizeArgs& a) {
  const auto catalog = MixerCatalog::parse(a.c.catalog);
  const int M = catalog.size();
  const auto records = io::read_records(a.records, catalog);
  if (records.empty()) throw ValidationError("no records in '" + a.records + "'");
  const CostModel cost = load_cost_model(a.cost_model, catalog);
  const auto candidates = parse_candidates(a.prior.candidates);
  const auto fit = a.prior.fit(catalog);

  const auto sel = select_expansion(records, candidates, a.prior.prior(), M, a.prior.guard_ratio, fit);
  warn_fallback(sel, records.size());
  const auto posterior = fit_surrogate(records, sel.selected, a.prior.prior(), M, fit);
  const json config = config_of(cmd);

  json posterior_json = io::posterior_to_json(posterior, catalog);
  const std::string posterior_hash = io::content_hash(posterior_json);
  if (!a.posterior_out.empty()) write_artifact(a.posterior_out, io::stamp(posterior_json, config));
  const auto potentials = extract_potentials(posterior);
  if (!a.potentials_out.empty()) {
    json pj = io::potentials_to_json(potentials);
    pj["posterior_hash"] = posterior_hash;
    write_artifact(a.potentials_out, io::stamp(pj, config));
  }

  json evidence = json::array();
  for (const auto& c : sel.candidates) {
    evidence.push_back({{"expansion", c.config.label()},
                        {"features", c.features},
                        {"eligible", c.eligible},
                        {"log_evidence", c.log_evidence ? json(*c.log_evidence) : json(nullptr)}});
  }
  json artifact{{"expansion", sel.selected.label()},
                {"fell_back", sel.fell_back},
                {"n_records", records.size()},
                {"evidence", evidence},
                {"posterior_hash", posterior_hash}};

  if (a.budget) {
    DpResult dp = solve_all_allocations(potentials);
    std::erase_if(dp.solutions, [&](const AllocationSolution& s) { return !s.allocation.satisfies_min_count(a.min_count); });
    auto pt = constrained_optimum(dp, cost, *a.budget);
    pt.predicted_score = posterior.to_raw({pt.predicted_score, 0.0}).mean;
    artifact["budget"] = *a.budget;
    artifact["optimum"] = io::pareto_point_to_json(pt, catalog);
    std::cerr << "optimum at budget " << *a.budget << ": " << to_code_string(pt.placement, catalog) << " cost "
              << pt.cost << " predicted " << pt.predicted_score << "\n";
  } else {
    const auto frontier = surrogate_frontier(posterior, cost, a.min_count);
    artifact["frontier"] = io::frontier_to_json(frontier, catalog);
    std::cerr << "expansion " << sel.selected.label() << ", frontier of " << frontier.size() << " points\n";
  }
  write_artifact(a.c.out, io::stamp(artifact, config));
}

// ---------------------------------------------------------------- campaign

struct CampaignArgs {
  Common c;
  int layers = 48;
  std::string cost_model;
  std::string records;
  int explore = 0;
  std::string evaluator;
  bool noisy = false;
  AcquisitionConfig acq;
  std::optional<double> mean_floor;
  std::optional<int> per_allocation_k;
  std::string band;
  PriorFlags prior;
  std::string out_dir = "campaign";
};

void cmd_campaign(const CLI::App* cmd, CampaignArgs a) {
  const auto catalog = MixerCatalog::parse(a.c.catalog);
  const int M = catalog.size();
  const CostModel cost = load_cost_model(a.cost_model, catalog);
  auto evaluator = make_evaluator(a.evaluator, catalog, a.noisy);
  a.acq.mean_floor_quantile = a.mean_floor;
  a.acq.per_allocation_k = a.per_allocation_k;
  a.acq.cost_band = parse_band(a.band);
  a.acq.validate();
  const json config = config_of(cmd);
  fs::create_directories(a.out_dir);

  std::vector<EvaluationRecord> initial;
  if (!a.records.empty()) initial = io::read_records(a.records, catalog);
  if (a.explore > 0) {
    const auto placements = sample_exploration(a.c.seed, a.explore, a.layers, M, a.acq.candidate_min_count, &cost,
                                               a.acq.cost_band);
    const auto scores = evaluator->evaluate(placements);
    if (scores.size() != placements.size()) throw EvaluatorError("evaluator returned the wrong number of scores");
    for (std::size_t i = 0; i < placements.size(); ++i)
      initial.push_back({placements[i], scores[i], std::nullopt, cost.placement_cost(placements[i])});
  }
  if (initial.empty()) throw ValidationError("campaign needs --records or --explore");
  for (const auto& r : initial)
    if (r.placement.num_layers() != a.layers)
      throw ValidationError("initial record has " + std::to_string(r.placement.num_layers()) + " layers, --layers is " +
                            std::to_string(a.layers));
  io::write_records((fs::path(a.out_dir) / "initial_records.jsonl").string(), initial, catalog);

  RefinementOptions opt;
  opt.acquisition = a.acq;
  opt.prior = a.prior.prior();
  opt.candidates = parse_candidates(a.prior.candidates);
  opt.guard_ratio = a.prior.guard_ratio;
  opt.fit = a.prior.fit(catalog);
  opt.num_types = M;

  std::size_t persisted = initial.size();
  json rounds = json::array();
  auto observer = [&](const RoundSummary& s, std::span<const EvaluationRecord> recs, const SurrogatePosterior& post) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "round_%02d", s.round);
    io::write_records((fs::path(a.out_dir) / (std::string(stem) + "_records.jsonl")).string(), recs.subspan(persisted),
                      catalog);
    persisted = recs.size();
    io::write_json_file((fs::path(a.out_dir) / (std::string(stem) + "_posterior.json")).string(),
                        io::stamp(io::posterior_to_json(post, catalog), config));
    rounds.push_back({{"round", s.round},
                      {"expansion", s.expansion.label()},
                      {"fell_back", s.fell_back},
                      {"pool", s.pool_size},
                      {"evaluated", s.evaluated},
                      {"safe", s.safe},
                      {"upside", s.upside}});
    std::cerr << "round " << s.round << ": " << s.expansion.label() << ", pool " << s.pool_size << ", evaluated "
              << s.evaluated << " (" << s.safe << " safe, " << s.upside << " upside)\n";
  };

  const auto result = refinement_loop(*evaluator, std::move(initial), cost, opt, observer);
  io::write_records((fs::path(a.out_dir) / "records.jsonl").string(), result.records, catalog);
  io::write_json_file((fs::path(a.out_dir) / "final_posterior.json").string(),
                      io::stamp(io::posterior_to_json(result.posterior, catalog), config));
  json frontier{{"expansion", result.expansion.label()}, {"frontier", io::frontier_to_json(result.frontier, catalog)}};
  io::write_json_file((fs::path(a.out_dir) / "frontier.json").string(), io::stamp(frontier, config));
  io::write_json_file((fs::path(a.out_dir) / "summary.json").string(),
                      io::stamp({{"rounds", rounds}, {"n_records", result.records.size()}}, config));
  std::cerr << "frontier of " << result.frontier.size() << " points written to " << a.out_dir << "\n";
}

// ---------------------------------------------------------------- analyze-stability

struct StabilityArgs {
  Common c;
  std::string records;
  std::string cost_model;
  int window = 200;
  int stride = 1;
  std::vector<std::string> bands = {"all"};
  std::vector<double> tiers = {1.0, 0.5, 0.25, 0.1, 0.05};
  std::vector<int> ks = {5, 10, 20, 50};
  std::string csv_dir;
};

void cmd_analyze_stability(const CLI::App* cmd, const StabilityArgs& a) {
  const auto catalog = MixerCatalog::parse(a.c.catalog);
  const auto records = io::read_records(a.records, catalog);
  std::optional<CostModel> cost;
  if (!a.cost_model.empty()) cost = load_cost_model(a.cost_model, catalog);
  const auto data = pivot_records(records, cost ? &*cost : nullptr);
  StabilityOptions opt;
  opt.window = a.window;
  opt.stride = a.stride;
  opt.tiers = a.tiers;
  opt.overlap_k = a.ks;
  opt.bands.clear();
  for (const auto& b : a.bands) opt.bands.push_back(Band::parse(b));
  if (data.costs.empty() && !opt.bands.empty())
    std::cerr << "warning: no costs in records and no --cost-model; skipping rolling windows\n";
  const auto report = analyze_stability(data, opt);
  write_artifact(a.c.out, io::stamp(io::stability_to_json(report), config_of(cmd)));
  if (!a.csv_dir.empty()) {
    fs::create_directories(a.csv_dir);
    for (const auto& [name, text] : io::stability_to_csv(report))
      write_text((fs::path(a.csv_dir) / (name + ".csv")).string(), text);
  }
}

// ---------------------------------------------------------------- spec-decode

struct SpecArgs {
  Common c;
  std::string traces;
  int gamma = kDefaultGamma;
  std::string acceptance_records;
  std::string cost_model;
  std::optional<double> target_cost;
  int min_count = 0;
  PriorFlags prior;
};

void cmd_spec_decode(const CLI::App* cmd, const SpecArgs& a) {
  const json config = config_of(cmd);
  json artifact = json::object();
  if (!a.traces.empty()) {
    const auto est = estimate_acceptance(io::read_traces(a.traces), a.gamma);
    artifact["estimate"] = io::estimate_to_json(est);
    std::cerr << "n_bar " << est.n_bar << " (a = " << est.a << ", stderr " << est.std_error << ", " << est.n_steps
              << " steps)\n";
  }
  if (!a.acceptance_records.empty()) {
    const auto catalog = MixerCatalog::parse(a.c.catalog);
    if (a.cost_model.empty()) throw ValidationError("draft search needs --cost-model");
    const CostModel cost = load_cost_model(a.cost_model, catalog);
    const auto records = io::read_records(a.acceptance_records, catalog);
    if (records.empty()) throw ValidationError("no acceptance records");
    const double target = a.target_cost.value_or(static_cast<double>(records.front().placement.num_layers()));
    DraftSearchOptions opt;
    opt.gamma = a.gamma;
    opt.prior = a.prior.prior();
    opt.candidates = parse_candidates(a.prior.candidates);
    opt.guard_ratio = a.prior.guard_ratio;
    opt.min_count = a.min_count;
    const auto result = search_draft_placement(records, cost, target, opt);
    artifact["draft_search"] = io::draft_search_to_json(result, catalog);
    artifact["target_cost"] = target;
    std::cerr << "best draft " << to_code_string(result.best.placement, catalog) << " cost " << result.best.cost
              << " speedup " << result.best.speedup << "\n";
  }
  if (artifact.empty()) throw ValidationError("spec-decode needs --traces and/or --acceptance-records");
  write_artifact(a.c.out, io::stamp(artifact, config));
}

// ---------------------------------------------------------------- landscape

struct LandscapeArgs {
  Common c;
  int layers = 12;
  int order = 2;
  int range = 1;
  double scale = 1.0;
  double noise = 0.0;
};

void cmd_landscape(const CLI::App* cmd, const LandscapeArgs& a) {
  const auto catalog = MixerCatalog::parse(a.c.catalog);
  const auto land =
      generate_landscape(a.layers, catalog.size(), {a.order, a.range, true}, a.c.seed, a.scale, a.noise);
  write_artifact(a.c.out, io::stamp(io::landscape_to_json(land), config_of(cmd)));
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InfeasibleError*>(&e)) return 3;
  if (dynamic_cast<const EvaluatorError*>(&e)) return 4;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ResourceError*>(&e)) return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-guided mixer placement optimization"};
  app.set_config("--config", "", "TOML/INI file mirroring the flags; flags win");
  app.require_subcommand(1);

  FitCostArgs fc;
  auto* fit_cost = app.add_subcommand("fit-cost", "Fit a linear cost model to throughput records");
  add_catalog(fit_cost, fc.c);
  fit_cost->add_option("--records", fc.records, "Throughput JSONL")->required();
  fit_cost->add_option("--min-count", fc.min_count, "Drop records with a type count in [1, min-count)")
      ->capture_default_str();
  fit_cost->add_option("--reference", fc.reference, "Type whose normalized cost is 1 (default: first)");
  fit_cost->add_flag("--intercept", fc.intercept, "Fit a constant latency term");
  fit_cost->add_option("--out", fc.c.out, "Cost model JSON (default stdout)");

  ExploreArgs ex;
  auto* explore = app.add_subcommand("explore", "Sample placements, optionally scoring them");
  add_catalog(explore, ex.c);
  explore->add_option("--layers", ex.layers)->capture_default_str();
  explore->add_option("--n", ex.n, "Number of placements")->capture_default_str();
  explore->add_option("--scheme", ex.scheme, "local, global or feasible")->capture_default_str();
  explore->add_option("--seed", ex.c.seed)->capture_default_str();
  explore->add_option("--min-count", ex.min_count, "Feasible scheme: every count 0 or >= this")->capture_default_str();
  explore->add_option("--cost-model", ex.cost_model, "Cost model JSON (adds costs; needed for --band)");
  explore->add_option("--band", ex.band, "Feasible scheme: cost band LO:HI");
  explore->add_option("--evaluator", ex.evaluator, "synthetic:<landscape.json> or cmd:<command>");
  explore->add_flag("--evaluator-noisy", ex.noisy, "Command evaluator returns noisy scores");
  explore->add_option("--out", ex.c.out, "Output path (default stdout)");

  OptimizeArgs op;
  auto* optimize = app.add_subcommand("optimize", "Fit the surrogate and extract the frontier or a budgeted optimum");
  add_catalog(optimize, op.c);
  optimize->add_option("--records", op.records, "Evaluation records JSONL")->required();
  optimize->add_option("--cost-model", op.cost_model, "Cost model JSON")->required();
  optimize->add_option("--budget", op.budget, "Return the single best placement with cost <= budget");
  optimize->add_option("--min-count", op.min_count, "Only allocations with counts 0 or >= this")->capture_default_str();
  op.prior.add(optimize);
  optimize->add_option("--posterior-out", op.posterior_out, "Write the posterior artifact");
  optimize->add_option("--potentials-out", op.potentials_out, "Write the MRF potentials artifact");
  optimize->add_option("--out", op.c.out, "Frontier or optimum JSON (default stdout)");

  CampaignArgs ca;
  auto* campaign = app.add_subcommand("campaign", "Run explore/exploit refinement rounds against an evaluator");
  add_catalog(campaign, ca.c);
  campaign->add_option("--layers", ca.layers)->capture_default_str();
  campaign->add_option("--seed", ca.c.seed)->capture_default_str();
  campaign->add_option("--cost-model", ca.cost_model, "Cost model JSON")->required();
  campaign->add_option("--records", ca.records, "Initial evaluation records");
  campaign->add_option("--explore", ca.explore, "Initial exploration draws")->capture_default_str();
  campaign->add_option("--evaluator", ca.evaluator, "synthetic:<landscape.json> or cmd:<command>")->required();
  campaign->add_flag("--evaluator-noisy", ca.noisy, "Command evaluator returns noisy scores");
  campaign->add_option("--rounds", ca.acq.rounds)->capture_default_str();
  campaign->add_option("--evals-per-round", ca.acq.evals_per_round)->capture_default_str();
  campaign->add_option("--beta", ca.acq.beta)->capture_default_str();
  campaign->add_option("--safe-fraction", ca.acq.safe_fraction)->capture_default_str();
  campaign->add_option("--pool-target", ca.acq.pool_target)->capture_default_str();
  campaign->add_option("--per-allocation-k", ca.per_allocation_k, "Overrides the pool quota");
  campaign->add_option("--mean-floor", ca.mean_floor, "Quantile of pool means below which candidates are dropped");
  campaign->add_option("--min-count", ca.acq.candidate_min_count)->capture_default_str();
  campaign->add_option("--band", ca.band, "Restrict to allocations with cost in LO:HI");
  ca.prior.add(campaign);
  campaign->add_option("--out", ca.out_dir, "Campaign directory")->capture_default_str();

  StabilityArgs st;
  auto* stability = app.add_subcommand("analyze-stability", "Rank-stability metrics across checkpoints");
  add_catalog(stability, st.c);
  stability->add_option("--records", st.records, "Records JSONL with checkpoint tags")->required();
  stability->add_option("--cost-model", st.cost_model, "Cost model JSON (when records carry no cost)");
  stability->add_option("--window", st.window)->capture_default_str();
  stability->add_option("--stride", st.stride)->capture_default_str();
  stability->add_option("--band", st.bands, "all, frontier:<delta> or median:<delta>")->capture_default_str();
  stability->add_option("--tiers", st.tiers, "Top fractions for Kendall's W")->capture_default_str();
  stability->add_option("--k", st.ks, "k values for top-k overlap")->capture_default_str();
  stability->add_option("--csv-dir", st.csv_dir, "Also write one CSV per curve");
  stability->add_option("--out", st.c.out, "Report JSON (default stdout)");

  SpecArgs sp;
  auto* spec = app.add_subcommand("spec-decode", "Acceptance-rate estimation and draft-placement search");
  add_catalog(spec, sp.c);
  spec->add_option("--traces", sp.traces, "Target-generated trace JSONL");
  spec->add_option("--gamma", sp.gamma)->capture_default_str();
  spec->add_option("--acceptance-records", sp.acceptance_records, "Records whose score is the acceptance rate a");
  spec->add_option("--cost-model", sp.cost_model, "Cost model JSON");
  spec->add_option("--target-cost", sp.target_cost, "Normalized target cost (default: L)");
  spec->add_option("--min-count", sp.min_count)->capture_default_str();
  sp.prior.add(spec);
  spec->add_option("--out", sp.c.out, "Estimates JSON (default stdout)");

  LandscapeArgs la;
  auto* landscape = app.add_subcommand("landscape", "Generate a synthetic ground-truth landscape");
  add_catalog(landscape, la.c);
  landscape->add_option("--layers", la.layers)->capture_default_str();
  landscape->add_option("--order", la.order)->capture_default_str();
  landscape->add_option("--range", la.range)->capture_default_str();
  landscape->add_option("--seed", la.c.seed)->capture_default_str();
  landscape->add_option("--scale", la.scale, "Potential standard deviation")->capture_default_str();
  landscape->add_option("--noise", la.noise, "Observation noise sigma")->capture_default_str();
  landscape->add_option("--out", la.c.out, "Landscape JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fit_cost) cmd_fit_cost(fit_cost, fc);
    if (*explore) cmd_explore(ex);
    if (*optimize) cmd_optimize(optimize, op);
    if (*campaign) cmd_campaign(campaign, ca);
    if (*stability) cmd_analyze_stability(stability, st);
    if (*spec) cmd_spec_decode(spec, sp);
    if (*landscape) cmd_landscape(landscape, la);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
