#include "placeopt/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "placeopt/error.hpp"

namespace placeopt::io {

std::string canonical_dump(const json& value) { return value.dump(); }

std::string content_hash(const json& value) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_dump(value)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json stamp(json artifact, const json& config) {
  artifact["schema_version"] = kSchemaVersion;
  artifact["config_hash"] = content_hash(config);
  return artifact;
}

void check_schema(const json& artifact, const std::string& what) {
  if (!artifact.is_object() || !artifact.contains("schema_version"))
    throw ValidationError(what + ": missing schema_version");
  if (artifact.at("schema_version").get<int>() != kSchemaVersion)
    throw ValidationError(what + ": unsupported schema_version " + artifact.at("schema_version").dump());
}

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  return out;
}

double finite_number(const json& j, const char* key) {
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw ValidationError(std::string("field '") + key + "' must be finite");
  return v;
}

// Runs parse(line_json) for every non-blank line, prefixing errors with the line number.
template <class F>
void for_each_jsonl(std::istream& in, F&& parse) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      parse(json::parse(line));
    } catch (const json::exception& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

json vec(const std::vector<double>& v) { return json(v); }

std::vector<double> finite_vector(const json& j, const char* what) {
  auto v = j.get<std::vector<double>>();
  for (double x : v)
    if (!std::isfinite(x)) throw ValidationError(std::string(what) + " contains a non-finite value");
  return v;
}

}  // namespace

json read_json_file(const std::string& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const json& value) {
  auto out = open_out(path);
  out << value.dump(2) << '\n';
}

std::vector<ThroughputRecord> read_throughput_records(std::istream& in, const MixerCatalog& catalog) {
  std::vector<ThroughputRecord> out;
  for_each_jsonl(in, [&](const json& j) {
    std::vector<int> counts(static_cast<std::size_t>(catalog.size()), 0);
    for (const auto& [name, value] : j.at("counts").items()) {
      const int c = value.get<int>();
      if (c < 0) throw ValidationError("negative count for '" + name + "'");
      counts[static_cast<std::size_t>(catalog.index_of_name(name))] = c;
    }
    const double thr = finite_number(j, "throughput");
    if (!(thr > 0.0)) throw ValidationError("throughput must be positive");
    out.push_back({Allocation(std::move(counts)), thr});
  });
  return out;
}

std::vector<ThroughputRecord> read_throughput_records(const std::string& path, const MixerCatalog& catalog) {
  auto in = open_in(path);
  try {
    return read_throughput_records(in, catalog);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_throughput_records(std::ostream& out, std::span<const ThroughputRecord> records,
                              const MixerCatalog& catalog) {
  for (const auto& r : records) {
    json counts = json::object();
    for (int m = 0; m < catalog.size(); ++m) counts[catalog.name(m)] = r.allocation[m];
    out << json{{"counts", counts}, {"throughput", r.throughput}}.dump() << '\n';
  }
}

json cost_model_to_json(const CostModel& model, const MixerCatalog& catalog) {
  if (model.num_types() != catalog.size()) throw ValidationError("cost model and catalog sizes differ");
  json coeffs = json::object(), norm = json::object();
  for (int m = 0; m < catalog.size(); ++m) {
    coeffs[catalog.name(m)] = model.raw_coefficients()[static_cast<std::size_t>(m)];
    norm[catalog.name(m)] = model.normalized()[static_cast<std::size_t>(m)];
  }
  json j{{"coefficients", coeffs},
         {"normalized", norm},
         {"reference", catalog.name(model.reference_type())},
         {"intercept", model.intercept()},
         {"catalog", catalog.to_spec()}};
  if (const auto& s = model.fit_stats())
    j["fit"] = {{"r2", s->r_squared}, {"mae_frac", s->mean_abs_error_frac}, {"n", s->n_records}};
  return j;
}

CostModel cost_model_from_json(const json& j, const MixerCatalog& catalog) {
  try {
    std::vector<double> raw(static_cast<std::size_t>(catalog.size()), 0.0);
    std::vector<bool> seen(raw.size(), false);
    for (const auto& [name, value] : j.at("coefficients").items()) {
      const auto m = static_cast<std::size_t>(catalog.index_of_name(name));
      raw[m] = value.get<double>();
      seen[m] = true;
    }
    for (std::size_t m = 0; m < seen.size(); ++m)
      if (!seen[m]) throw ValidationError("cost model has no coefficient for '" + catalog.name(static_cast<int>(m)) + "'");
    const int ref = catalog.index_of_name(j.at("reference").get<std::string>());
    std::optional<CostFitStats> stats;
    if (j.contains("fit"))
      stats = CostFitStats{j["fit"].at("r2").get<double>(), j["fit"].at("mae_frac").get<double>(),
                           j["fit"].at("n").get<int>()};
    return CostModel(std::move(raw), ref, stats, j.value("intercept", 0.0));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed cost model: ") + e.what());
  }
}

std::vector<EvaluationRecord> read_records(std::istream& in, const MixerCatalog& catalog) {
  std::vector<EvaluationRecord> out;
  std::optional<int> layers;
  for_each_jsonl(in, [&](const json& j) {
    EvaluationRecord r;
    r.placement = placement_from_code_string(j.at("placement").get<std::string>(), catalog);
    if (layers && *layers != r.placement.num_layers())
      throw ValidationError("placement has " + std::to_string(r.placement.num_layers()) + " layers, expected " +
                            std::to_string(*layers));
    layers = r.placement.num_layers();
    r.score = finite_number(j, "score");
    if (j.contains("checkpoint") && !j["checkpoint"].is_null()) r.checkpoint = j["checkpoint"].get<std::string>();
    if (j.contains("cost") && !j["cost"].is_null()) r.cost = finite_number(j, "cost");
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<EvaluationRecord> read_records(const std::string& path, const MixerCatalog& catalog) {
  auto in = open_in(path);
  try {
    return read_records(in, catalog);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_records(std::ostream& out, std::span<const EvaluationRecord> records, const MixerCatalog& catalog) {
  for (const auto& r : records) {
    json j{{"placement", to_code_string(r.placement, catalog)}, {"score", r.score}};
    if (r.checkpoint) j["checkpoint"] = *r.checkpoint;
    if (r.cost) j["cost"] = *r.cost;
    out << j.dump() << '\n';
  }
}

void write_records(const std::string& path, std::span<const EvaluationRecord> records,
                   const MixerCatalog& catalog) {
  auto out = open_out(path);
  write_records(out, records, catalog);
}

json expansion_to_json(const ExpansionConfig& config) {
  return {{"order", config.order}, {"range", config.range}, {"include_allocation_counts", config.include_allocation_counts}};
}

ExpansionConfig expansion_from_json(const json& j) {
  ExpansionConfig c{j.at("order").get<int>(), j.at("range").get<int>(),
                    j.value("include_allocation_counts", true)};
  c.validate();
  return c;
}

json posterior_to_json(const SurrogatePosterior& posterior, const MixerCatalog& catalog) {
  if (posterior.num_types() != catalog.size()) throw ValidationError("posterior and catalog sizes differ");
  const auto d = posterior.dimension();
  const auto& chol = posterior.cholesky_lower();
  std::vector<double> packed;
  packed.reserve(static_cast<std::size_t>(d * (d + 1) / 2));
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c <= r; ++c) packed.push_back(chol(r, c));
  const auto& mean = posterior.mean();
  return {{"layout_version", kFeatureLayoutVersion},
          {"catalog", catalog.to_spec()},
          {"num_layers", posterior.num_layers()},
          {"num_types", posterior.num_types()},
          {"expansion", expansion_to_json(posterior.config())},
          {"dimension", d},
          {"prior", {{"alpha", posterior.prior().alpha}, {"a0", posterior.prior().a0}, {"b0", posterior.prior().b0}}},
          {"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"cholesky_lower_packed", packed},
          {"a_n", posterior.a_n()},
          {"b_n", posterior.b_n()},
          {"n_obs", posterior.n_obs()},
          {"normalization",
           {{"min", posterior.normalization().reference_min()}, {"max", posterior.normalization().reference_max()}}},
          {"normalize_order",
           posterior.normalize_order() == NormalizeOrder::kNormalizeThenFit ? "normalize-then-fit" : "fit-then-normalize"}};
}

SurrogatePosterior posterior_from_json(const json& j, const MixerCatalog& catalog) {
  try {
    if (j.at("layout_version").get<int>() != kFeatureLayoutVersion)
      throw ValidationError("posterior feature layout version " + j.at("layout_version").dump() +
                            " does not match this build (" + std::to_string(kFeatureLayoutVersion) + ")");
    if (j.at("catalog").get<std::string>() != catalog.to_spec())
      throw ValidationError("posterior was fitted with catalog '" + j.at("catalog").get<std::string>() + "'");
    SurrogatePosterior::Parts p;
    p.config = expansion_from_json(j.at("expansion"));
    p.num_layers = j.at("num_layers").get<int>();
    p.num_types = j.at("num_types").get<int>();
    p.prior = {j["prior"].at("alpha").get<double>(), j["prior"].at("a0").get<double>(), j["prior"].at("b0").get<double>()};
    const auto mean = finite_vector(j.at("mean"), "posterior mean");
    const auto d = static_cast<Eigen::Index>(mean.size());
    p.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
    const auto packed = finite_vector(j.at("cholesky_lower_packed"), "posterior factor");
    if (packed.size() != static_cast<std::size_t>(d * (d + 1) / 2))
      throw ValidationError("packed factor has the wrong length");
    p.cholesky_lower = Eigen::MatrixXd::Zero(d, d);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c <= r; ++c) p.cholesky_lower(r, c) = packed[k++];
    p.a_n = j.at("a_n").get<double>();
    p.b_n = j.at("b_n").get<double>();
    p.n_obs = j.at("n_obs").get<int>();
    const auto& norm = j.at("normalization");
    p.normalization = ScoreNormalization(norm.at("min").get<double>(), norm.at("max").get<double>());
    const auto order = j.at("normalize_order").get<std::string>();
    if (order == "normalize-then-fit")
      p.order = NormalizeOrder::kNormalizeThenFit;
    else if (order == "fit-then-normalize")
      p.order = NormalizeOrder::kFitThenNormalize;
    else
      throw ValidationError("unknown normalize_order '" + order + "'");
    return SurrogatePosterior(std::move(p));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed posterior: ") + e.what());
  }
}

json potentials_to_json(const MRFPotentials& potentials) {
  return {{"num_layers", potentials.num_layers},
          {"num_types", potentials.num_types},
          {"expansion", expansion_to_json(potentials.config)},
          {"unary", vec(potentials.unary)},
          {"pairwise", potentials.pairwise},
          {"triplet", vec(potentials.triplet)}};
}

MRFPotentials potentials_from_json(const json& j) {
  try {
    MRFPotentials p;
    p.num_layers = j.at("num_layers").get<int>();
    p.num_types = j.at("num_types").get<int>();
    p.config = expansion_from_json(j.at("expansion")).canonical();
    p.unary = j.at("unary").get<std::vector<double>>();
    p.pairwise = j.at("pairwise").get<std::vector<std::vector<double>>>();
    p.triplet = j.at("triplet").get<std::vector<double>>();
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed potentials: ") + e.what());
  }
}

json pareto_point_to_json(const ParetoPoint& point, const MixerCatalog& catalog) {
  json j{{"cost", point.cost},
         {"placement", to_code_string(point.placement, catalog)},
         {"allocation", allocation_of(point.placement, catalog.size()).counts()},
         {"predicted_score", point.predicted_score}};
  if (point.validated_score) j["validated_score"] = *point.validated_score;
  return j;
}

json frontier_to_json(std::span<const ParetoPoint> frontier, const MixerCatalog& catalog) {
  json arr = json::array();
  for (const auto& pt : frontier) arr.push_back(pareto_point_to_json(pt, catalog));
  return arr;
}

std::vector<ParetoPoint> frontier_from_json(const json& j, const MixerCatalog& catalog) {
  const json& arr = j.is_object() ? j.at("frontier") : j;
  std::vector<ParetoPoint> out;
  for (const auto& e : arr) {
    ParetoPoint pt;
    pt.cost = e.at("cost").get<double>();
    pt.placement = placement_from_code_string(e.at("placement").get<std::string>(), catalog);
    pt.predicted_score = e.at("predicted_score").get<double>();
    if (e.contains("validated_score")) pt.validated_score = e["validated_score"].get<double>();
    out.push_back(std::move(pt));
  }
  return out;
}

json landscape_to_json(const SyntheticLandscape& landscape) {
  return {{"seed", landscape.seed},
          {"noise_sigma", landscape.noise_sigma},
          {"potential_scale", landscape.potential_scale},
          {"potentials", potentials_to_json(landscape.potentials)}};
}

SyntheticLandscape landscape_from_json(const json& j) {
  try {
    SyntheticLandscape l;
    l.seed = j.at("seed").get<std::uint64_t>();
    l.noise_sigma = j.at("noise_sigma").get<double>();
    l.potential_scale = j.at("potential_scale").get<double>();
    if (!(l.noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
    l.potentials = potentials_from_json(j.at("potentials"));
    return l;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed landscape: ") + e.what());
  }
}

std::vector<Trace> read_traces(std::istream& in) {
  std::vector<Trace> out;
  for_each_jsonl(in, [&](const json& j) {
    Trace t;
    t.prompt_id = j.at("prompt_id").get<std::string>();
    if (!j.value("target_generated", false))
      throw ValidationError("trace '" + t.prompt_id + "' is not flagged target_generated");
    for (const auto& tok : j.at("tokens")) {
      // Null logq means the draft assigns the token zero probability.
      const double logq = tok.at("logq").is_null() ? -INFINITY : tok["logq"].get<double>();
      t.tokens.push_back({logq, tok.at("logp").get<double>()});
    }
    out.push_back(std::move(t));
  });
  return out;
}

std::vector<Trace> read_traces(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_traces(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

json estimate_to_json(const AcceptanceEstimate& e) {
  return {{"gamma", e.gamma}, {"n_bar", e.n_bar}, {"a", e.a}, {"stderr", e.std_error}, {"n_steps", e.n_steps}};
}

json draft_search_to_json(const DraftSearchResult& result, const MixerCatalog& catalog) {
  auto point = [&](const DraftPoint& d) {
    return json{{"cost", d.cost},
                {"placement", to_code_string(d.placement, catalog)},
                {"predicted_acceptance", d.predicted_acceptance},
                {"speedup", d.speedup}};
  };
  json arr = json::array();
  for (const auto& d : result.frontier) arr.push_back(point(d));
  return {{"expansion", result.expansion.label()}, {"frontier", arr}, {"best", point(result.best)}};
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_num(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s << std::setprecision(17) << *v;
  return s.str();
}

}  // namespace

json stability_to_json(const StabilityReport& report) {
  json rho = json::array();
  for (std::size_t c = 0; c < report.rho_vs_final.size(); ++c)
    rho.push_back({{"checkpoint", report.checkpoints[c]}, {"rho", opt(report.rho_vs_final[c])}});
  json w = json::array();
  for (std::size_t t = 0; t < report.w_by_tier.size(); ++t)
    w.push_back({{"tier", report.options.tiers[t]}, {"w", opt(report.w_by_tier[t])}});
  json bands = json::array();
  for (const auto& b : report.bands) {
    json wins = json::array();
    for (const auto& ws : b.windows) {
      json r = json::array();
      for (const auto& v : ws.rho) r.push_back(opt(v));
      wins.push_back({{"start", ws.start},
                      {"size", ws.size},
                      {"cost_lo", ws.cost_lo},
                      {"cost_hi", ws.cost_hi},
                      {"members", ws.members},
                      {"rho", r}});
    }
    bands.push_back({{"band", b.band.label()}, {"windows", wins}});
  }
  json overlap = json::array();
  for (std::size_t c = 0; c < report.overlap.size(); ++c) {
    json row = json::array();
    for (std::size_t i = 0; i < report.overlap[c].size(); ++i)
      row.push_back({{"k", report.options.overlap_k[i]}, {"overlap", opt(report.overlap[c][i])}});
    overlap.push_back({{"checkpoint", report.checkpoints[c]}, {"curve", row}});
  }
  return {{"checkpoints", report.checkpoints},
          {"num_placements", report.num_placements},
          {"window", report.options.window},
          {"stride", report.options.stride},
          {"rho_vs_final", rho},
          {"kendalls_w", w},
          {"rolling_windows", bands},
          {"top_k_overlap", overlap}};
}

std::vector<std::pair<std::string, std::string>> stability_to_csv(const StabilityReport& report) {
  std::vector<std::pair<std::string, std::string>> out;
  std::ostringstream rho;
  rho << "checkpoint,rho\n";
  for (std::size_t c = 0; c < report.rho_vs_final.size(); ++c)
    rho << report.checkpoints[c] << ',' << csv_num(report.rho_vs_final[c]) << '\n';
  out.emplace_back("rho", rho.str());

  std::ostringstream w;
  w << "tier,w\n";
  for (std::size_t t = 0; t < report.w_by_tier.size(); ++t)
    w << csv_num(report.options.tiers[t]) << ',' << csv_num(report.w_by_tier[t]) << '\n';
  out.emplace_back("w", w.str());

  for (const auto& b : report.bands) {
    std::ostringstream s;
    s << "start,size,cost_lo,cost_hi,members";
    for (std::size_t c = 0; c + 1 < report.checkpoints.size(); ++c) s << ',' << report.checkpoints[c];
    s << '\n';
    for (const auto& ws : b.windows) {
      s << ws.start << ',' << ws.size << ',' << csv_num(ws.cost_lo) << ',' << csv_num(ws.cost_hi) << ','
        << ws.members;
      for (const auto& v : ws.rho) s << ',' << csv_num(v);
      s << '\n';
    }
    std::string name = "window_" + b.band.label();
    for (char& ch : name)
      if (ch == ':' || ch == '.') ch = '_';
    out.emplace_back(name, s.str());
  }

  std::ostringstream ov;
  ov << "checkpoint";
  for (int k : report.options.overlap_k) ov << ",k" << k;
  ov << '\n';
  for (std::size_t c = 0; c < report.overlap.size(); ++c) {
    ov << report.checkpoints[c];
    for (const auto& v : report.overlap[c]) ov << ',' << csv_num(v);
    ov << '\n';
  }
  out.emplace_back("overlap", ov.str());
  return out;
}

}  // namespace placeopt::io
