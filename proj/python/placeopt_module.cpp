#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "placeopt/acquisition.hpp"
#include "placeopt/error.hpp"
#include "placeopt/landscape_analysis.hpp"
#include "placeopt/speculative.hpp"
#include "placeopt/synthetic_oracle.hpp"

namespace py = pybind11;
using namespace placeopt;

namespace {

std::vector<EvaluationRecord> make_records(const std::vector<Placement>& placements, const std::vector<double>& scores) {
  if (placements.size() != scores.size()) throw ValidationError("placements and scores differ in length");
  std::vector<EvaluationRecord> out;
  out.reserve(placements.size());
  for (std::size_t i = 0; i < placements.size(); ++i) out.push_back({placements[i], scores[i], {}, {}});
  return out;
}

py::dict point_dict(const ParetoPoint& p) {
  py::dict d;
  d["cost"] = p.cost;
  d["placement"] = p.placement.assignments();
  d["predicted_score"] = p.predicted_score;
  d["validated_score"] = p.validated_score ? py::cast(*p.validated_score) : py::none();
  return d;
}

py::list points(const std::vector<ParetoPoint>& pts) {
  py::list out;
  for (const auto& p : pts) out.append(point_dict(p));
  return out;
}

// Evaluator backed by a Python callable: list[list[int]] -> list[float].
class CallableEvaluator : public Evaluator {
 public:
  CallableEvaluator(py::function fn, bool noisy) : fn_(std::move(fn)), noisy_(noisy) {}
  std::vector<double> evaluate(std::span<const Placement> placements) override {
    std::vector<std::vector<int>> xs;
    for (const auto& p : placements) xs.push_back(p.assignments());
    return fn_(xs).cast<std::vector<double>>();
  }
  bool noisy() const override { return noisy_; }

 private:
  py::function fn_;
  bool noisy_;
};

}  // namespace

PYBIND11_MODULE(_placeopt, m) {
  m.doc() = "Surrogate-guided mixer placement optimization";

  auto base = py::register_exception<Error>(m, "Error");
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
  py::register_exception<ResourceError>(m, "ResourceError", base.ptr());
  py::register_exception<EvaluatorError>(m, "EvaluatorError", base.ptr());
  (void)validation;

  py::class_<Placement>(m, "Placement")
      .def(py::init<std::vector<int>>())
      .def("__len__", &Placement::num_layers)
      .def("__getitem__", [](const Placement& p, int i) {
        if (i < 0 || i >= p.num_layers()) throw py::index_error();
        return p[i];
      })
      .def("to_list", &Placement::assignments)
      .def(py::self == py::self)
      .def("__repr__", [](const Placement& p) {
        std::string s = "Placement([";
        for (int i = 0; i < p.num_layers(); ++i) s += (i ? ", " : "") + std::to_string(p[i]);
        return s + "])";
      });
  py::implicitly_convertible<py::list, Placement>();

  py::class_<Allocation>(m, "Allocation")
      .def(py::init<std::vector<int>>())
      .def("counts", &Allocation::counts)
      .def(py::self == py::self);
  py::implicitly_convertible<py::list, Allocation>();

  py::class_<MixerCatalog>(m, "MixerCatalog")
      .def_static("standard", &MixerCatalog::standard)
      .def_static("parse", &MixerCatalog::parse)
      .def_property_readonly("names", &MixerCatalog::names)
      .def("__len__", &MixerCatalog::size)
      .def("to_spec", &MixerCatalog::to_spec)
      .def("encode", [](const MixerCatalog& c, const Placement& p) { return to_code_string(p, c); })
      .def("decode", [](const MixerCatalog& c, const std::string& s) { return placement_from_code_string(s, c); });

  m.def("count_compositions", &count_compositions, py::arg("num_layers"), py::arg("num_types"));
  m.def("count_placements_in_allocation",
        [](const Allocation& a) { return py::int_(py::str(count_placements_in_allocation(a).str())); });
  m.def("allocation_of", [](const Placement& p, int num_types) { return allocation_of(p, num_types).counts(); });
  m.def("sample_local", [](std::uint64_t seed, int L, int M) { return sample_local(seed, L, M).assignments(); },
        py::arg("seed"), py::arg("num_layers"), py::arg("num_types"));
  m.def("sample_global", [](std::uint64_t seed, int L, int M) { return sample_global(seed, L, M).assignments(); },
        py::arg("seed"), py::arg("num_layers"), py::arg("num_types"));
  m.def(
      "conditional_same_type_probability",
      [](int L, int M, const std::string& scheme) {
        return conditional_same_type_probability(L, M, parse_sampling_scheme(scheme));
      },
      py::arg("num_layers"), py::arg("num_types"), py::arg("scheme") = "global");

  py::class_<ExpansionConfig>(m, "ExpansionConfig")
      .def(py::init([](int order, int range, bool counts) { return ExpansionConfig{order, range, counts}; }),
           py::arg("order") = 1, py::arg("range") = 1, py::arg("include_allocation_counts") = true)
      .def_readwrite("order", &ExpansionConfig::order)
      .def_readwrite("range", &ExpansionConfig::range)
      .def_readwrite("include_allocation_counts", &ExpansionConfig::include_allocation_counts)
      .def_property_readonly("label", &ExpansionConfig::label)
      .def_static("parse", [](const std::string& s) { return ExpansionConfig::parse(s); })
      .def(py::self == py::self)
      .def("__repr__", [](const ExpansionConfig& c) { return "ExpansionConfig('" + c.label() + "')"; });
  m.def("feature_count", &feature_count, py::arg("config"), py::arg("num_layers"), py::arg("num_types"));

  py::class_<CostModel>(m, "CostModel")
      .def(py::init([](std::vector<double> raw, int ref) { return CostModel(std::move(raw), ref); }),
           py::arg("raw_coefficients"), py::arg("reference_type") = 0)
      .def_static("from_normalized", &CostModel::from_normalized, py::arg("normalized"), py::arg("reference_type") = 0)
      .def_property_readonly("normalized", &CostModel::normalized)
      .def("placement_cost", &CostModel::placement_cost)
      .def("allocation_cost", &CostModel::allocation_cost);
  m.def(
      "fit_cost_model",
      [](const std::vector<std::vector<int>>& counts, const std::vector<double>& throughputs, int min_count) {
        if (counts.size() != throughputs.size()) throw ValidationError("counts and throughputs differ in length");
        if (counts.empty()) throw ValidationError("no throughput records given");
        std::vector<ThroughputRecord> recs;
        for (std::size_t i = 0; i < counts.size(); ++i) recs.push_back({Allocation(counts[i]), throughputs[i]});
        const auto kept = filter_singletons(recs, min_count);
        return fit_regression(kept, static_cast<int>(counts.front().size()));
      },
      py::arg("counts"), py::arg("throughputs"), py::arg("min_count") = 3);

  py::class_<NIGPrior>(m, "NIGPrior")
      .def(py::init([](double alpha, double a0, double b0) { return NIGPrior{alpha, a0, b0}; }), py::arg("alpha") = 1.0,
           py::arg("a0") = 1e-3, py::arg("b0") = 1e-3)
      .def_readwrite("alpha", &NIGPrior::alpha)
      .def_readwrite("a0", &NIGPrior::a0)
      .def_readwrite("b0", &NIGPrior::b0);

  py::class_<SurrogatePosterior>(m, "SurrogatePosterior")
      .def_property_readonly("config", &SurrogatePosterior::config)
      .def_property_readonly("mean", &SurrogatePosterior::mean)
      .def_property_readonly("a_n", &SurrogatePosterior::a_n)
      .def_property_readonly("b_n", &SurrogatePosterior::b_n)
      .def_property_readonly("n_obs", &SurrogatePosterior::n_obs)
      .def_property_readonly("dimension", &SurrogatePosterior::dimension)
      .def("predict",
           [](const SurrogatePosterior& post, const Placement& p) {
             const auto pr = post.predict(p);
             return py::make_tuple(pr.mean, pr.scale);
           })
      .def("log_evidence", [](const SurrogatePosterior& post) { return log_marginal_likelihood(post); });

  m.def(
      "fit_surrogate",
      [](const std::vector<Placement>& placements, const std::vector<double>& scores, const ExpansionConfig& config,
         int num_types, const NIGPrior& prior) {
        return fit_surrogate(make_records(placements, scores), config, prior, num_types);
      },
      py::arg("placements"), py::arg("scores"), py::arg("config"), py::arg("num_types"), py::arg("prior") = NIGPrior{});
  m.def(
      "select_expansion",
      [](const std::vector<Placement>& placements, const std::vector<double>& scores,
         const std::vector<ExpansionConfig>& candidates, int num_types, const NIGPrior& prior, double guard_ratio) {
        const auto sel = select_expansion(make_records(placements, scores), candidates, prior, num_types, guard_ratio);
        py::list evidence;
        for (const auto& c : sel.candidates) {
          py::dict d;
          d["config"] = c.config;
          d["features"] = c.features;
          d["eligible"] = c.eligible;
          d["log_evidence"] = c.log_evidence ? py::cast(*c.log_evidence) : py::none();
          evidence.append(d);
        }
        return py::make_tuple(sel.selected, sel.fell_back, evidence);
      },
      py::arg("placements"), py::arg("scores"), py::arg("candidates"), py::arg("num_types"),
      py::arg("prior") = NIGPrior{}, py::arg("guard_ratio") = 2.0);

  m.def(
      "pareto_frontier",
      [](const SurrogatePosterior& post, const CostModel& cost, int min_count) {
        return points(surrogate_frontier(post, cost, min_count));
      },
      py::arg("posterior"), py::arg("cost_model"), py::arg("min_count") = 0);
  m.def(
      "constrained_optimum",
      [](const SurrogatePosterior& post, const CostModel& cost, double budget) {
        auto pt = constrained_optimum(extract_potentials(post), cost, budget);
        return point_dict(pt);
      },
      py::arg("posterior"), py::arg("cost_model"), py::arg("budget"));

  py::class_<SyntheticLandscape>(m, "SyntheticLandscape")
      .def_property_readonly("noise_sigma", [](const SyntheticLandscape& l) { return l.noise_sigma; })
      .def("score", &oracle_score);
  m.def("generate_landscape", &generate_landscape, py::arg("num_layers"), py::arg("num_types"), py::arg("config"),
        py::arg("seed"), py::arg("potential_scale") = 1.0, py::arg("noise_sigma") = 0.0);
  m.def(
      "brute_force_frontier",
      [](const SyntheticLandscape& land, const CostModel& cost) {
        return points(brute_force_frontier(land.potentials, cost).frontier);
      },
      py::arg("landscape"), py::arg("cost_model"));

  m.def(
      "refine",
      [](py::function evaluator, const std::vector<Placement>& placements, const std::vector<double>& scores,
         const CostModel& cost, int num_types, int rounds, int evals_per_round, int min_count, double beta,
         double safe_fraction, bool noisy) {
        CallableEvaluator ev(std::move(evaluator), noisy);
        RefinementOptions opt;
        opt.num_types = num_types;
        opt.acquisition.rounds = rounds;
        opt.acquisition.evals_per_round = evals_per_round;
        opt.acquisition.candidate_min_count = min_count;
        opt.acquisition.beta = beta;
        opt.acquisition.safe_fraction = safe_fraction;
        auto res = refinement_loop(ev, make_records(placements, scores), cost, opt);
        py::dict d;
        d["expansion"] = res.expansion;
        d["frontier"] = points(res.frontier);
        d["num_records"] = res.records.size();
        d["posterior"] = std::move(res.posterior);
        return d;
      },
      py::arg("evaluator"), py::arg("placements"), py::arg("scores"), py::arg("cost_model"), py::arg("num_types"),
      py::arg("rounds") = 4, py::arg("evals_per_round") = 500, py::arg("min_count") = 3, py::arg("beta") = 1.0,
      py::arg("safe_fraction") = 0.7, py::arg("noisy") = false);

  m.def(
      "estimate_acceptance",
      [](const std::vector<std::vector<std::pair<double, double>>>& traces, int gamma) {
        std::vector<Trace> ts;
        for (const auto& t : traces) {
          Trace tr;
          for (const auto& [logq, logp] : t) tr.tokens.push_back({logq, logp});
          ts.push_back(std::move(tr));
        }
        const auto e = estimate_acceptance(ts, gamma);
        py::dict d;
        d["gamma"] = e.gamma;
        d["n_bar"] = e.n_bar;
        d["a"] = e.a;
        d["stderr"] = e.std_error;
        d["n_steps"] = e.n_steps;
        return d;
      },
      py::arg("traces"), py::arg("gamma") = kDefaultGamma);
  m.def("speculative_speedup", py::overload_cast<double, int, double, double>(&speculative_speedup), py::arg("n_bar"),
        py::arg("gamma"), py::arg("draft_cost"), py::arg("target_cost"));

  m.def("spearman_rho", [](const std::vector<double>& a, const std::vector<double>& b) { return spearman_rho(a, b); });
  m.def(
      "kendalls_w",
      [](const std::vector<std::vector<double>>& raters, std::optional<double> tier) { return kendalls_w(raters, tier); },
      py::arg("raters"), py::arg("tier") = py::none());
  m.def("top_k_overlap", [](const std::vector<double>& early, const std::vector<double>& fin, int k) {
    return top_k_overlap(early, fin, k);
  });
  m.def("normalize_scores",
        [](const std::vector<double>& s, const std::vector<double>& ref) { return normalize_scores(s, ref); });
}
