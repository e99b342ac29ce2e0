#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "hyperscene/annotator.hpp"
#include "hyperscene/enrich.hpp"
#include "hyperscene/errors.hpp"
#include "hyperscene/hypergraph.hpp"
#include "hyperscene/knowledge.hpp"
#include "hyperscene/plan.hpp"
#include "hyperscene/scene.hpp"
#include "hyperscene/templates.hpp"
#include "hyperscene/training.hpp"

namespace py = pybind11;
using namespace hyperscene;
using nlohmann::json;

namespace {

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": parse error at byte " + std::to_string(e.byte), e.byte);
  }
}

AnnotationService make_service(const std::string& mode, const std::string& endpoint, const std::string& transcript,
                               double timeout) {
  LexiconAnnotator lexicon = LexiconAnnotator::bundled();
  if (mode == "fallback") return AnnotationService(std::move(lexicon));
  if (mode != "remote" && mode != "replay") throw ValidationError("unknown annotator mode " + mode);
  std::shared_ptr<Annotator> remote;
  if (!endpoint.empty()) {
    remote = std::make_shared<HttpAnnotator>(endpoint, timeout,
                                             std::make_shared<const TemplateRegistry>(TemplateRegistry::bundled()));
  }
  if (mode == "remote" && transcript.empty()) return AnnotationService(std::move(lexicon), remote);
  if (transcript.empty()) throw ValidationError("replay mode needs a transcript");
  auto replay = std::make_shared<ReplayAnnotator>(transcript, mode == "remote" ? remote : nullptr);
  return AnnotationService(std::move(lexicon), replay);
}

TriViewConfig make_config(const py::dict& kw) {
  TriViewConfig c = TriViewConfig::desk();
  if (kw.contains("profile")) {
    const auto p = kw["profile"].cast<std::string>();
    if (p == "paper") c = TriViewConfig::paper();
    else if (p != "desk") throw ValidationError("unknown profile " + p);
  }
  for (auto item : kw) {
    const auto key = item.first.cast<std::string>();
    auto v = item.second;
    if (key == "profile") continue;
    else if (key == "seed") c.seed = v.cast<std::uint64_t>();
    else if (key == "steps") c.steps = v.cast<int>();
    else if (key == "learning_rate") c.optimizer.learning_rate = v.cast<double>();
    else if (key == "d") c.d = v.cast<int>();
    else if (key == "d_p") c.d_p = v.cast<int>();
    else if (key == "tau_n") c.tau_n = v.cast<double>();
    else if (key == "tau_g") c.tau_g = v.cast<double>();
    else if (key == "tau_m") c.tau_m = v.cast<double>();
    else if (key == "alpha_g") c.alpha_g = v.cast<double>();
    else if (key == "alpha_m") c.alpha_m = v.cast<double>();
    else if (key == "mask_prob_text") c.mask_prob_text = v.cast<double>();
    else if (key == "mask_prob_incidence") c.mask_prob_incidence = v.cast<double>();
    else if (key == "normalize_by_memberships") c.normalize_by_memberships = v.cast<bool>();
    else throw ValidationError("unknown training option " + key);
  }
  c.validate();
  return c;
}

py::dict losses(const LossBreakdown& l) {
  py::dict d;
  d["node"] = l.node;
  d["area"] = l.area;
  d["membership"] = l.membership;
  d["total"] = l.total;
  return d;
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["executability"] = r.executability;
  d["lcs"] = r.lcs;
  d["correct"] = r.correct;
  return d;
}

}  // namespace

PYBIND11_MODULE(_hyperscene, m) {
  m.doc() = "Scene hypergraphs, tri-view training, knowledge export and plan metrics";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<SceneRecord>(m, "Scene")
      .def_readonly("scene_id", &SceneRecord::scene_id)
      .def_property_readonly("num_objects", [](const SceneRecord& s) { return s.objects.size(); })
      .def("to_json", [](const SceneRecord& s) { return serialize_scene(s); });

  m.def("load_scene", &load_scene, py::arg("path"));
  m.def("parse_scene", [](const std::string& text) { return parse_scene(text); }, py::arg("text"));

  py::class_<SceneHypergraph>(m, "Hypergraph")
      .def_property_readonly("scene_id", &SceneHypergraph::scene_id)
      .def_property_readonly("num_nodes", &SceneHypergraph::num_nodes)
      .def_property_readonly("num_edges", &SceneHypergraph::num_edges)
      .def_property_readonly("areas",
                             [](const SceneHypergraph& g) {
                               std::vector<std::vector<int>> out;
                               for (const auto& e : g.hyperedges()) out.push_back(e.members);
                               return out;
                             })
      .def("incidence",
           [](const SceneHypergraph& g) {
             const IncidenceMatrix& h = g.incidence();
             std::vector<std::vector<int>> rows(h.rows(), std::vector<int>(h.cols()));
             for (int i = 0; i < h.rows(); ++i)
               for (int j = 0; j < h.cols(); ++j) rows[i][j] = h(i, j) ? 1 : 0;
             return rows;
           })
      .def("to_json", [](const SceneHypergraph& g) { return hypergraph_to_json(g).dump(2) + "\n"; });

  m.def(
      "build_hypergraph",
      [](const SceneRecord& scene, std::optional<double> epsilon, int min_pts, double relative_epsilon) {
        ClusteringConfig c;
        c.epsilon = epsilon;
        c.min_pts = min_pts;
        c.relative_epsilon = relative_epsilon;
        return build_hypergraph(scene, c);
      },
      py::arg("scene"), py::arg("epsilon") = py::none(), py::arg("min_pts") = 2, py::arg("relative_epsilon") = 0.12);

  py::class_<EnrichedHypergraph>(m, "EnrichedHypergraph")
      .def_readonly("base", &EnrichedHypergraph::base)
      .def_readonly("area_labels", &EnrichedHypergraph::area_labels)
      .def_readonly("cf_scores", &EnrichedHypergraph::cf_scores)
      .def("to_json", &serialize_enriched)
      .def("__eq__", [](const EnrichedHypergraph& a, const EnrichedHypergraph& b) { return a == b; });

  m.def(
      "enrich",
      [](const SceneHypergraph& g, const std::string& annotator, const std::string& endpoint,
         const std::string& transcript, double timeout) {
        const AnnotationService service = make_service(annotator, endpoint, transcript, timeout);
        py::gil_scoped_release release;
        return enrich(g, service);
      },
      py::arg("graph"), py::arg("annotator") = "fallback", py::arg("endpoint") = "", py::arg("transcript") = "",
      py::arg("timeout") = 10.0);
  m.def("load_enriched", &load_enriched, py::arg("path"));
  m.def("parse_enriched", [](const std::string& text) { return enriched_from_json(parse_json(text, "graph")); },
        py::arg("text"));

  m.def("export_xml", &export_xml, py::arg("graph"));
  m.def(
      "assemble_prompt",
      [](const EnrichedHypergraph& g, const std::string& template_id, double flag_threshold) {
        const TemplateRegistry templates = TemplateRegistry::bundled();
        const HypergraphKnowledge k = make_knowledge(g, flag_threshold);
        return assemble_prompt(g.base.task().value_or(TaskSpec{}), k, template_id, templates).text;
      },
      py::arg("graph"), py::arg("template_id") = "planner_xml", py::arg("flag_threshold") = kDefaultFlagThreshold);

  m.def(
      "train",
      [](const EnrichedHypergraph& g, py::kwargs kw) {
        const TriViewConfig c = make_config(kw);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(g, c);
        }
        py::list trace;
        for (const auto& row : r.trace) trace.append(losses(row.loss));
        py::dict out;
        out["trace"] = trace;
        out["params"] = py::bytes(encode_params(r.params, c));
        out["trace_csv"] = trace_csv(r.trace);
        return out;
      },
      py::arg("graph"));

  m.def(
      "grad_check",
      [](int trials, double step, py::kwargs kw) {
        const TriViewConfig c = make_config(kw);
        GradCheckReport r;
        {
          py::gil_scoped_release release;
          r = grad_check(c, trials, step);
        }
        py::dict out;
        out["trials"] = r.trials;
        out["max_relative_error"] = r.max_relative_error;
        out["worst_tensor"] = r.worst_tensor;
        return out;
      },
      py::arg("trials") = 50, py::arg("step") = 1e-6);

  m.def(
      "evaluate_plan",
      [](const std::string& plan, const std::string& env, const std::string& golds) {
        const auto p = plan_from_json(parse_json(plan, "plan"));
        const auto e = env_from_json(parse_json(env, "env"));
        const auto g = golds_from_json(parse_json(golds, "golds"));
        return report_dict(evaluate_plan(p, e, g));
      },
      py::arg("plan"), py::arg("env"), py::arg("golds"));

  m.def(
      "lcs_score",
      [](const std::string& plan, const std::string& gold) {
        const auto p = plan_from_json(parse_json(plan, "plan"));
        const auto g = plan_from_json(parse_json(gold, "gold"));
        return lcs_score(std::span<const Action>(p), std::span<const Action>(g));
      },
      py::arg("plan"), py::arg("gold"));
}
