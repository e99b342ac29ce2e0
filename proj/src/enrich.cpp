#include "hyperscene/enrich.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "hyperscene/errors.hpp"

namespace hyperscene {

using nlohmann::json;

void EnrichedHypergraph::validate() const {
  const auto k = static_cast<std::size_t>(base.num_edges());
  const auto n = static_cast<std::size_t>(base.num_nodes());
  if (area_labels.size() != k || label_source.size() != k) throw ValidationError("one area label per hyperedge required");
  if (cf_scores.size() != n || score_source.size() != n) throw ValidationError("one cf score per node required");
  for (std::size_t e = 0; e < k; ++e) {
    if (area_labels[e].empty()) throw ValidationError("hyperedge " + std::to_string(e) + ": empty area label");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(cf_scores[i] >= 0.0 && cf_scores[i] <= 1.0)) {
      throw ValidationError("node " + std::to_string(i) + ": cf_score outside [0, 1]");
    }
  }
}

EnrichedHypergraph enrich(const SceneHypergraph& graph, const AnnotationService& annotator) {
  EnrichedHypergraph out;
  out.base = graph;
  for (const auto& edge : graph.hyperedges()) {
    std::vector<std::string> categories;
    categories.reserve(edge.members.size());
    for (int m : edge.members) categories.push_back(graph.nodes()[m].category);
    auto label = annotator.label_area(categories);
    out.area_labels.push_back(std::move(label.value));
    out.label_source.push_back(label.source);
  }
  for (const auto& node : graph.nodes()) {
    auto score = annotator.score_counterfactual(node.attributes);
    out.cf_scores.push_back(score.value);
    out.score_source.push_back(score.source);
  }
  return out;
}

json enriched_to_json(const EnrichedHypergraph& graph) {
  json doc = hypergraph_to_json(graph.base);
  auto& nodes = doc["nodes"];
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i]["cf_score"] = graph.cf_scores[i];
    nodes[i]["score_source"] = to_string(graph.score_source[i]);
  }
  auto& edges = doc["hyperedges"];
  for (std::size_t e = 0; e < edges.size(); ++e) {
    edges[e]["label"] = graph.area_labels[e];
    edges[e]["label_source"] = to_string(graph.label_source[e]);
  }
  return doc;
}

std::string serialize_enriched(const EnrichedHypergraph& graph) { return enriched_to_json(graph).dump(2) + "\n"; }

EnrichedHypergraph enriched_from_json(const json& doc) {
  EnrichedHypergraph out;
  out.base = hypergraph_from_json(doc);
  try {
    for (const auto& n : doc.at("nodes")) {
      const double s = n.at("cf_score").get<double>();
      out.cf_scores.push_back(s);
      out.score_source.push_back(provenance_from_string(n.value("score_source", std::string("fallback"))));
    }
    for (const auto& e : doc.at("hyperedges")) {
      out.area_labels.push_back(e.at("label").get<std::string>());
      out.label_source.push_back(provenance_from_string(e.value("label_source", std::string("fallback"))));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("graph file: ") + e.what());
  }
  out.validate();
  return out;
}

EnrichedHypergraph load_enriched(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": parse error at byte " + std::to_string(e.byte), e.byte);
  }
  return enriched_from_json(doc);
}

}  // namespace hyperscene
