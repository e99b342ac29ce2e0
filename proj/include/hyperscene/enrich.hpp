#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hyperscene/annotator.hpp"
#include "hyperscene/hypergraph.hpp"

namespace hyperscene {

/// A hypergraph with one area label per hyperedge and one counterfactual
/// score per node. Vectors are indexed by edge / node id.
struct EnrichedHypergraph {
  SceneHypergraph base;
  std::vector<std::string> area_labels;
  std::vector<double> cf_scores;  // in [0, 1]; 0 for empty attributes
  std::vector<Provenance> label_source;
  std::vector<Provenance> score_source;

  /// Throws ValidationError if sizes or ranges are inconsistent.
  void validate() const;
  bool operator==(const EnrichedHypergraph&) const = default;
};

/// Labels hyperedges in id order, then scores nodes in id order. Each
/// hyperedge's category list is taken in member id order.
EnrichedHypergraph enrich(const SceneHypergraph& graph, const AnnotationService& annotator);

/// Graph file: the hypergraph document plus `label`/`label_source` on each
/// hyperedge and `cf_score`/`score_source` on each node.
nlohmann::json enriched_to_json(const EnrichedHypergraph& graph);
std::string serialize_enriched(const EnrichedHypergraph& graph);
/// Throws ValidationError when labels or scores are missing or out of range.
EnrichedHypergraph enriched_from_json(const nlohmann::json& doc);
/// Reads a graph file. Throws IoError / ParseError / ValidationError.
EnrichedHypergraph load_enriched(const std::filesystem::path& path);

}  // namespace hyperscene
