#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hyperscene/scene.hpp"

namespace hyperscene {

struct ClusteringParams {
  double epsilon = 1.0;  // pixels
  int min_pts = 2;

  /// Throws std::invalid_argument unless epsilon > 0 and min_pts >= 1.
  void validate() const;
};

/// Clustering settings before the image size is known. Without an explicit
/// epsilon the radius is relative_epsilon * max(width, height) of each image.
struct ClusteringConfig {
  std::optional<double> epsilon;
  int min_pts = 2;
  double relative_epsilon = 0.12;

  ClusteringParams resolve(int image_width, int image_height) const;
};

struct Clustering {
  std::vector<std::vector<int>> clusters;  // each sorted ascending, in discovery order
  std::vector<int> noise;                  // sorted ascending
};

/// DBSCAN over 2D points with Euclidean distance.
///
/// A point is core when at least min_pts points (itself included) lie within
/// distance <= epsilon. Points are scanned in index order; a border point
/// reachable from several clusters joins the one discovered first.
Clustering cluster_positions(std::span<const Point2> points, const ClusteringParams& params);

/// Dense binary N x K matrix, row-major.
class IncidenceMatrix {
 public:
  IncidenceMatrix() = default;
  IncidenceMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::uint8_t operator()(int i, int j) const { return data_[index(i, j)]; }
  void set(int i, int j, bool value) { data_[index(i, j)] = value ? 1 : 0; }

  int row_sum(int i) const;
  int col_sum(int j) const;
  int count() const;

  bool operator==(const IncidenceMatrix&) const = default;

 private:
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * cols_ + j; }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> data_;
};

struct HyperNode {
  int id = 0;
  std::string category;
  std::string attributes;
  std::string image_id;

  bool operator==(const HyperNode&) const = default;
};

struct Hyperedge {
  int id = 0;
  std::vector<int> members;  // sorted, duplicate-free

  bool operator==(const Hyperedge&) const = default;
};

class SceneHypergraph {
 public:
  SceneHypergraph() = default;
  /// Validates member ids and builds the incidence matrix and node assignment.
  SceneHypergraph(std::string scene_id, std::vector<HyperNode> nodes, std::vector<Hyperedge> edges,
                  std::optional<TaskSpec> task = std::nullopt);

  const std::string& scene_id() const { return scene_id_; }
  const std::vector<HyperNode>& nodes() const { return nodes_; }
  const std::vector<Hyperedge>& hyperedges() const { return edges_; }
  const IncidenceMatrix& incidence() const { return incidence_; }
  /// Hyperedge ids containing each node.
  const std::vector<std::vector<int>>& assignment() const { return assignment_; }
  const std::optional<TaskSpec>& task() const { return task_; }

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  bool operator==(const SceneHypergraph&) const = default;

 private:
  std::string scene_id_;
  std::vector<HyperNode> nodes_;
  std::vector<Hyperedge> edges_;
  IncidenceMatrix incidence_;
  std::vector<std::vector<int>> assignment_;
  std::optional<TaskSpec> task_;
};

/// Clusters each image's objects separately and pools the hyperedges.
/// Noise points become singleton hyperedges, so every node has at least one
/// membership. Within an image, hyperedges are ordered by smallest member id;
/// images follow their declaration order.
SceneHypergraph build_hypergraph(const SceneRecord& scene, const ClusteringConfig& config = {});
SceneHypergraph build_hypergraph(const SceneRecord& scene, const ClusteringParams& params);

inline const IncidenceMatrix& incidence_of(const SceneHypergraph& graph) { return graph.incidence(); }

nlohmann::json hypergraph_to_json(const SceneHypergraph& graph);
/// Throws ValidationError for structural problems (unknown member ids, empty hyperedges).
SceneHypergraph hypergraph_from_json(const nlohmann::json& doc);

}  // namespace hyperscene
