#include "hyperscene/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hyperscene/errors.hpp"

namespace hyperscene {

using nlohmann::json;

void ClusteringParams::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be positive");
  if (min_pts < 1) throw std::invalid_argument("min_pts must be at least 1");
}

ClusteringParams ClusteringConfig::resolve(int image_width, int image_height) const {
  ClusteringParams p;
  p.epsilon = epsilon ? *epsilon : relative_epsilon * std::max(image_width, image_height);
  p.min_pts = min_pts;
  p.validate();
  return p;
}

namespace {

constexpr int kUnassigned = -1;
constexpr int kNoise = -2;

std::vector<int> region_query(std::span<const Point2> points, int i, double eps2) {
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(points.size()); ++j) {
    const double dx = points[i].x - points[j].x;
    const double dy = points[i].y - points[j].y;
    if (dx * dx + dy * dy <= eps2) out.push_back(j);
  }
  return out;
}

}  // namespace

Clustering cluster_positions(std::span<const Point2> points, const ClusteringParams& params) {
  params.validate();
  const int n = static_cast<int>(points.size());
  const double eps2 = params.epsilon * params.epsilon;
  std::vector<int> label(n, kUnassigned);
  Clustering out;

  for (int i = 0; i < n; ++i) {
    if (label[i] != kUnassigned) continue;
    auto neighbours = region_query(points, i, eps2);
    if (static_cast<int>(neighbours.size()) < params.min_pts) {
      label[i] = kNoise;
      continue;
    }
    const int cluster = static_cast<int>(out.clusters.size());
    out.clusters.emplace_back();
    label[i] = cluster;
    std::deque<int> seeds(neighbours.begin(), neighbours.end());
    while (!seeds.empty()) {
      const int q = seeds.front();
      seeds.pop_front();
      if (label[q] == kNoise) label[q] = cluster;  // border point
      if (label[q] != kUnassigned) continue;
      label[q] = cluster;
      auto qn = region_query(points, q, eps2);
      if (static_cast<int>(qn.size()) >= params.min_pts) seeds.insert(seeds.end(), qn.begin(), qn.end());
    }
  }

  for (int i = 0; i < n; ++i) {
    if (label[i] == kNoise) {
      out.noise.push_back(i);
    } else {
      out.clusters[label[i]].push_back(i);
    }
  }
  return out;
}

int IncidenceMatrix::row_sum(int i) const {
  int s = 0;
  for (int j = 0; j < cols_; ++j) s += (*this)(i, j);
  return s;
}

int IncidenceMatrix::col_sum(int j) const {
  int s = 0;
  for (int i = 0; i < rows_; ++i) s += (*this)(i, j);
  return s;
}

int IncidenceMatrix::count() const { return static_cast<int>(std::count(data_.begin(), data_.end(), 1)); }

SceneHypergraph::SceneHypergraph(std::string scene_id, std::vector<HyperNode> nodes, std::vector<Hyperedge> edges,
                                 std::optional<TaskSpec> task)
    : scene_id_(std::move(scene_id)), nodes_(std::move(nodes)), edges_(std::move(edges)), task_(std::move(task)) {
  const int n = num_nodes();
  const int k = num_edges();
  for (int i = 0; i < n; ++i) {
    if (nodes_[i].id != i) throw ValidationError("node ids must be contiguous from 0; found " + std::to_string(nodes_[i].id) + " at position " + std::to_string(i));
  }
  incidence_ = IncidenceMatrix(n, k);
  assignment_.assign(n, {});
  for (int e = 0; e < k; ++e) {
    auto& edge = edges_[e];
    if (edge.id != e) throw ValidationError("hyperedge ids must be contiguous from 0; found " + std::to_string(edge.id));
    if (edge.members.empty()) throw ValidationError("hyperedge " + std::to_string(e) + " has no members");
    std::sort(edge.members.begin(), edge.members.end());
    if (std::adjacent_find(edge.members.begin(), edge.members.end()) != edge.members.end()) {
      throw ValidationError("hyperedge " + std::to_string(e) + " lists a member twice");
    }
    for (int m : edge.members) {
      if (m < 0 || m >= n) throw ValidationError("hyperedge " + std::to_string(e) + " refers to unknown node " + std::to_string(m));
      incidence_.set(m, e, true);
      assignment_[m].push_back(e);
    }
  }
}

SceneHypergraph build_hypergraph(const SceneRecord& scene, const ClusteringConfig& config) {
  std::vector<HyperNode> nodes;
  nodes.reserve(scene.objects.size());
  for (const auto& o : scene.objects) nodes.push_back({o.id, o.category, o.attributes, o.image_id});

  std::vector<Hyperedge> edges;
  for (const auto& img : scene.images) {
    std::vector<int> ids;
    std::vector<Point2> pts;
    for (const auto& o : scene.objects) {
      if (o.image_id == img.id) {
        ids.push_back(o.id);
        pts.push_back(o.position);
      }
    }
    if (ids.empty()) continue;
    const Clustering c = cluster_positions(pts, config.resolve(img.width, img.height));
    std::vector<std::vector<int>> groups;
    for (const auto& cl : c.clusters) {
      std::vector<int> members;
      for (int local : cl) members.push_back(ids[local]);
      groups.push_back(std::move(members));
    }
    for (int local : c.noise) groups.push_back({ids[local]});
    for (auto& g : groups) std::sort(g.begin(), g.end());
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    for (auto& g : groups) edges.push_back({static_cast<int>(edges.size()), std::move(g)});
  }
  return SceneHypergraph(scene.scene_id, std::move(nodes), std::move(edges), scene.task);
}

SceneHypergraph build_hypergraph(const SceneRecord& scene, const ClusteringParams& params) {
  params.validate();
  ClusteringConfig config;
  config.epsilon = params.epsilon;
  config.min_pts = params.min_pts;
  return build_hypergraph(scene, config);
}

json hypergraph_to_json(const SceneHypergraph& graph) {
  json nodes = json::array();
  for (const auto& n : graph.nodes()) {
    nodes.push_back({{"id", n.id}, {"category", n.category}, {"attributes", n.attributes}, {"image_id", n.image_id}});
  }
  json edges = json::array();
  for (const auto& e : graph.hyperedges()) edges.push_back({{"id", e.id}, {"members", e.members}});
  json doc{{"scene_id", graph.scene_id()}, {"nodes", std::move(nodes)}, {"hyperedges", std::move(edges)}};
  if (graph.task()) doc["task"] = task_to_json(*graph.task());
  return doc;
}

SceneHypergraph hypergraph_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("hypergraph: expected an object");
  try {
    std::vector<HyperNode> nodes;
    for (const auto& n : doc.at("nodes")) {
      HyperNode node;
      node.id = n.at("id").get<int>();
      node.category = n.at("category").get<std::string>();
      node.attributes = n.value("attributes", std::string{});
      node.image_id = n.value("image_id", std::string{});
      nodes.push_back(std::move(node));
    }
    std::vector<Hyperedge> edges;
    for (const auto& e : doc.at("hyperedges")) {
      edges.push_back({e.at("id").get<int>(), e.at("members").get<std::vector<int>>()});
    }
    std::optional<TaskSpec> task;
    if (auto it = doc.find("task"); it != doc.end() && !it->is_null()) task = task_from_json(*it);
    return SceneHypergraph(doc.value("scene_id", std::string{}), std::move(nodes), std::move(edges), std::move(task));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("hypergraph: ") + e.what());
  }
}

}  // namespace hyperscene
