#include <charconv>
#include <cmath>
#include <stdexcept>

#include "hyperscene/hash.hpp"
#include "hyperscene/triview.hpp"

namespace hyperscene {

namespace {

void append_number(std::string& out, double value) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  out.append(buf, res.ptr);
}

}  // namespace

TriViewConfig TriViewConfig::desk() { return TriViewConfig{}; }

TriViewConfig TriViewConfig::paper() {
  TriViewConfig c;
  c.d = 512;
  c.d_p = 512;
  c.optimizer.learning_rate = 2e-5;
  return c;
}

void TriViewConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(tau_n) || !positive(tau_g) || !positive(tau_m)) throw std::invalid_argument("temperatures must be positive");
  if (!(alpha_g >= 0.0) || !(alpha_m >= 0.0)) throw std::invalid_argument("loss weights must be non-negative");
  if (!(mask_prob_text >= 0.0 && mask_prob_text <= 1.0)) throw std::invalid_argument("mask_prob_text must lie in [0, 1]");
  if (!(mask_prob_incidence >= 0.0 && mask_prob_incidence <= 1.0)) {
    throw std::invalid_argument("mask_prob_incidence must lie in [0, 1]");
  }
  if (d <= 0 || d_p <= 0) throw std::invalid_argument("dimensions must be positive");
  if (steps < 0) throw std::invalid_argument("steps must be non-negative");
  if (!(optimizer.learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) || !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!positive(optimizer.eps_stability)) throw std::invalid_argument("eps_stability must be positive");
}

std::string TriViewConfig::canonical() const {
  std::string s;
  auto field = [&s](const char* key, double v) {
    s += key;
    s += '=';
    append_number(s, v);
    s += ';';
  };
  field("tau_n", tau_n);
  field("tau_g", tau_g);
  field("tau_m", tau_m);
  field("alpha_g", alpha_g);
  field("alpha_m", alpha_m);
  field("mask_prob_text", mask_prob_text);
  field("mask_prob_incidence", mask_prob_incidence);
  field("d", d);
  field("d_p", d_p);
  s += "seed=" + std::to_string(seed) + ';';
  field("learning_rate", optimizer.learning_rate);
  field("beta1", optimizer.beta1);
  field("beta2", optimizer.beta2);
  field("eps_stability", optimizer.eps_stability);
  s += "steps=" + std::to_string(steps) + ';';
  s += std::string("normalize_by_memberships=") + (normalize_by_memberships ? "1" : "0") + ';';
  return s;
}

std::uint64_t TriViewConfig::fingerprint() const { return fnv1a64(canonical()); }

std::string mask_text(std::string_view text, double p, Rng& rng) {
  auto tokens = whitespace_tokens(text);
  bool changed = false;
  for (auto& tok : tokens) {
    if (rng.uniform() < p) {
      tok = kMaskToken;
      changed = true;
    }
  }
  if (!changed) return std::string(text);
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

IncidenceMatrix mask_incidence(const IncidenceMatrix& source, double p, Rng& rng) {
  const int n = source.rows();
  const int k = source.cols();
  IncidenceMatrix mask(n, k);
  std::vector<int> row_sum(n), col_sum(k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      mask.set(i, j, true);
      if (source(i, j)) {
        ++row_sum[i];
        ++col_sum[j];
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      if (!source(i, j)) continue;
      const bool drop = rng.uniform() < p;
      if (drop && row_sum[i] > 1 && col_sum[j] > 1) {
        mask.set(i, j, false);
        --row_sum[i];
        --col_sum[j];
      }
    }
  }
  return mask;
}

namespace {

AugmentedView make_view(int index, const EnrichedHypergraph& graph, const TriViewConfig& config, Rng& rng) {
  AugmentedView v;
  v.view_index = index;
  for (const auto& node : graph.base.nodes()) v.node_texts.push_back(mask_text(node.category, config.mask_prob_text, rng));
  for (const auto& label : graph.area_labels) v.edge_texts.push_back(mask_text(label, config.mask_prob_text, rng));
  const IncidenceMatrix& h = graph.base.incidence();
  v.mask_matrix = mask_incidence(h, config.mask_prob_incidence, rng);
  v.incidence = IncidenceMatrix(h.rows(), h.cols());
  for (int i = 0; i < h.rows(); ++i) {
    for (int j = 0; j < h.cols(); ++j) v.incidence.set(i, j, h(i, j) && v.mask_matrix(i, j));
  }
  return v;
}

}  // namespace

std::pair<AugmentedView, AugmentedView> make_views(const EnrichedHypergraph& graph, const TriViewConfig& config,
                                                   Rng& rng) {
  AugmentedView first = make_view(1, graph, config, rng);
  AugmentedView second = make_view(2, graph, config, rng);
  return {std::move(first), std::move(second)};
}

ViewEmbeddings embed_view(const AugmentedView& view, const EmbeddingProvider& provider) {
  return {provider.embed(view.node_texts), provider.embed(view.edge_texts)};
}

ProjectionHead ProjectionHead::init(int d, int d_p, Rng& rng) {
  ProjectionHead h = zeros(d, d_p);
  const double a1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double a2 = 1.0 / std::sqrt(static_cast<double>(d_p));
  for (Eigen::Index i = 0; i < h.w1.size(); ++i) h.w1.data()[i] = rng.uniform(-a1, a1);
  for (Eigen::Index i = 0; i < h.b1.size(); ++i) h.b1[i] = rng.uniform(-a1, a1);
  for (Eigen::Index i = 0; i < h.w2.size(); ++i) h.w2.data()[i] = rng.uniform(-a2, a2);
  for (Eigen::Index i = 0; i < h.b2.size(); ++i) h.b2[i] = rng.uniform(-a2, a2);
  return h;
}

ProjectionHead ProjectionHead::zeros(int d, int d_p) {
  return {Matrix::Zero(d_p, d), Vector::Zero(d_p), Matrix::Zero(d_p, d_p), Vector::Zero(d_p)};
}

Matrix ProjectionHead::forward(const Matrix& x) const {
  if (x.cols() != w1.cols()) {
    throw std::invalid_argument("projection head expects input width " + std::to_string(w1.cols()) + ", got " +
                                std::to_string(x.cols()));
  }
  if (w2.cols() != w1.rows() || b1.size() != w1.rows() || b2.size() != w2.rows()) {
    throw std::invalid_argument("projection head parameter shapes are inconsistent");
  }
  Matrix z = x * w1.transpose();
  z.rowwise() += b1.transpose();
  Matrix h = z.unaryExpr([](double t) { return elu(t); });
  Matrix y = h * w2.transpose();
  y.rowwise() += b2.transpose();
  return y;
}

ProjectedViews project(const ViewEmbeddings& embeddings, const ProjectionHead& node_head,
                       const ProjectionHead& edge_head) {
  if (node_head.output_dim() != edge_head.output_dim()) {
    throw std::invalid_argument("node and hyperedge heads must share the projection width");
  }
  return {node_head.forward(embeddings.node_embed), edge_head.forward(embeddings.edge_embed)};
}

Discriminator Discriminator::init(int d_p) {
  return {Matrix::Identity(d_p, d_p) / std::sqrt(static_cast<double>(d_p))};
}

}  // namespace hyperscene
