#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hyperscene/embedding.hpp"
#include "hyperscene/enrich.hpp"
#include "hyperscene/hypergraph.hpp"

namespace hyperscene {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_stability = 1e-8;
};

/// Encoder and objective settings. Defaults are the desk profile.
struct TriViewConfig {
  double tau_n = 0.07;
  double tau_g = 0.07;
  double tau_m = 0.07;
  double alpha_g = 1.0;
  double alpha_m = 1.0;
  double mask_prob_text = 0.2;
  double mask_prob_incidence = 0.2;
  int d = 32;
  int d_p = 32;
  std::uint64_t seed = 0;
  AdamConfig optimizer;
  int steps = 300;
  /// Divide the membership loss by the number of positive pairs instead of 2K.
  bool normalize_by_memberships = false;

  static TriViewConfig desk();
  /// d = d_p = 512, learning rate 2e-5.
  static TriViewConfig paper();
  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
  /// Stable `key=value;` rendering used for the parameter-file fingerprint.
  std::string canonical() const;
  std::uint64_t fingerprint() const;
};

/// mt19937_64 with a portable uniform draw, so streams match across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }

 private:
  std::mt19937_64 engine_;
};

inline constexpr std::string_view kMaskToken = "[MASK]";

struct AugmentedView {
  int view_index = 1;
  std::vector<std::string> node_texts;
  std::vector<std::string> edge_texts;
  IncidenceMatrix incidence;    // mask_matrix applied to the source incidence
  IncidenceMatrix mask_matrix;  // 0 marks a dropped membership
};

/// Replaces each whitespace token with "[MASK]" with probability p.
/// Text with nothing replaced is returned unchanged.
std::string mask_text(std::string_view text, double p, Rng& rng);

/// Drops each membership with probability p unless the drop would empty its
/// row or column. Entries are visited row-major. Returns the mask matrix.
IncidenceMatrix mask_incidence(const IncidenceMatrix& source, double p, Rng& rng);

/// Two independently augmented views. Node texts are categories, edge texts
/// are area labels.
std::pair<AugmentedView, AugmentedView> make_views(const EnrichedHypergraph& graph, const TriViewConfig& config,
                                                   Rng& rng);

struct ViewEmbeddings {
  Matrix node_embed;  // N x d
  Matrix edge_embed;  // K x d
};

ViewEmbeddings embed_view(const AugmentedView& view, const EmbeddingProvider& provider);

inline double elu(double t) { return t >= 0.0 ? t : std::expm1(t); }
inline double elu_derivative(double t) { return t >= 0.0 ? 1.0 : std::exp(t); }

/// Two-layer MLP y = W2 elu(W1 x + b1) + b2 applied row-wise.
struct ProjectionHead {
  Matrix w1;  // d_p x d
  Vector b1;  // d_p
  Matrix w2;  // d_p x d_p
  Vector b2;  // d_p

  /// Uniform in +-1/sqrt(fan_in) for each layer's weights and bias.
  static ProjectionHead init(int d, int d_p, Rng& rng);
  static ProjectionHead zeros(int d, int d_p);

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int output_dim() const { return static_cast<int>(w2.rows()); }

  Matrix forward(const Matrix& x) const;
};

struct ProjectedViews {
  Matrix node_proj;  // N x d_p
  Matrix edge_proj;  // K x d_p
};

/// Throws std::invalid_argument when shapes do not line up.
ProjectedViews project(const ViewEmbeddings& embeddings, const ProjectionHead& node_head,
                       const ProjectionHead& edge_head);

/// u.v / (|u||v|); 0 when either vector is zero.
double cosine(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v);

/// Symmetric cross-view InfoNCE with cosine scores: the mean over anchors of
/// both directions. Used for nodes (node_loss) and hyperedges (area_loss).
double node_loss(const Matrix& first, const Matrix& second, double tau);
double area_loss(const Matrix& first, const Matrix& second, double tau);

/// Bilinear discriminator score w^T B d.
struct Discriminator {
  Matrix weight;  // d_p x d_p

  static Discriminator init(int d_p);
};

/// Which memberships count as positives for each cross-view term, and which
/// pairs may serve as negatives.
struct MembershipSets {
  const IncidenceMatrix& positives_first;   // anchors from view 1 against view-2 hyperedges
  const IncidenceMatrix& positives_second;  // anchors from view 2 against view-1 hyperedges
  const IncidenceMatrix& base;              // negatives are the zeros of this matrix
};

/// Node-hyperedge membership contrast. Each positive (i, j) is scored against
/// the hyperedges j' with base(i, j') = 0; all discriminator scores are divided
/// by tau. Normalized by 2K, or by the positive count when requested.
double membership_loss(const Matrix& w1, const Matrix& w2, const Matrix& d1, const Matrix& d2,
                       const IncidenceMatrix& incidence, const Discriminator& disc, double tau,
                       bool normalize_by_memberships = false);
double membership_loss(const Matrix& w1, const Matrix& w2, const Matrix& d1, const Matrix& d2,
                       const MembershipSets& sets, const Discriminator& disc, double tau,
                       bool normalize_by_memberships = false);

inline double total_loss(double node, double area, double membership, double alpha_g, double alpha_m) {
  return node + alpha_g * area + alpha_m * membership;
}

// Gradient forms used by training and the gradient check.

struct PairLossGrad {
  double value = 0.0;
  Matrix d_first;
  Matrix d_second;
};

PairLossGrad contrastive_loss_grad(const Matrix& first, const Matrix& second, double tau);

struct MembershipLossGrad {
  double value = 0.0;
  Matrix d_w1, d_w2, d_d1, d_d2;
  Matrix d_weight;
};

MembershipLossGrad membership_loss_grad(const Matrix& w1, const Matrix& w2, const Matrix& d1, const Matrix& d2,
                                        const MembershipSets& sets, const Discriminator& disc, double tau,
                                        bool normalize_by_memberships = false);

/// Fraction of rows i whose cosine nearest neighbour in `second` is row i.
/// Ties resolve to the lower index.
double retrieval_accuracy(const Matrix& first, const Matrix& second);

}  // namespace hyperscene
