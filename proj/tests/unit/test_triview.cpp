#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hyperscene/embedding.hpp"
#include "hyperscene/hash.hpp"
#include "hyperscene/triview.hpp"
#include "oracles.hpp"

using namespace hyperscene;

namespace {

EnrichedHypergraph small_graph() {
  std::vector<HyperNode> nodes = {{0, "red stove", "", "i"}, {1, "big pan", "", "i"}, {2, "sofa", "", "i"},
                                  {3, "old lamp", "", "i"}};
  EnrichedHypergraph g;
  g.base = SceneHypergraph("g", nodes, {{0, {0, 1}}, {1, {1, 2, 3}}, {2, {0, 3}}});
  g.area_labels = {"Kitchen Area", "Living Area", "Mixed Area"};
  g.cf_scores.assign(4, 0.0);
  g.label_source.assign(3, Provenance::Fallback);
  g.score_source.assign(4, Provenance::Fallback);
  return g;
}

bool leq(const IncidenceMatrix& a, const IncidenceMatrix& b) {
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      if (a(i, j) > b(i, j)) return false;
  return true;
}

}  // namespace

TEST(Views, ZeroMaskIsIdentity) {
  const auto g = small_graph();
  TriViewConfig c;
  c.mask_prob_text = 0.0;
  c.mask_prob_incidence = 0.0;
  Rng rng(1);
  auto [a, b] = make_views(g, c, rng);
  EXPECT_EQ(a.view_index, 1);
  EXPECT_EQ(b.view_index, 2);
  for (const auto* v : {&a, &b}) {
    EXPECT_EQ(v->incidence, g.base.incidence());
    EXPECT_EQ(v->node_texts[0], "red stove");
    EXPECT_EQ(v->edge_texts[1], "Living Area");
  }
}

TEST(Views, FullTextMask) {
  Rng rng(3);
  EXPECT_EQ(mask_text("red  big stove", 1.0, rng), "[MASK] [MASK] [MASK]");
  EXPECT_EQ(mask_text("", 1.0, rng), "");
  EXPECT_EQ(mask_text("keep  spacing", 0.0, rng), "keep  spacing");
}

TEST(Views, SameSeedSameViews) {
  const auto g = small_graph();
  TriViewConfig c;
  c.mask_prob_text = 0.5;
  c.mask_prob_incidence = 0.5;
  Rng r1(42), r2(42);
  auto v1 = make_views(g, c, r1);
  auto v2 = make_views(g, c, r2);
  EXPECT_EQ(v1.first.node_texts, v2.first.node_texts);
  EXPECT_EQ(v1.second.edge_texts, v2.second.edge_texts);
  EXPECT_EQ(v1.first.incidence, v2.first.incidence);
  EXPECT_EQ(v1.second.mask_matrix, v2.second.mask_matrix);
}

TEST(Views, MaskingKeepsRowsAndColumnsCovered) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = rng.integer(1, 9), k = rng.integer(1, 5);
    const IncidenceMatrix h = oracle::random_incidence(n, k, rng, rng.uniform());
    const double p = rng.uniform();
    const IncidenceMatrix m = mask_incidence(h, p, rng);
    IncidenceMatrix hk(n, k);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) hk.set(i, j, h(i, j) && m(i, j));
    ASSERT_TRUE(leq(hk, h));
    for (int i = 0; i < n; ++i) ASSERT_GE(hk.row_sum(i), 1);
    for (int j = 0; j < k; ++j) ASSERT_GE(hk.col_sum(j), 1);
  }
  IncidenceMatrix h(2, 2);
  h.set(0, 0, true);
  h.set(0, 1, true);
  h.set(1, 0, true);
  h.set(1, 1, true);
  const IncidenceMatrix m = mask_incidence(h, 1.0, rng);
  EXPECT_EQ(m.count(), 2);  // p = 1 drops all it can: one per row, one per column remains
}

TEST(Embedding, HashingRules) {
  HashingEmbedder e(16);
  const std::vector<std::string> texts = {"", "stove", "stove stove", "stove"};
  const Matrix m = e.embed(texts);
  ASSERT_EQ(m.rows(), 4);
  ASSERT_EQ(m.cols(), 16);
  EXPECT_EQ(m.row(0).squaredNorm(), 0.0);
  EXPECT_EQ(m.row(1), m.row(3));
  EXPECT_EQ(m.row(1), m.row(2));
  EXPECT_EQ(e.accumulate("stove stove"), 2.0 * e.accumulate("stove"));
  EXPECT_NEAR(m.row(1).norm(), 1.0, 1e-15);
  const Vector one = e.accumulate("stove");
  EXPECT_EQ(one.cwiseAbs().sum(), 1.0);  // a single +-1 entry
}

TEST(Embedding, IndexAndSignFollowHash) {
  HashingEmbedder e(32);
  const std::uint64_t h = fnv1a64("lamp");
  const Vector v = e.accumulate("lamp");
  const double sign = (mix64(h) >> 63) ? -1.0 : 1.0;
  EXPECT_EQ(v[static_cast<Eigen::Index>(h % 32)], sign);
}

TEST(Head, EluValues) {
  EXPECT_EQ(elu(1.0), 1.0);
  EXPECT_EQ(elu(0.0), 0.0);
  EXPECT_NEAR(elu(-1.0), -0.6321205588285577, 1e-15);
}

TEST(Head, ZeroInputZeroBiasGivesZero) {
  Rng rng(5);
  ProjectionHead h = ProjectionHead::init(6, 4, rng);
  h.b1.setZero();
  h.b2.setZero();
  EXPECT_EQ(h.forward(Matrix::Zero(3, 6)), Matrix::Zero(3, 4));
}

TEST(Head, JacobianVectorProductMatchesFiniteDifferences) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const ProjectionHead h = ProjectionHead::init(5, 4, rng);
    const Matrix x = oracle::random_matrix(1, 5, rng);
    const Matrix v = oracle::random_matrix(1, 5, rng);
    // analytic J v = W2 diag(elu'(W1 x + b1)) W1 v
    const Vector pre = h.w1 * x.row(0).transpose() + h.b1;
    Vector mid = h.w1 * v.row(0).transpose();
    for (int i = 0; i < mid.size(); ++i) mid[i] *= elu_derivative(pre[i]);
    const Vector jv = h.w2 * mid;
    const double eps = 1e-6;
    const Vector fd = (h.forward(x + eps * v) - h.forward(x - eps * v)).row(0).transpose() / (2 * eps);
    EXPECT_LT((jv - fd).norm() / std::max(jv.norm(), 1e-12), 1e-6);
  }
}

TEST(Head, ShapeMismatchThrows) {
  Rng rng(1);
  const ProjectionHead h = ProjectionHead::init(6, 4, rng);
  ViewEmbeddings bad{Matrix::Zero(2, 5), Matrix::Zero(1, 6)};
  EXPECT_THROW(project(bad, h, h), std::invalid_argument);
}

TEST(Cosine, Examples) {
  Vector u(2), v(2), z(2);
  u << 1, 2;
  v << 2, 1;
  z << 0, 0;
  EXPECT_NEAR(cosine(u, v), 0.8, 1e-15);
  EXPECT_NEAR(cosine(u, u), 1.0, 1e-15);
  Vector o(2);
  o << -2, 1;
  EXPECT_EQ(cosine(u, o), 0.0);
  EXPECT_EQ(cosine(z, u), 0.0);
  EXPECT_EQ(cosine(z, z), 0.0);
}

TEST(Losses, SingleRowIsZero) {
  Rng rng(2);
  const Matrix a = oracle::random_matrix(1, 4, rng), b = oracle::random_matrix(1, 4, rng);
  EXPECT_EQ(node_loss(a, b, 0.07), 0.0);
  EXPECT_EQ(area_loss(a, b, 0.5), 0.0);
}

TEST(Losses, MatchNaiveEvaluator) {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.integer(1, 8), k = rng.integer(1, 4), dp = rng.integer(2, 6);
    const double tau = rng.uniform(0.05, 1.0);
    const Matrix w1 = oracle::random_matrix(n, dp, rng), w2 = oracle::random_matrix(n, dp, rng);
    const Matrix d1 = oracle::random_matrix(k, dp, rng), d2 = oracle::random_matrix(k, dp, rng);
    EXPECT_NEAR(node_loss(w1, w2, tau), oracle::contrastive(w1, w2, tau), 1e-12);
    EXPECT_NEAR(area_loss(d1, d2, tau), oracle::contrastive(d1, d2, tau), 1e-12);
    const IncidenceMatrix h = oracle::random_incidence(n, k, rng);
    Discriminator disc{oracle::random_matrix(dp, dp, rng, 0.5)};
    for (bool by_m : {false, true}) {
      EXPECT_NEAR(membership_loss(w1, w2, d1, d2, h, disc, tau, by_m),
                  oracle::membership(w1, w2, d1, d2, h, h, h, disc.weight, tau, by_m), 1e-12);
    }
  }
}

TEST(Losses, MembershipSetsMatchNaiveEvaluator) {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.integer(1, 8), k = rng.integer(1, 4), dp = 4;
    const Matrix w1 = oracle::random_matrix(n, dp, rng), w2 = oracle::random_matrix(n, dp, rng);
    const Matrix d1 = oracle::random_matrix(k, dp, rng), d2 = oracle::random_matrix(k, dp, rng);
    const IncidenceMatrix h = oracle::random_incidence(n, k, rng);
    const IncidenceMatrix m1 = mask_incidence(h, 0.5, rng), m2 = mask_incidence(h, 0.5, rng);
    IncidenceMatrix h1(n, k), h2(n, k);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) {
        h1.set(i, j, h(i, j) && m1(i, j));
        h2.set(i, j, h(i, j) && m2(i, j));
      }
    const Discriminator disc = Discriminator::init(dp);
    const MembershipSets sets{h1, h2, h};
    EXPECT_NEAR(membership_loss(w1, w2, d1, d2, sets, disc, 0.07),
                oracle::membership(w1, w2, d1, d2, h1, h2, h, disc.weight, 0.07, false), 1e-12);
    const auto g = membership_loss_grad(w1, w2, d1, d2, sets, disc, 0.07);
    EXPECT_NEAR(g.value, membership_loss(w1, w2, d1, d2, sets, disc, 0.07), 1e-12);
  }
}

TEST(Losses, SymmetricUnderViewSwap) {
  Rng rng(8);
  const Matrix a = oracle::random_matrix(5, 3, rng), b = oracle::random_matrix(5, 3, rng);
  EXPECT_NEAR(node_loss(a, b, 0.07), node_loss(b, a, 0.07), 1e-13);
  EXPECT_NEAR(area_loss(a, b, 0.2), area_loss(b, a, 0.2), 1e-13);
}

TEST(Losses, NonNegativePermutationAndScaleInvariance) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.integer(1, 8), dp = rng.integer(2, 6);
    const double tau = rng.uniform(0.05, 1.0);
    const Matrix a = oracle::random_matrix(n, dp, rng), b = oracle::random_matrix(n, dp, rng);
    const double base = node_loss(a, b, tau);
    EXPECT_GE(base, 0.0);
    EXPECT_GE(area_loss(a, b, tau), 0.0);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.integer(0, i)]);
    Matrix pa(n, dp), pb(n, dp);
    for (int i = 0; i < n; ++i) {
      pa.row(i) = a.row(perm[i]);
      pb.row(i) = b.row(perm[i]);
    }
    EXPECT_NEAR(node_loss(pa, pb, tau), base, 1e-12);

    Matrix sa = a, sb = b;
    for (int i = 0; i < n; ++i) {
      sa.row(i) *= rng.uniform(0.1, 10.0);
      sb.row(i) *= rng.uniform(0.1, 10.0);
    }
    EXPECT_NEAR(node_loss(sa, sb, tau), base, 1e-12);
    EXPECT_NEAR(area_loss(sa, sb, tau), area_loss(a, b, tau), 1e-12);
  }
}

TEST(Losses, MembershipNonNegativeAndNotScaleInvariant) {
  Rng rng(13);
  int changed = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.integer(2, 8), k = rng.integer(2, 4), dp = 4;
    const Matrix w1 = oracle::random_matrix(n, dp, rng), w2 = oracle::random_matrix(n, dp, rng);
    const Matrix d1 = oracle::random_matrix(k, dp, rng), d2 = oracle::random_matrix(k, dp, rng);
    const IncidenceMatrix h = oracle::random_incidence(n, k, rng, 0.2);
    const Discriminator disc = Discriminator::init(dp);
    const double base = membership_loss(w1, w2, d1, d2, h, disc, 0.07);
    EXPECT_GE(base, 0.0);
    const double scaled = membership_loss(3.0 * w1, 3.0 * w2, d1, d2, h, disc, 0.07);
    if (std::abs(scaled - base) > 1e-6) ++changed;
  }
  // the bilinear score is not a cosine, so rescaling node rows moves the loss
  EXPECT_GT(changed, 40);
}

TEST(Losses, GradientsOfPairLossMatchFiniteDifferences) {
  Rng rng(19);
  const Matrix a = oracle::random_matrix(4, 3, rng), b = oracle::random_matrix(4, 3, rng);
  const auto g = contrastive_loss_grad(a, b, 0.3);
  EXPECT_NEAR(g.value, node_loss(a, b, 0.3), 1e-13);
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      Matrix ap = a, am = a;
      ap(i, j) += h;
      am(i, j) -= h;
      EXPECT_NEAR(g.d_first(i, j), (node_loss(ap, b, 0.3) - node_loss(am, b, 0.3)) / (2 * h), 1e-7);
    }
  }
}

TEST(Retrieval, Accuracy) {
  Matrix a(3, 2), b(3, 2);
  a << 1, 0, 0, 1, 1, 1;
  b << 1, 0.1, 0.1, 1, 1, 1;
  EXPECT_EQ(retrieval_accuracy(a, b), 1.0);
  b.row(2) << 1, 0;
  EXPECT_NEAR(retrieval_accuracy(a, b), 1.0 / 3.0, 1e-15);  // rows 0 and 2 now prefer other rows
}

TEST(Config, PresetsAndValidation) {
  const auto desk = TriViewConfig::desk();
  const auto paper = TriViewConfig::paper();
  EXPECT_EQ(desk.tau_n, 0.07);
  EXPECT_EQ(paper.d_p, 512);
  EXPECT_EQ(paper.optimizer.learning_rate, 2e-5);
  EXPECT_NE(desk.fingerprint(), paper.fingerprint());
  TriViewConfig bad;
  bad.tau_m = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = TriViewConfig{};
  bad.mask_prob_text = 1.5;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}
