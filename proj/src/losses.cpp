#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hyperscene/triview.hpp"

namespace hyperscene {

double cosine(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

namespace {

struct Normalized {
  Matrix unit;
  Vector norms;
};

// Zero rows stay zero, which makes every cosine against them 0.
Normalized normalize_rows(const Matrix& m) {
  Normalized out{m, Vector(m.rows())};
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double n = m.row(r).norm();
    out.norms[r] = n;
    if (n > 0.0) out.unit.row(r) /= n;
  }
  return out;
}

// Gradient w.r.t. raw rows given the gradient w.r.t. their unit-normalized rows.
Matrix normalize_backward(const Normalized& nrm, const Matrix& d_unit) {
  Matrix out = Matrix::Zero(d_unit.rows(), d_unit.cols());
  for (Eigen::Index r = 0; r < d_unit.rows(); ++r) {
    const double n = nrm.norms[r];
    if (n == 0.0) continue;
    const auto u = nrm.unit.row(r);
    out.row(r) = (d_unit.row(r) - u * u.dot(d_unit.row(r))) / n;
  }
  return out;
}

double log_sum_exp(const double* values, std::size_t count) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) mx = std::max(mx, values[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i) s += std::exp(values[i] - mx);
  return mx + std::log(s);
}

void check_pair(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": both views need the same shape");
  }
}

}  // namespace

PairLossGrad contrastive_loss_grad(const Matrix& first, const Matrix& second, double tau) {
  check_pair(first, second, "contrastive loss");
  const Eigen::Index n = first.rows();
  PairLossGrad out{0.0, Matrix::Zero(first.rows(), first.cols()), Matrix::Zero(second.rows(), second.cols())};
  if (n == 0) return out;

  const Normalized a = normalize_rows(first);
  const Normalized b = normalize_rows(second);
  const Matrix logits = (a.unit * b.unit.transpose()) / tau;  // logits(i, k) = s(first_i, second_k) / tau

  // Row softmax: anchors in the first view. Column softmax: anchors in the second.
  Matrix row_soft(n, n), col_soft(n, n);
  double total = 0.0;
  std::vector<double> buf(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) buf[k] = logits(i, k);
    const double lse = log_sum_exp(buf.data(), buf.size());
    total += lse - logits(i, i);
    for (Eigen::Index k = 0; k < n; ++k) row_soft(i, k) = std::exp(logits(i, k) - lse);
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) buf[i] = logits(i, k);
    const double lse = log_sum_exp(buf.data(), buf.size());
    total += lse - logits(k, k);
    for (Eigen::Index i = 0; i < n; ++i) col_soft(i, k) = std::exp(logits(i, k) - lse);
  }
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  out.value = scale * total;

  Matrix g = row_soft + col_soft;
  g.diagonal().array() -= 2.0;
  g *= scale / tau;  // d loss / d cosine(i, k)
  const Matrix d_a = g * b.unit;
  const Matrix d_b = g.transpose() * a.unit;
  out.d_first = normalize_backward(a, d_a);
  out.d_second = normalize_backward(b, d_b);
  return out;
}

double node_loss(const Matrix& first, const Matrix& second, double tau) {
  return contrastive_loss_grad(first, second, tau).value;
}

double area_loss(const Matrix& first, const Matrix& second, double tau) {
  return contrastive_loss_grad(first, second, tau).value;
}

namespace {

// One direction: anchors `nodes` (N x p) against hyperedges `edges` (K x p).
// Accumulates into d_scores (N x K); returns the summed per-pair loss and the
// number of positive pairs.
std::pair<double, int> membership_direction(const Matrix& scores, const IncidenceMatrix& positives,
                                            const IncidenceMatrix& base, double tau, double weight,
                                            Matrix& d_scores) {
  const int n = static_cast<int>(scores.rows());
  const int k = static_cast<int>(scores.cols());
  double total = 0.0;
  int count = 0;
  std::vector<double> logits;
  std::vector<int> cols;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      if (!positives(i, j)) continue;
      logits.clear();
      cols.clear();
      logits.push_back(scores(i, j) / tau);
      cols.push_back(j);
      for (int c = 0; c < k; ++c) {
        if (!base(i, c)) {
          logits.push_back(scores(i, c) / tau);
          cols.push_back(c);
        }
      }
      const double lse = log_sum_exp(logits.data(), logits.size());
      total += lse - logits[0];
      ++count;
      for (std::size_t t = 0; t < logits.size(); ++t) {
        d_scores(i, cols[t]) += weight * std::exp(logits[t] - lse) / tau;
      }
      d_scores(i, j) -= weight / tau;
    }
  }
  return {total, count};
}

void check_membership_shapes(const Matrix& w1, const Matrix& w2, const Matrix& d1, const Matrix& d2,
                             const MembershipSets& sets, const Discriminator& disc) {
  check_pair(w1, w2, "membership loss");
  check_pair(d1, d2, "membership loss");
  const auto n = w1.rows();
  const auto k = d1.rows();
  for (const IncidenceMatrix* m : {&sets.positives_first, &sets.positives_second, &sets.base}) {
    if (m->rows() != n || m->cols() != k) throw std::invalid_argument("membership loss: incidence shape mismatch");
  }
  if (disc.weight.rows() != w1.cols() || disc.weight.cols() != d1.cols()) {
    throw std::invalid_argument("membership loss: discriminator shape mismatch");
  }
}

}  // namespace

MembershipLossGrad membership_loss_grad(const Matrix& w1, const Matrix& w2, const Matrix& d1, const Matrix& d2,
                                        const MembershipSets& sets, const Discriminator& disc, double tau,
                                        bool normalize_by_memberships) {
  check_membership_shapes(w1, w2, d1, d2, sets, disc);
  const Eigen::Index n = w1.rows();
  const Eigen::Index k = d1.rows();
  MembershipLossGrad out;
  out.d_w1 = Matrix::Zero(w1.rows(), w1.cols());
  out.d_w2 = Matrix::Zero(w2.rows(), w2.cols());
  out.d_d1 = Matrix::Zero(d1.rows(), d1.cols());
  out.d_d2 = Matrix::Zero(d2.rows(), d2.cols());
  out.d_weight = Matrix::Zero(disc.weight.rows(), disc.weight.cols());
  if (n == 0 || k == 0) return out;

  const Matrix& b = disc.weight;
  const Matrix s12 = w1 * b * d2.transpose();
  const Matrix s21 = w2 * b * d1.transpose();

  int positives = 0;
  for (const IncidenceMatrix* m : {&sets.positives_first, &sets.positives_second}) positives += m->count();
  const double denom = normalize_by_memberships ? static_cast<double>(std::max(positives, 1))
                                                : 2.0 * static_cast<double>(k);
  const double weight = 1.0 / denom;

  Matrix g12 = Matrix::Zero(n, k);
  Matrix g21 = Matrix::Zero(n, k);
  const auto [sum12, c12] = membership_direction(s12, sets.positives_first, sets.base, tau, weight, g12);
  const auto [sum21, c21] = membership_direction(s21, sets.positives_second, sets.base, tau, weight, g21);
  out.value = (sum12 + sum21) * weight;

  // s = W B D^T  =>  dW = G D B^T,  dD = G^T W B,  dB = W^T G D
  out.d_w1 = g12 * d2 * b.transpose();
  out.d_d2 = g12.transpose() * w1 * b;
  out.d_w2 = g21 * d1 * b.transpose();
  out.d_d1 = g21.transpose() * w2 * b;
  out.d_weight = w1.transpose() * g12 * d2 + w2.transpose() * g21 * d1;
  return out;
}

double membership_loss(const Matrix& w1, const Matrix& w2, const Matrix& d1, const Matrix& d2,
                       const MembershipSets& sets, const Discriminator& disc, double tau,
                       bool normalize_by_memberships) {
  return membership_loss_grad(w1, w2, d1, d2, sets, disc, tau, normalize_by_memberships).value;
}

double membership_loss(const Matrix& w1, const Matrix& w2, const Matrix& d1, const Matrix& d2,
                       const IncidenceMatrix& incidence, const Discriminator& disc, double tau,
                       bool normalize_by_memberships) {
  return membership_loss(w1, w2, d1, d2, MembershipSets{incidence, incidence, incidence}, disc, tau,
                         normalize_by_memberships);
}

double retrieval_accuracy(const Matrix& first, const Matrix& second) {
  check_pair(first, second, "retrieval accuracy");
  const Eigen::Index n = first.rows();
  if (n == 0) return 0.0;
  int hits = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      const double s = cosine(first.row(i).transpose(), second.row(k).transpose());
      if (s > best_score) {
        best_score = s;
        best = k;
      }
    }
    if (best == i) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace hyperscene
