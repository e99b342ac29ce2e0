#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "hyperscene/triview.hpp"

namespace hyperscene {

/// Everything the optimizer updates. The text encoder is not part of it.
struct TriViewParams {
  ProjectionHead node_head;
  ProjectionHead edge_head;
  Discriminator discriminator;

  /// Heads drawn from `rng` (node head first), discriminator at I / sqrt(d_p).
  static TriViewParams init(int d, int d_p, Rng& rng);
  static TriViewParams zeros_like(const TriViewParams& other);

  /// Named flat views over every tensor, in serialization order:
  /// node w1, b1, w2, b2; edge w1, b1, w2, b2; discriminator.
  std::vector<std::pair<std::string, Eigen::Map<Vector>>> tensors();
  std::vector<std::pair<std::string, Eigen::Map<const Vector>>> tensors() const;
  std::size_t size() const;

  bool operator==(const TriViewParams& other) const;
};

struct LossBreakdown {
  double node = 0.0;
  double area = 0.0;
  double membership = 0.0;
  double total = 0.0;
};

/// Inputs to one forward pass: embeddings of both views plus the incidence
/// sets that drive the membership term.
struct ViewBatch {
  ViewEmbeddings first;
  ViewEmbeddings second;
  IncidenceMatrix incidence_first;
  IncidenceMatrix incidence_second;
  IncidenceMatrix incidence_base;
};

ViewBatch make_batch(const AugmentedView& first, const AugmentedView& second, const IncidenceMatrix& base,
                     const EmbeddingProvider& provider);

/// Loss of the combined objective; `grad`, when non-null, receives
/// d total / d params (same shapes as `params`).
LossBreakdown evaluate(const TriViewParams& params, const ViewBatch& batch, const TriViewConfig& config,
                       TriViewParams* grad = nullptr);

class AdamOptimizer {
 public:
  AdamOptimizer(const TriViewParams& like, AdamConfig config);
  void step(TriViewParams& params, const TriViewParams& grad);

 private:
  AdamConfig config_;
  TriViewParams m_;
  TriViewParams v_;
  long t_ = 0;
};

struct TraceRow {
  int step = 0;
  LossBreakdown loss;
};

struct TrainResult {
  TriViewParams params;
  std::vector<TraceRow> trace;  // one row per step, losses before that step's update
};

/// Called after each step; return false to stop early.
using TrainCallback = std::function<bool(const TraceRow&)>;

/// Trains heads and discriminator with Adam on fresh view pairs each step.
/// Requires at least two nodes. Throws NumericError naming the step when a
/// loss or gradient goes non-finite. The default provider is a
/// HashingEmbedder of width config.d.
TrainResult train(const EnrichedHypergraph& graph, const TriViewConfig& config,
                  const EmbeddingProvider* provider = nullptr, const TrainCallback& on_step = {});

/// Cross-view node retrieval accuracy on `draws` freshly augmented view pairs
/// (seeded by `seed`), averaged.
double evaluate_retrieval(const EnrichedHypergraph& graph, const TriViewParams& params, const TriViewConfig& config,
                          std::uint64_t seed, int draws = 8, const EmbeddingProvider* provider = nullptr);

struct TensorCheck {
  std::string name;
  double relative_error = 0.0;  // |analytic - numeric| / max(|analytic|, |numeric|), 2-norm over the tensor
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  int trials = 0;
  double step = 1e-6;
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::vector<TensorCheck> per_tensor;  // worst trial per tensor name

  bool passed(double tolerance = 1e-5) const { return max_relative_error < tolerance; }
};

/// Central-difference check of evaluate()'s gradient on random small graphs
/// (N <= 6, K <= 4, d, d_p <= 8). Temperatures, weights and mask rates come
/// from `config`; its seed drives the instances.
GradCheckReport grad_check(const TriViewConfig& config, int trials, double step = 1e-6);

// Artifacts.

inline constexpr char kParamsMagic[8] = {'H', 'S', 'T', 'V', 'P', 'A', 'R', 'M'};
inline constexpr std::uint32_t kParamsVersion = 1;

/// Little-endian container: magic, version, d, d_p, reserved (u32 each after
/// the 8-byte magic), seed and config fingerprint (u64), then every tensor
/// in TriViewParams::tensors() order as row-major IEEE-754 doubles.
std::string encode_params(const TriViewParams& params, const TriViewConfig& config);

struct DecodedParams {
  TriViewParams params;
  int d = 0;
  int d_p = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_fingerprint = 0;
};

/// Throws ParseError on a bad header or truncated payload.
DecodedParams decode_params(std::string_view bytes);

/// `step,L_n,L_g,L_m,L` with shortest round-trip decimal values.
std::string trace_csv(const std::vector<TraceRow>& trace);

}  // namespace hyperscene
