#include "hyperscene/training.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <memory>
#include <stdexcept>

#include "hyperscene/errors.hpp"
#include "hyperscene/hash.hpp"

namespace hyperscene {

// ---------------------------------------------------------------------------
// Parameters

TriViewParams TriViewParams::init(int d, int d_p, Rng& rng) {
  TriViewParams p;
  p.node_head = ProjectionHead::init(d, d_p, rng);
  p.edge_head = ProjectionHead::init(d, d_p, rng);
  p.discriminator = Discriminator::init(d_p);
  return p;
}

TriViewParams TriViewParams::zeros_like(const TriViewParams& other) {
  TriViewParams p;
  p.node_head = ProjectionHead::zeros(other.node_head.input_dim(), other.node_head.output_dim());
  p.edge_head = ProjectionHead::zeros(other.edge_head.input_dim(), other.edge_head.output_dim());
  p.discriminator.weight = Matrix::Zero(other.discriminator.weight.rows(), other.discriminator.weight.cols());
  return p;
}

namespace {

template <typename Map, typename Params>
std::vector<std::pair<std::string, Map>> tensor_views(Params& p) {
  std::vector<std::pair<std::string, Map>> out;
  auto add = [&out](const char* name, auto& t) { out.emplace_back(name, Map(t.data(), t.size())); };
  add("node.w1", p.node_head.w1);
  add("node.b1", p.node_head.b1);
  add("node.w2", p.node_head.w2);
  add("node.b2", p.node_head.b2);
  add("edge.w1", p.edge_head.w1);
  add("edge.b1", p.edge_head.b1);
  add("edge.w2", p.edge_head.w2);
  add("edge.b2", p.edge_head.b2);
  add("discriminator", p.discriminator.weight);
  return out;
}

}  // namespace

std::vector<std::pair<std::string, Eigen::Map<Vector>>> TriViewParams::tensors() {
  return tensor_views<Eigen::Map<Vector>>(*this);
}

std::vector<std::pair<std::string, Eigen::Map<const Vector>>> TriViewParams::tensors() const {
  return tensor_views<Eigen::Map<const Vector>>(*this);
}

std::size_t TriViewParams::size() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors()) n += static_cast<std::size_t>(t.size());
  return n;
}

bool TriViewParams::operator==(const TriViewParams& other) const {
  const auto a = tensors();
  const auto b = other.tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].second.size() != b[i].second.size()) return false;
    if (std::memcmp(a[i].second.data(), b[i].second.data(), sizeof(double) * a[i].second.size()) != 0) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

struct HeadTrace {
  Matrix z;  // pre-activation
  Matrix h;  // elu(z)
  Matrix y;
};

HeadTrace head_forward(const ProjectionHead& head, const Matrix& x) {
  if (x.cols() != head.w1.cols()) throw std::invalid_argument("projection head input width mismatch");
  HeadTrace t;
  t.z = x * head.w1.transpose();
  t.z.rowwise() += head.b1.transpose();
  t.h = t.z.unaryExpr([](double v) { return elu(v); });
  t.y = t.h * head.w2.transpose();
  t.y.rowwise() += head.b2.transpose();
  return t;
}

void head_backward(const ProjectionHead& head, const Matrix& x, const HeadTrace& t, const Matrix& dy,
                   ProjectionHead& grad) {
  grad.w2 += dy.transpose() * t.h;
  grad.b2 += dy.colwise().sum().transpose();
  Matrix dz = dy * head.w2;
  dz.array() *= t.z.unaryExpr([](double v) { return elu_derivative(v); }).array();
  grad.w1 += dz.transpose() * x;
  grad.b1 += dz.colwise().sum().transpose();
}

bool all_finite(const TriViewParams& p) {
  for (const auto& [_, t] : p.tensors()) {
    if (!t.allFinite()) return false;
  }
  return true;
}

}  // namespace

ViewBatch make_batch(const AugmentedView& first, const AugmentedView& second, const IncidenceMatrix& base,
                     const EmbeddingProvider& provider) {
  return {embed_view(first, provider), embed_view(second, provider), first.incidence, second.incidence, base};
}

LossBreakdown evaluate(const TriViewParams& params, const ViewBatch& batch, const TriViewConfig& config,
                       TriViewParams* grad) {
  const HeadTrace w1 = head_forward(params.node_head, batch.first.node_embed);
  const HeadTrace w2 = head_forward(params.node_head, batch.second.node_embed);
  const HeadTrace d1 = head_forward(params.edge_head, batch.first.edge_embed);
  const HeadTrace d2 = head_forward(params.edge_head, batch.second.edge_embed);

  const PairLossGrad ln = contrastive_loss_grad(w1.y, w2.y, config.tau_n);
  const PairLossGrad lg = contrastive_loss_grad(d1.y, d2.y, config.tau_g);
  const MembershipSets sets{batch.incidence_first, batch.incidence_second, batch.incidence_base};
  const MembershipLossGrad lm = membership_loss_grad(w1.y, w2.y, d1.y, d2.y, sets, params.discriminator,
                                                     config.tau_m, config.normalize_by_memberships);

  LossBreakdown out;
  out.node = ln.value;
  out.area = lg.value;
  out.membership = lm.value;
  out.total = total_loss(ln.value, lg.value, lm.value, config.alpha_g, config.alpha_m);

  if (grad != nullptr) {
    *grad = TriViewParams::zeros_like(params);
    const double ag = config.alpha_g;
    const double am = config.alpha_m;
    head_backward(params.node_head, batch.first.node_embed, w1, ln.d_first + am * lm.d_w1, grad->node_head);
    head_backward(params.node_head, batch.second.node_embed, w2, ln.d_second + am * lm.d_w2, grad->node_head);
    head_backward(params.edge_head, batch.first.edge_embed, d1, ag * lg.d_first + am * lm.d_d1, grad->edge_head);
    head_backward(params.edge_head, batch.second.edge_embed, d2, ag * lg.d_second + am * lm.d_d2, grad->edge_head);
    grad->discriminator.weight = am * lm.d_weight;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

AdamOptimizer::AdamOptimizer(const TriViewParams& like, AdamConfig config)
    : config_(config), m_(TriViewParams::zeros_like(like)), v_(TriViewParams::zeros_like(like)) {}

void AdamOptimizer::step(TriViewParams& params, const TriViewParams& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  auto p = params.tensors();
  auto g = grad.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto& pt = p[k].second;
    const auto& gt = g[k].second;
    auto& mt = m[k].second;
    auto& vt = v[k].second;
    for (Eigen::Index i = 0; i < pt.size(); ++i) {
      mt[i] = config_.beta1 * mt[i] + (1.0 - config_.beta1) * gt[i];
      vt[i] = config_.beta2 * vt[i] + (1.0 - config_.beta2) * gt[i] * gt[i];
      const double mhat = mt[i] / c1;
      const double vhat = vt[i] / c2;
      pt[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.eps_stability);
    }
  }
}

// ---------------------------------------------------------------------------
// Training

namespace {

constexpr std::uint64_t kViewStreamSalt = 0x7472692d76696577ULL;

const EmbeddingProvider& resolve_provider(const EmbeddingProvider* provider, const TriViewConfig& config,
                                          std::unique_ptr<EmbeddingProvider>& owned) {
  if (provider == nullptr) {
    owned = std::make_unique<HashingEmbedder>(config.d);
    return *owned;
  }
  if (provider->dim() != config.d) throw std::invalid_argument("embedding provider width differs from config.d");
  return *provider;
}

}  // namespace

TrainResult train(const EnrichedHypergraph& graph, const TriViewConfig& config, const EmbeddingProvider* provider,
                  const TrainCallback& on_step) {
  config.validate();
  graph.validate();
  if (graph.base.num_nodes() < 2) throw std::invalid_argument("training needs at least two nodes");
  std::unique_ptr<EmbeddingProvider> owned;
  const EmbeddingProvider& embedder = resolve_provider(provider, config, owned);

  Rng init_rng(config.seed);
  Rng view_rng(mix64(config.seed ^ kViewStreamSalt));
  TrainResult result{TriViewParams::init(config.d, config.d_p, init_rng), {}};
  AdamOptimizer adam(result.params, config.optimizer);
  TriViewParams grad;

  for (int step = 0; step < config.steps; ++step) {
    auto [first, second] = make_views(graph, config, view_rng);
    const ViewBatch batch = make_batch(first, second, graph.base.incidence(), embedder);
    const LossBreakdown loss = evaluate(result.params, batch, config, &grad);
    if (!std::isfinite(loss.total) || !all_finite(grad)) {
      throw NumericError("non-finite loss at step " + std::to_string(step), step);
    }
    result.trace.push_back({step, loss});
    adam.step(result.params, grad);
    if (on_step && !on_step(result.trace.back())) break;
  }
  return result;
}

double evaluate_retrieval(const EnrichedHypergraph& graph, const TriViewParams& params, const TriViewConfig& config,
                          std::uint64_t seed, int draws, const EmbeddingProvider* provider) {
  std::unique_ptr<EmbeddingProvider> owned;
  const EmbeddingProvider& embedder = resolve_provider(provider, config, owned);
  Rng rng(seed);
  double sum = 0.0;
  for (int t = 0; t < draws; ++t) {
    auto [first, second] = make_views(graph, config, rng);
    const Matrix w1 = params.node_head.forward(embedder.embed(first.node_texts));
    const Matrix w2 = params.node_head.forward(embedder.embed(second.node_texts));
    sum += retrieval_accuracy(w1, w2);
  }
  return draws > 0 ? sum / draws : 0.0;
}

// ---------------------------------------------------------------------------
// Gradient check

namespace {

constexpr const char* kVocab[] = {"red", "cup", "stove", "pan", "table", "chair", "lamp", "sofa", "sink", "knife"};

std::string random_text(Rng& rng) {
  const int n = rng.integer(1, 3);
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += kVocab[rng.integer(0, 9)];
  }
  return s;
}

EnrichedHypergraph random_graph(Rng& rng) {
  const int n = rng.integer(2, 6);
  const int k = rng.integer(1, std::min(4, n));
  std::vector<HyperNode> nodes;
  for (int i = 0; i < n; ++i) nodes.push_back({i, random_text(rng), "", "img"});
  std::vector<std::vector<int>> members(k);
  for (int i = 0; i < n; ++i) members[i < k ? i : rng.integer(0, k - 1)].push_back(i);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      if (std::find(members[j].begin(), members[j].end(), i) == members[j].end() && rng.uniform() < 0.3) {
        members[j].push_back(i);
      }
    }
  }
  std::vector<Hyperedge> edges;
  for (int j = 0; j < k; ++j) edges.push_back({j, members[j]});
  EnrichedHypergraph g;
  g.base = SceneHypergraph("grad-check", std::move(nodes), std::move(edges));
  for (int j = 0; j < k; ++j) {
    g.area_labels.push_back(random_text(rng));
    g.label_source.push_back(Provenance::Fallback);
  }
  g.cf_scores.assign(n, 0.0);
  g.score_source.assign(n, Provenance::Fallback);
  return g;
}

}  // namespace

GradCheckReport grad_check(const TriViewConfig& config, int trials, double step) {
  TriViewConfig cfg = config;
  cfg.d = std::min(cfg.d, 8);
  cfg.d_p = std::min(cfg.d_p, 8);
  cfg.validate();
  const HashingEmbedder embedder(cfg.d);

  GradCheckReport report;
  report.trials = trials;
  report.step = step;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(mix64(config.seed + static_cast<std::uint64_t>(trial)));
    const EnrichedHypergraph graph = random_graph(rng);
    TriViewParams params = TriViewParams::init(cfg.d, cfg.d_p, rng);
    for (Eigen::Index i = 0; i < params.discriminator.weight.size(); ++i) {
      params.discriminator.weight.data()[i] += rng.uniform(-0.2, 0.2);
    }
    auto [first, second] = make_views(graph, cfg, rng);
    const ViewBatch batch = make_batch(first, second, graph.base.incidence(), embedder);

    TriViewParams analytic;
    evaluate(params, batch, cfg, &analytic);

    auto p = params.tensors();
    const auto a = analytic.tensors();
    for (std::size_t t = 0; t < p.size(); ++t) {
      auto& tensor = p[t].second;
      Vector numeric(tensor.size());
      for (Eigen::Index i = 0; i < tensor.size(); ++i) {
        const double saved = tensor[i];
        tensor[i] = saved + step;
        const double up = evaluate(params, batch, cfg).total;
        tensor[i] = saved - step;
        const double down = evaluate(params, batch, cfg).total;
        tensor[i] = saved;
        numeric[i] = (up - down) / (2.0 * step);
      }
      const Vector diff = a[t].second - numeric;
      const double scale = std::max(a[t].second.norm(), numeric.norm());
      TensorCheck check{p[t].first, scale > 1e-10 ? diff.norm() / scale : diff.norm(),
                        diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0};
      auto it = std::find_if(report.per_tensor.begin(), report.per_tensor.end(),
                             [&](const TensorCheck& c) { return c.name == check.name; });
      if (it == report.per_tensor.end()) {
        report.per_tensor.push_back(check);
      } else if (check.relative_error > it->relative_error) {
        *it = check;
      }
      if (check.relative_error >= report.max_relative_error) {
        report.max_relative_error = check.relative_error;
        report.worst_tensor = check.name;
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t get(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size()) {
      throw ParseError("parameter file truncated at byte " + std::to_string(pos_), pos_);
    }
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_params(const TriViewParams& params, const TriViewConfig& config) {
  std::string out(kParamsMagic, sizeof kParamsMagic);
  put_u32(out, kParamsVersion);
  put_u32(out, static_cast<std::uint32_t>(params.node_head.input_dim()));
  put_u32(out, static_cast<std::uint32_t>(params.node_head.output_dim()));
  put_u32(out, 0);
  put_u64(out, config.seed);
  put_u64(out, config.fingerprint());
  for (const auto& [_, t] : params.tensors()) {
    for (Eigen::Index i = 0; i < t.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(t[i]));
  }
  return out;
}

DecodedParams decode_params(std::string_view bytes) {
  if (bytes.size() < sizeof kParamsMagic || std::memcmp(bytes.data(), kParamsMagic, sizeof kParamsMagic) != 0) {
    throw ParseError("parameter file: bad magic at byte 0", 0);
  }
  Reader r(bytes.substr(sizeof kParamsMagic));
  const auto version = static_cast<std::uint32_t>(r.get(4));
  if (version != kParamsVersion) {
    throw ParseError("parameter file: unsupported version " + std::to_string(version), sizeof kParamsMagic);
  }
  DecodedParams out;
  out.d = static_cast<int>(r.get(4));
  out.d_p = static_cast<int>(r.get(4));
  r.get(4);
  out.seed = r.get(8);
  out.config_fingerprint = r.get(8);
  if (out.d <= 0 || out.d_p <= 0 || out.d > (1 << 20) || out.d_p > (1 << 20)) {
    throw ParseError("parameter file: implausible dimensions", sizeof kParamsMagic + 4);
  }
  out.params.node_head = ProjectionHead::zeros(out.d, out.d_p);
  out.params.edge_head = ProjectionHead::zeros(out.d, out.d_p);
  out.params.discriminator.weight = Matrix::Zero(out.d_p, out.d_p);
  for (auto& [_, t] : out.params.tensors()) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = std::bit_cast<double>(r.get(8));
  }
  if (r.remaining() != 0) {
    const std::size_t at = sizeof kParamsMagic + r.pos();
    throw ParseError("parameter file: trailing bytes at byte " + std::to_string(at), at);
  }
  return out;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "step,L_n,L_g,L_m,L\n";
  char buf[32];
  auto num = [&](double v) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
  };
  for (const auto& row : trace) {
    out += std::to_string(row.step);
    out += ',';
    num(row.loss.node);
    out += ',';
    num(row.loss.area);
    out += ',';
    num(row.loss.membership);
    out += ',';
    num(row.loss.total);
    out += '\n';
  }
  return out;
}

}  // namespace hyperscene
