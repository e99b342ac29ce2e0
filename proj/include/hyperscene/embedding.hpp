#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace hyperscene {

/// Row-major dense matrix used throughout the encoder.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Splits on ASCII whitespace.
std::vector<std::string> whitespace_tokens(std::string_view text);

/// Text encoder seam. Implementations are frozen: they carry no trainable state.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dim() const = 0;
  /// One row per text.
  virtual Matrix embed(std::span<const std::string> texts) const = 0;
};

/// Signed feature hashing. Each whitespace token adds +-1 at index
/// fnv1a64(token) mod d, the sign taken from a second mix of the hash; rows
/// are then L2-normalized. Empty text maps to the zero row.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(int dim);

  int dim() const override { return dim_; }
  Matrix embed(std::span<const std::string> texts) const override;

  /// Unnormalized accumulation for one text.
  Vector accumulate(std::string_view text) const;

 private:
  int dim_;
};

inline Matrix embed_texts(std::span<const std::string> texts, const EmbeddingProvider& provider) {
  return provider.embed(texts);
}

}  // namespace hyperscene
