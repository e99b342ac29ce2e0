#include "hyperscene/embedding.hpp"

#include <cctype>
#include <stdexcept>

#include "hyperscene/hash.hpp"

namespace hyperscene {

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

HashingEmbedder::HashingEmbedder(int dim) : dim_(dim) {
  if (dim <= 0) throw std::invalid_argument("embedding dimension must be positive");
}

Vector HashingEmbedder::accumulate(std::string_view text) const {
  Vector v = Vector::Zero(dim_);
  for (const auto& tok : whitespace_tokens(text)) {
    const std::uint64_t h = fnv1a64(tok);
    const auto index = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
    v[index] += (mix64(h) >> 63) ? -1.0 : 1.0;
  }
  return v;
}

Matrix HashingEmbedder::embed(std::span<const std::string> texts) const {
  Matrix out(static_cast<Eigen::Index>(texts.size()), dim_);
  for (std::size_t r = 0; r < texts.size(); ++r) {
    Vector v = accumulate(texts[r]);
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
    out.row(static_cast<Eigen::Index>(r)) = v.transpose();
  }
  return out;
}

}  // namespace hyperscene
