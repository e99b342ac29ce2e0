#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hyperscene/templates.hpp"

namespace hyperscene {

enum class RequestKind { AreaLabel, CounterfactualScore };
enum class Provenance { Annotator, Fallback, Cache };

std::string_view to_string(RequestKind kind);
std::string_view to_string(Provenance source);
/// Throws ValidationError for unknown names.
Provenance provenance_from_string(std::string_view name);

inline constexpr std::string_view kUnknownArea = "Unknown Area";
inline constexpr std::string_view kAreaTemplateId = "area_label_v1";
inline constexpr std::string_view kCounterfactualTemplateId = "counterfactual_v1";

struct AnnotatorRequest {
  RequestKind kind = RequestKind::AreaLabel;
  std::vector<std::string> categories;  // AreaLabel payload
  std::string attributes;               // CounterfactualScore payload
  std::string template_id;

  /// `{kind, payload, template_id}` as sent to the remote service.
  std::string wire_body(const TemplateRegistry* templates = nullptr) const;
  /// Hex hash of kind + payload + template id; the replay transcript key.
  std::string cache_key() const;
};

struct AnnotatorReply {
  std::optional<std::string> text;  // AreaLabel
  std::optional<double> score;      // CounterfactualScore
  Provenance source = Provenance::Annotator;

  /// `{"text": ...}` or `{"score": ...}`.
  std::string to_json() const;
  /// Accepts a number or a numeric string for `score`. Throws AnnotatorError.
  static AnnotatorReply from_json(std::string_view body, RequestKind kind);
};

/// Any annotator failure that should trigger the lexicon fallback.
class AnnotatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Implementations must tolerate concurrent calls.
class Annotator {
 public:
  virtual ~Annotator() = default;
  virtual AnnotatorReply annotate(const AnnotatorRequest& request) = 0;
};

/// Rule-based annotator backed by two JSON maps: category -> area names, and
/// abnormality term -> score.
class LexiconAnnotator final : public Annotator {
 public:
  LexiconAnnotator(std::map<std::string, std::vector<std::string>> areas, std::map<std::string, double> abnormal);

  static LexiconAnnotator bundled();
  /// Throws IoError / ParseError / ValidationError.
  static LexiconAnnotator from_files(const std::filesystem::path& areas_json, const std::filesystem::path& abnormal_json);
  static LexiconAnnotator from_json(std::string_view areas_json, std::string_view abnormal_json);

  AnnotatorReply annotate(const AnnotatorRequest& request) override;

  /// Majority vote over lexicon areas; ties go to the lexicographically
  /// smallest name; no hit gives "Unknown Area".
  std::string vote_area(std::span<const std::string> categories) const;
  /// Highest score among matched terms, 0 when nothing matches. Terms match
  /// whole lowercase word sequences.
  double abnormality(std::string_view attributes) const;

 private:
  std::map<std::string, std::vector<std::string>> areas_;
  std::vector<std::pair<std::vector<std::string>, double>> terms_;
};

/// Client for `POST /annotate` on a remote annotation service.
class HttpAnnotator final : public Annotator {
 public:
  /// `endpoint` like "http://127.0.0.1:8080". The optional registry renders the
  /// prompt text that accompanies each request.
  explicit HttpAnnotator(std::string endpoint, double timeout_seconds = 10.0,
                         std::shared_ptr<const TemplateRegistry> templates = nullptr);

  AnnotatorReply annotate(const AnnotatorRequest& request) override;

 private:
  std::string scheme_host_port_;
  double timeout_seconds_;
  std::shared_ptr<const TemplateRegistry> templates_;
};

/// Record/replay cache over a JSON-lines transcript of `{request_hash, reply}`.
///
/// Hits are served with provenance Cache. Misses go to `upstream` when set and
/// the reply is appended to the transcript; without an upstream a miss raises
/// AnnotatorError.
class ReplayAnnotator final : public Annotator {
 public:
  explicit ReplayAnnotator(std::filesystem::path transcript, std::shared_ptr<Annotator> upstream = nullptr);

  AnnotatorReply annotate(const AnnotatorRequest& request) override;
  std::size_t size() const;

 private:
  std::filesystem::path transcript_;
  std::shared_ptr<Annotator> upstream_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::string> entries_;  // key -> reply JSON
};

template <typename T>
struct Annotated {
  T value;
  Provenance source;
};

/// The annotator handle used by enrichment: an optional primary annotator
/// with the lexicon as the degraded path.
class AnnotationService {
 public:
  explicit AnnotationService(LexiconAnnotator fallback, std::shared_ptr<Annotator> primary = nullptr);

  /// Fallback-only service over the bundled lexicons.
  static AnnotationService offline();

  Annotated<std::string> label_area(std::span<const std::string> categories) const;
  /// Scores are clamped to [0, 1]; empty attributes score 0.
  Annotated<double> score_counterfactual(std::string_view attributes) const;

  bool has_primary() const { return primary_ != nullptr; }

 private:
  std::shared_ptr<LexiconAnnotator> fallback_;
  std::shared_ptr<Annotator> primary_;
};

inline std::string label_area(std::span<const std::string> categories, const AnnotationService& annotator) {
  return annotator.label_area(categories).value;
}

inline double score_counterfactual(std::string_view attributes, const AnnotationService& annotator) {
  return annotator.score_counterfactual(attributes).value;
}

}  // namespace hyperscene
