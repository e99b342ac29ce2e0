#include "hyperscene/annotator.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "bundled.hpp"
#include "hyperscene/hash.hpp"
#include "hyperscene/scene.hpp"

namespace hyperscene {

using nlohmann::json;

std::string_view to_string(RequestKind kind) {
  return kind == RequestKind::AreaLabel ? "AreaLabel" : "CounterfactualScore";
}

std::string_view to_string(Provenance source) {
  switch (source) {
    case Provenance::Annotator: return "annotator";
    case Provenance::Fallback: return "fallback";
    case Provenance::Cache: return "cache";
  }
  return "fallback";
}

Provenance provenance_from_string(std::string_view name) {
  if (name == "annotator") return Provenance::Annotator;
  if (name == "fallback") return Provenance::Fallback;
  if (name == "cache") return Provenance::Cache;
  throw ValidationError("unknown provenance " + std::string(name));
}

namespace {

json payload_of(const AnnotatorRequest& r) {
  if (r.kind == RequestKind::AreaLabel) return r.categories;
  return r.attributes;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

json parse_json_or_throw(std::string_view text, const std::string& what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": parse error at byte " + std::to_string(e.byte), e.byte);
  }
}

}  // namespace

std::string AnnotatorRequest::wire_body(const TemplateRegistry* templates) const {
  json body{{"kind", to_string(kind)}, {"payload", payload_of(*this)}, {"template_id", template_id}};
  if (templates != nullptr && templates->contains(template_id)) {
    body["prompt"] = render_template(templates->get(template_id),
                                     {{"categories", join(categories, ", ")}, {"attributes", attributes}});
  }
  return body.dump();
}

std::string AnnotatorRequest::cache_key() const {
  std::string canon(to_string(kind));
  canon += '\x1f';
  canon += payload_of(*this).dump();
  canon += '\x1f';
  canon += template_id;
  return to_hex(fnv1a64(canon));
}

std::string AnnotatorReply::to_json() const {
  json j = json::object();
  if (text) j["text"] = *text;
  if (score) j["score"] = *score;
  return j.dump();
}

AnnotatorReply AnnotatorReply::from_json(std::string_view body, RequestKind kind) {
  json j = json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw AnnotatorError("reply is not a JSON object");
  AnnotatorReply reply;
  if (kind == RequestKind::AreaLabel) {
    auto it = j.find("text");
    if (it == j.end() || !it->is_string()) throw AnnotatorError("reply lacks string field 'text'");
    reply.text = it->get<std::string>();
    return reply;
  }
  auto it = j.find("score");
  if (it == j.end()) throw AnnotatorError("reply lacks field 'score'");
  double value = 0.0;
  if (it->is_number()) {
    value = it->get<double>();
  } else if (it->is_string()) {
    const std::string s = trim(it->get<std::string>());
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw AnnotatorError("non-numeric score '" + s + "'");
  } else {
    throw AnnotatorError("non-numeric score");
  }
  if (!std::isfinite(value)) throw AnnotatorError("non-finite score");
  reply.score = value;
  return reply;
}

// ---------------------------------------------------------------------------
// Lexicon

LexiconAnnotator::LexiconAnnotator(std::map<std::string, std::vector<std::string>> areas,
                                   std::map<std::string, double> abnormal) {
  for (auto& [cat, names] : areas) areas_[lower(trim(cat))] = std::move(names);
  for (const auto& [term, score] : abnormal) {
    auto w = words(term);
    if (!w.empty()) terms_.emplace_back(std::move(w), std::clamp(score, 0.0, 1.0));
  }
}

LexiconAnnotator LexiconAnnotator::from_json(std::string_view areas_json, std::string_view abnormal_json) {
  const json a = parse_json_or_throw(areas_json, "area lexicon");
  const json b = parse_json_or_throw(abnormal_json, "abnormality lexicon");
  if (!a.is_object() || !b.is_object()) throw ValidationError("lexicons must be JSON objects");
  std::map<std::string, std::vector<std::string>> areas;
  for (const auto& [cat, v] : a.items()) {
    if (v.is_string()) {
      areas[cat] = {v.get<std::string>()};
    } else if (v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); })) {
      areas[cat] = v.get<std::vector<std::string>>();
    } else {
      throw ValidationError("area lexicon entry '" + cat + "' must be a string or list of strings");
    }
  }
  std::map<std::string, double> abnormal;
  for (const auto& [term, v] : b.items()) {
    if (!v.is_number()) throw ValidationError("abnormality lexicon entry '" + term + "' must be a number");
    abnormal[term] = v.get<double>();
  }
  return LexiconAnnotator(std::move(areas), std::move(abnormal));
}

LexiconAnnotator LexiconAnnotator::bundled() {
  return from_json(detail::bundled_file("lexicons/areas.json"), detail::bundled_file("lexicons/abnormal.json"));
}

LexiconAnnotator LexiconAnnotator::from_files(const std::filesystem::path& areas_json,
                                              const std::filesystem::path& abnormal_json) {
  return from_json(read_file(areas_json), read_file(abnormal_json));
}

std::string LexiconAnnotator::vote_area(std::span<const std::string> categories) const {
  std::map<std::string, int> votes;
  for (const auto& c : categories) {
    auto it = areas_.find(lower(trim(c)));
    if (it == areas_.end()) continue;
    for (const auto& area : it->second) ++votes[area];
  }
  if (votes.empty()) return std::string(kUnknownArea);
  // std::map iterates names in ascending order, so the first maximum wins ties.
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

double LexiconAnnotator::abnormality(std::string_view attributes) const {
  const auto w = words(attributes);
  double best = 0.0;
  for (const auto& [term, score] : terms_) {
    if (term.size() > w.size()) continue;
    for (std::size_t i = 0; i + term.size() <= w.size(); ++i) {
      if (std::equal(term.begin(), term.end(), w.begin() + static_cast<std::ptrdiff_t>(i))) {
        best = std::max(best, score);
        break;
      }
    }
  }
  return best;
}

AnnotatorReply LexiconAnnotator::annotate(const AnnotatorRequest& request) {
  AnnotatorReply reply;
  reply.source = Provenance::Fallback;
  if (request.kind == RequestKind::AreaLabel) {
    reply.text = vote_area(request.categories);
  } else {
    reply.score = abnormality(request.attributes);
  }
  return reply;
}

// ---------------------------------------------------------------------------
// Remote

HttpAnnotator::HttpAnnotator(std::string endpoint, double timeout_seconds,
                             std::shared_ptr<const TemplateRegistry> templates)
    : scheme_host_port_(std::move(endpoint)), timeout_seconds_(timeout_seconds), templates_(std::move(templates)) {
  while (!scheme_host_port_.empty() && scheme_host_port_.back() == '/') scheme_host_port_.pop_back();
}

AnnotatorReply HttpAnnotator::annotate(const AnnotatorRequest& request) {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(timeout_seconds_);
  const auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post("/annotate", request.wire_body(templates_.get()), "application/json");
  if (!res) throw AnnotatorError("annotator transport failure: " + httplib::to_string(res.error()));
  if (res->status != 200) throw AnnotatorError("annotator returned HTTP " + std::to_string(res->status));
  AnnotatorReply reply = AnnotatorReply::from_json(res->body, request.kind);
  reply.source = Provenance::Annotator;
  return reply;
}

// ---------------------------------------------------------------------------
// Record / replay

ReplayAnnotator::ReplayAnnotator(std::filesystem::path transcript, std::shared_ptr<Annotator> upstream)
    : transcript_(std::move(transcript)), upstream_(std::move(upstream)) {
  if (!std::filesystem::exists(transcript_)) {
    if (!upstream_) throw IoError("transcript not found: " + transcript_.string());
    return;
  }
  const std::string contents = read_file(transcript_);
  std::size_t offset = 0;
  while (offset < contents.size()) {
    std::size_t eol = contents.find('\n', offset);
    if (eol == std::string::npos) eol = contents.size();
    const std::string_view line(contents.data() + offset, eol - offset);
    if (!trim(line).empty()) {
      json j = json::parse(line.begin(), line.end(), nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("request_hash") || !j.contains("reply") ||
          !j["request_hash"].is_string() || !j["reply"].is_object()) {
        throw ParseError("transcript " + transcript_.string() + ": bad entry at byte " + std::to_string(offset), offset);
      }
      entries_[j["request_hash"].get<std::string>()] = j["reply"].dump();
    }
    offset = eol + 1;
  }
}

AnnotatorReply ReplayAnnotator::annotate(const AnnotatorRequest& request) {
  const std::string key = request.cache_key();
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) {
      AnnotatorReply reply = AnnotatorReply::from_json(it->second, request.kind);
      reply.source = Provenance::Cache;
      return reply;
    }
  }
  if (!upstream_) throw AnnotatorError("no transcript entry for request " + key);
  AnnotatorReply reply = upstream_->annotate(request);

  std::lock_guard lock(mutex_);
  if (entries_.count(key) == 0) {
    const std::string body = reply.to_json();
    entries_[key] = body;
    std::ofstream out(transcript_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to transcript " + transcript_.string());
    out << json{{"request_hash", key}, {"reply", json::parse(body)}}.dump() << '\n';
  }
  return reply;
}

std::size_t ReplayAnnotator::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Service

AnnotationService::AnnotationService(LexiconAnnotator fallback, std::shared_ptr<Annotator> primary)
    : fallback_(std::make_shared<LexiconAnnotator>(std::move(fallback))), primary_(std::move(primary)) {}

AnnotationService AnnotationService::offline() { return AnnotationService(LexiconAnnotator::bundled()); }

Annotated<std::string> AnnotationService::label_area(std::span<const std::string> categories) const {
  if (categories.empty()) return {std::string(kUnknownArea), Provenance::Fallback};
  if (primary_) {
    AnnotatorRequest req;
    req.kind = RequestKind::AreaLabel;
    req.categories.assign(categories.begin(), categories.end());
    req.template_id = std::string(kAreaTemplateId);
    try {
      AnnotatorReply reply = primary_->annotate(req);
      if (reply.text && !trim(*reply.text).empty()) return {trim(*reply.text), reply.source};
    } catch (const std::exception&) {
      // degrade to the lexicon below
    }
  }
  return {fallback_->vote_area(categories), Provenance::Fallback};
}

Annotated<double> AnnotationService::score_counterfactual(std::string_view attributes) const {
  if (trim(attributes).empty()) return {0.0, Provenance::Fallback};
  if (primary_) {
    AnnotatorRequest req;
    req.kind = RequestKind::CounterfactualScore;
    req.attributes = std::string(attributes);
    req.template_id = std::string(kCounterfactualTemplateId);
    try {
      AnnotatorReply reply = primary_->annotate(req);
      if (reply.score) return {std::clamp(*reply.score, 0.0, 1.0), reply.source};
    } catch (const std::exception&) {
    }
  }
  return {fallback_->abnormality(attributes), Provenance::Fallback};
}

}  // namespace hyperscene
