#include "hyperscene/templates.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "bundled.hpp"
#include "hyperscene/scene.hpp"

namespace hyperscene {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// If text[pos] == '{' opens a placeholder, returns its name and sets `end` past the '}'.
std::optional<std::string_view> placeholder_at(std::string_view text, std::size_t pos, std::size_t& end) {
  std::size_t i = pos + 1;
  if (i >= text.size() || !ident_start(text[i])) return std::nullopt;
  while (i < text.size() && ident_char(text[i])) ++i;
  if (i >= text.size() || text[i] != '}') return std::nullopt;
  end = i + 1;
  return text.substr(pos + 1, i - pos - 1);
}

}  // namespace

std::string render_template(std::string_view text, const PlaceholderValues& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
      out += '{';
      i += 2;
      continue;
    }
    if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
      out += '}';
      i += 2;
      continue;
    }
    std::size_t end = 0;
    if (c == '{') {
      if (auto name = placeholder_at(text, i, end)) {
        auto it = values.find(*name);
        if (it == values.end()) throw ValidationError("unresolved placeholder " + std::string(*name));
        out += it->second;
        i = end;
        continue;
      }
    }
    out += c;
    ++i;
  }
  return out;
}

std::vector<std::string> placeholders_in(std::string_view text) {
  std::vector<std::string> names;
  std::size_t i = 0;
  while (i < text.size()) {
    if ((text[i] == '{' || text[i] == '}') && i + 1 < text.size() && text[i + 1] == text[i]) {
      i += 2;
      continue;
    }
    std::size_t end = 0;
    if (text[i] == '{') {
      if (auto name = placeholder_at(text, i, end)) {
        if (std::find(names.begin(), names.end(), *name) == names.end()) names.emplace_back(*name);
        i = end;
        continue;
      }
    }
    ++i;
  }
  return names;
}

TemplateRegistry TemplateRegistry::bundled() {
  TemplateRegistry reg;
  constexpr std::string_view kPrefix = "templates/";
  constexpr std::string_view kSuffix = ".txt";
  for (const auto& [name, body] : detail::bundled_files()) {
    if (name.starts_with(kPrefix) && name.ends_with(kSuffix)) {
      auto id = name.substr(kPrefix.size(), name.size() - kPrefix.size() - kSuffix.size());
      reg.add(std::string(id), std::string(body));
    }
  }
  return reg;
}

void TemplateRegistry::add(std::string id, std::string text) { templates_[std::move(id)] = std::move(text); }

void TemplateRegistry::load_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::directory_iterator it(dir, ec);
  if (ec) throw IoError("cannot list template directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : it) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) add(f.stem().string(), read_file(f));
}

bool TemplateRegistry::contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

const std::string& TemplateRegistry::get(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw ValidationError("unknown template id " + std::string(id));
  return it->second;
}

std::vector<std::string> TemplateRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : templates_) out.push_back(id);
  return out;
}

}  // namespace hyperscene
