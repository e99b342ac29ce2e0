#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hyperscene/errors.hpp"

namespace hyperscene {

using PlaceholderValues = std::map<std::string, std::string, std::less<>>;

/// Substitutes `{name}` placeholders. `{{` and `}}` emit literal braces;
/// a brace not followed by an identifier and `}` is copied through.
/// Throws ValidationError("unresolved placeholder <name>") for unknown names.
std::string render_template(std::string_view text, const PlaceholderValues& values);

/// Names referenced by a template, in first-occurrence order.
std::vector<std::string> placeholders_in(std::string_view text);

/// Named text templates. The bundled set ships with the library; a directory
/// of `<id>.txt` files can be layered on top.
class TemplateRegistry {
 public:
  static TemplateRegistry bundled();

  void add(std::string id, std::string text);
  /// Adds every `*.txt` file in `dir` under its stem. Throws IoError.
  void load_directory(const std::filesystem::path& dir);

  bool contains(std::string_view id) const;
  /// Throws ValidationError("unknown template id <id>").
  const std::string& get(std::string_view id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

}  // namespace hyperscene
