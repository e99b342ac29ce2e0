#pragma once

#include <string_view>
#include <utility>
#include <vector>

namespace hyperscene::detail {

// Files under data/, compiled in at build time (see CMakeLists.txt).
// Keys are paths relative to data/, e.g. "lexicons/areas.json".
const std::vector<std::pair<std::string_view, std::string_view>>& bundled_files();

// Empty view when absent.
std::string_view bundled_file(std::string_view name);

}  // namespace hyperscene::detail
