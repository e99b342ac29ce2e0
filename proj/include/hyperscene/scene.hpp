#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace hyperscene {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

/// Axis-aligned box in pixels: top-left corner plus extent.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;

  double area() const { return width * height; }
  bool operator==(const BBox&) const = default;
};

/// Center of a box. Throws std::domain_error when width or height is not positive.
Point2 bbox_center(const BBox& box);

/// Intersection over union of two boxes, 0 when they do not overlap.
double iou(const BBox& a, const BBox& b);

struct ObjectInstance {
  int id = 0;
  Point2 position;
  BBox bbox;
  std::string category;
  std::string attributes;
  std::string image_id;

  bool operator==(const ObjectInstance&) const = default;
};

struct ImageInfo {
  std::string id;
  int width = 0;
  int height = 0;

  bool operator==(const ImageInfo&) const = default;
};

struct TaskSpec {
  std::string goal;
  std::vector<std::string> guidance;

  bool operator==(const TaskSpec&) const = default;
};

struct SceneRecord {
  std::string scene_id;
  std::vector<ImageInfo> images;
  std::vector<ObjectInstance> objects;
  std::optional<TaskSpec> task;

  const ImageInfo* find_image(std::string_view id) const;
  bool operator==(const SceneRecord&) const = default;
};

/// IoU above which two same-category boxes in one image count as one detection.
inline constexpr double kDuplicateIou = 0.9;

/// Parses and validates a detection document held in memory.
///
/// Object ids must be unique within each image. Near-duplicate detections are
/// merged (the larger box survives in the slot of the first occurrence), then
/// ids are renumbered 0..N-1 in file order.
///
/// Throws ParseError for malformed JSON or wrong field types and
/// ValidationError for invariant violations.
SceneRecord parse_scene(std::string_view bytes);

/// Reads `path` and forwards to parse_scene. Throws IoError if unreadable.
SceneRecord load_scene(const std::filesystem::path& path);

nlohmann::json scene_to_json(const SceneRecord& scene);
std::string serialize_scene(const SceneRecord& scene);

nlohmann::json task_to_json(const TaskSpec& task);
TaskSpec task_from_json(const nlohmann::json& j);

/// Whole-file read helper shared by the loaders. Throws IoError.
std::string read_file(const std::filesystem::path& path);
/// Writes `contents` verbatim (binary mode, no newline translation). Throws IoError.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace hyperscene
