#include "hyperscene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "hyperscene/errors.hpp"

namespace hyperscene {

using nlohmann::json;

Point2 bbox_center(const BBox& box) {
  if (!(box.width > 0.0) || !(box.height > 0.0)) {
    throw std::domain_error("bbox extent must be positive");
  }
  return {box.x + box.width / 2.0, box.y + box.height / 2.0};
}

double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.width, b.x + b.width) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.height, b.y + b.height) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

const ImageInfo* SceneRecord::find_image(std::string_view id) const {
  for (const auto& img : images) {
    if (img.id == id) return &img;
  }
  return nullptr;
}

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw ValidationError(msg); }

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) invalid(where + ": missing field '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) invalid(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

double require_number(const json& v, const std::string& where) {
  if (!v.is_number()) invalid(where + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) invalid(where + " must be finite");
  return d;
}

// Image and object ids may be written as numbers or strings in the wild.
std::string id_text(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  invalid(where + " must be a string or integer");
}

ImageInfo parse_image(const json& j, std::size_t index) {
  const std::string where = "image #" + std::to_string(index);
  if (!j.is_object()) invalid(where + ": expected an object");
  ImageInfo img;
  img.id = id_text(require(j, "id", where), where + ": field 'id'");
  const json& w = require(j, "width", where);
  const json& h = require(j, "height", where);
  if (!w.is_number_integer() || !h.is_number_integer()) {
    invalid(where + ": width and height must be integers");
  }
  img.width = w.get<int>();
  img.height = h.get<int>();
  if (img.width <= 0 || img.height <= 0) {
    invalid(where + " (" + img.id + "): width and height must be positive");
  }
  return img;
}

struct RawObject {
  long long file_id;
  ObjectInstance obj;
};

RawObject parse_object(const json& j, std::size_t index, const SceneRecord& scene) {
  if (!j.is_object()) invalid("object #" + std::to_string(index) + ": expected an object");
  const json& idv = require(j, "id", "object #" + std::to_string(index));
  if (!idv.is_number_integer() || idv.get<long long>() < 0) {
    invalid("object #" + std::to_string(index) + ": field 'id' must be a non-negative integer");
  }
  RawObject raw{idv.get<long long>(), {}};
  const std::string where = "object " + std::to_string(raw.file_id);
  ObjectInstance& obj = raw.obj;

  obj.image_id = id_text(require(j, "image_id", where), where + ": field 'image_id'");
  const ImageInfo* img = scene.find_image(obj.image_id);
  if (img == nullptr) invalid(where + ": field 'image_id' refers to undeclared image '" + obj.image_id + "'");

  const json& bb = require(j, "bbox", where);
  if (!bb.is_array() || bb.size() != 4) invalid(where + ": field 'bbox' must be [x, y, w, h]");
  obj.bbox = {require_number(bb[0], where + ": bbox x"), require_number(bb[1], where + ": bbox y"),
              require_number(bb[2], where + ": bbox width"), require_number(bb[3], where + ": bbox height")};
  if (!(obj.bbox.width > 0.0)) invalid(where + ": field 'bbox' width must be positive");
  if (!(obj.bbox.height > 0.0)) invalid(where + ": field 'bbox' height must be positive");
  obj.position = bbox_center(obj.bbox);
  if (obj.position.x < 0.0 || obj.position.x > img->width || obj.position.y < 0.0 ||
      obj.position.y > img->height) {
    invalid(where + ": field 'bbox' center lies outside image '" + img->id + "'");
  }

  obj.category = require_string(j, "category", where);
  if (obj.category.empty()) invalid(where + ": field 'category' must be non-empty");
  if (auto it = j.find("attributes"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) invalid(where + ": field 'attributes' must be a string");
    obj.attributes = it->get<std::string>();
  }
  return raw;
}

}  // namespace

SceneRecord parse_scene(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    std::ostringstream msg;
    msg << "parse error at byte " << e.byte << ": " << e.what();
    throw ParseError(msg.str(), e.byte);
  }
  if (!doc.is_object()) throw ParseError("parse error at byte 0: top-level value must be an object", 0);

  SceneRecord scene;
  scene.scene_id = require_string(doc, "scene_id", "scene");

  if (auto it = doc.find("images"); it != doc.end()) {
    if (!it->is_array()) invalid("scene: field 'images' must be an array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < it->size(); ++i) {
      ImageInfo img = parse_image((*it)[i], i);
      if (!seen.insert(img.id).second) invalid("duplicate image id " + img.id);
      scene.images.push_back(std::move(img));
    }
  }

  std::vector<RawObject> raws;
  if (auto it = doc.find("objects"); it != doc.end()) {
    if (!it->is_array()) invalid("scene: field 'objects' must be an array");
    std::set<std::pair<std::string, long long>> seen;
    for (std::size_t i = 0; i < it->size(); ++i) {
      RawObject raw = parse_object((*it)[i], i, scene);
      if (!seen.insert({raw.obj.image_id, raw.file_id}).second) {
        invalid("duplicate id " + std::to_string(raw.file_id));
      }
      raws.push_back(std::move(raw));
    }
  }

  // Merge near-duplicate detections; the larger box wins, the earlier slot is kept.
  std::vector<ObjectInstance> kept;
  for (auto& raw : raws) {
    bool merged = false;
    for (auto& k : kept) {
      if (k.image_id == raw.obj.image_id && k.category == raw.obj.category &&
          iou(k.bbox, raw.obj.bbox) > kDuplicateIou) {
        if (raw.obj.bbox.area() > k.bbox.area()) k = std::move(raw.obj);
        merged = true;
        break;
      }
    }
    if (!merged) kept.push_back(std::move(raw.obj));
  }
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i].id = static_cast<int>(i);
  scene.objects = std::move(kept);

  if (auto it = doc.find("task"); it != doc.end() && !it->is_null()) {
    scene.task = task_from_json(*it);
  }
  return scene;
}

SceneRecord load_scene(const std::filesystem::path& path) { return parse_scene(read_file(path)); }

json task_to_json(const TaskSpec& task) {
  return json{{"goal", task.goal}, {"guidance", task.guidance}};
}

TaskSpec task_from_json(const json& j) {
  if (!j.is_object()) invalid("task: expected an object");
  TaskSpec task;
  if (auto it = j.find("goal"); it != j.end()) {
    if (!it->is_string()) invalid("task: field 'goal' must be a string");
    task.goal = it->get<std::string>();
  }
  if (auto it = j.find("guidance"); it != j.end()) {
    if (!it->is_array()) invalid("task: field 'guidance' must be an array");
    for (const auto& g : *it) {
      if (!g.is_string()) invalid("task: guidance entries must be strings");
      task.guidance.push_back(g.get<std::string>());
    }
  }
  return task;
}

json scene_to_json(const SceneRecord& scene) {
  json images = json::array();
  for (const auto& img : scene.images) {
    images.push_back({{"id", img.id}, {"width", img.width}, {"height", img.height}});
  }
  json objects = json::array();
  for (const auto& o : scene.objects) {
    objects.push_back({{"id", o.id},
                       {"image_id", o.image_id},
                       {"bbox", {o.bbox.x, o.bbox.y, o.bbox.width, o.bbox.height}},
                       {"category", o.category},
                       {"attributes", o.attributes}});
  }
  json doc{{"scene_id", scene.scene_id}, {"images", std::move(images)}, {"objects", std::move(objects)}};
  if (scene.task) doc["task"] = task_to_json(*scene.task);
  return doc;
}

std::string serialize_scene(const SceneRecord& scene) { return scene_to_json(scene).dump(2) + "\n"; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace hyperscene
