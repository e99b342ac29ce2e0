#include <gtest/gtest.h>

#include <filesystem>

#include "hyperscene/errors.hpp"
#include "hyperscene/scene.hpp"

using namespace hyperscene;

namespace {

const std::filesystem::path kFixtures = HYPERSCENE_FIXTURES;

std::string one_object(const std::string& bbox, const std::string& extra = "") {
  return R"({"scene_id": "s", "images": [{"id": "a", "width": 100, "height": 80}],
             "objects": [{"id": 0, "image_id": "a", "bbox": )" +
         bbox + R"(, "category": "cup")" + extra + "}]}";
}

}  // namespace

TEST(BboxCenter, Examples) {
  EXPECT_EQ(bbox_center({0, 0, 2, 2}), (Point2{1, 1}));
  EXPECT_EQ(bbox_center({3, 4, 5, 6}), (Point2{5.5, 7}));
  EXPECT_THROW(bbox_center({10, 20, 0, 5}), std::domain_error);
  EXPECT_THROW(bbox_center({10, 20, 5, -1}), std::domain_error);
}

TEST(Iou, DisjointIdenticalAndPartial) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {5, 5, 2, 2}), 0.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {0, 0, 2, 2}), 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {1, 0, 2, 2}), 2.0 / 6.0);
}

TEST(LoadScene, EmptyScene) {
  const SceneRecord s = load_scene(kFixtures / "scenes" / "empty.json");
  EXPECT_EQ(s.scene_id, "empty");
  EXPECT_TRUE(s.objects.empty());
}

TEST(LoadScene, DuplicateIdNamesTheId) {
  try {
    load_scene(kFixtures / "scenes" / "duplicate_id.json");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "duplicate id 3");
  }
}

TEST(LoadScene, KitchenSmallCenters) {
  const SceneRecord s = load_scene(kFixtures / "scenes" / "kitchen_small.json");
  ASSERT_EQ(s.objects.size(), 6u);
  // centers worked out by hand from the fixture boxes
  const Point2 expected[] = {{90, 240}, {90, 200}, {150, 170}, {480, 340}, {480, 400}, {595, 300}};
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(s.objects[i].id, i);
    EXPECT_EQ(s.objects[i].position, expected[i]) << "object " << i;
    EXPECT_EQ(s.objects[i].position, bbox_center(s.objects[i].bbox));
  }
  ASSERT_TRUE(s.task);
  EXPECT_EQ(s.task->guidance.size(), 2u);
}

TEST(LoadScene, PureFunctionOfBytes) {
  const std::string bytes = read_file(kFixtures / "scenes" / "kitchen_small.json");
  EXPECT_EQ(parse_scene(bytes), parse_scene(bytes));
  EXPECT_EQ(parse_scene(serialize_scene(parse_scene(bytes))), parse_scene(bytes));
}

TEST(LoadScene, MissingFileIsIoError) {
  EXPECT_THROW(load_scene(kFixtures / "scenes" / "does_not_exist.json"), IoError);
}

TEST(ParseScene, MalformedReportsByteOffset) {
  try {
    parse_scene(R"({"scene_id": "x", "objects": [}")");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GT(e.byte_offset(), 25u);
    EXPECT_NE(std::string(e.what()).find("byte " + std::to_string(e.byte_offset())), std::string::npos);
  }
}

TEST(ParseScene, ValidationNamesObjectAndField) {
  try {
    parse_scene(one_object("[10, 10, 0, 4]"));
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("object 0"), std::string::npos);
    EXPECT_NE(msg.find("bbox"), std::string::npos);
  }
  EXPECT_THROW(parse_scene(one_object("[200, 10, 4, 4]")), ValidationError);  // center outside image
  EXPECT_THROW(parse_scene(one_object("[1, 1, 4, 4]", R"(, "image_id": "nope")")), std::exception);
  EXPECT_THROW(parse_scene(R"({"scene_id": "s", "objects": [{"id": 0, "image_id": "zz", "bbox": [0,0,1,1], "category": "c"}]})"),
               ValidationError);
  EXPECT_THROW(parse_scene(R"({"scene_id": 4})"), std::exception);
}

TEST(ParseScene, NearDuplicatesMergeKeepingLargerBox) {
  const SceneRecord s = parse_scene(R"({"scene_id": "s", "images": [{"id": "a", "width": 100, "height": 100}],
    "objects": [
      {"id": 7, "image_id": "a", "bbox": [10, 10, 20, 20], "category": "cup"},
      {"id": 8, "image_id": "a", "bbox": [50, 50, 10, 10], "category": "plate"},
      {"id": 9, "image_id": "a", "bbox": [10, 10, 20, 21], "category": "cup"}
    ]})");
  ASSERT_EQ(s.objects.size(), 2u);
  EXPECT_EQ(s.objects[0].category, "cup");
  EXPECT_DOUBLE_EQ(s.objects[0].bbox.height, 21.0);
  EXPECT_EQ(s.objects[0].id, 0);
  EXPECT_EQ(s.objects[1].id, 1);
}

TEST(ParseScene, SameIdInDifferentImagesIsFine) {
  const SceneRecord s = parse_scene(R"({"scene_id": "s",
    "images": [{"id": "a", "width": 100, "height": 100}, {"id": "b", "width": 100, "height": 100}],
    "objects": [
      {"id": 1, "image_id": "a", "bbox": [10, 10, 20, 20], "category": "cup"},
      {"id": 1, "image_id": "b", "bbox": [10, 10, 20, 20], "category": "cup"}
    ]})");
  EXPECT_EQ(s.objects.size(), 2u);
}
