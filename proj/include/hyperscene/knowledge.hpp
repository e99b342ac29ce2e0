#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hyperscene/enrich.hpp"
#include "hyperscene/templates.hpp"

namespace hyperscene {

inline constexpr double kDefaultFlagThreshold = 0.5;

struct KnowledgeObject {
  int id = 0;
  std::string category;
  double cf_score = 0.0;
};

struct KnowledgeArea {
  int id = 0;
  std::string label;
  std::vector<KnowledgeObject> members;
};

/// The exported view of an enriched hypergraph.
struct HypergraphKnowledge {
  std::string scene_id;
  std::vector<KnowledgeArea> areas;
  std::vector<int> flags;  // node ids with cf_score >= threshold
  std::string rendered;    // canonical XML
};

/// `cf_score` formatting: two decimals, ties to even on the exact binary value.
std::string format_score(double value);

/// Escapes &, <, >, " and ' for attribute values.
std::string xml_escape(std::string_view text);

/// Canonical XML: <scene id> holding <area id label> holding
/// <object id category cf_score/>, areas and objects ordered by id,
/// two-space indentation, LF line endings, trailing newline.
std::string export_xml(const EnrichedHypergraph& graph);

HypergraphKnowledge make_knowledge(const EnrichedHypergraph& graph, double flag_threshold = kDefaultFlagThreshold);

/// Recovers area membership from exported XML (area id -> object ids).
/// Only understands the canonical form. Throws ParseError.
std::vector<std::pair<int, std::vector<int>>> parse_knowledge_xml(std::string_view xml);

/// Plain-language paraphrase of the knowledge, one sentence per area.
std::string describe_knowledge(const HypergraphKnowledge& knowledge);

struct PromptSection {
  std::string name;
  std::string text;
};

struct AssembledPrompt {
  std::vector<PromptSection> sections;  // goal, guidance, knowledge, instructions
  std::string text;                     // the rendered template

  /// Length of `text` in Unicode code points.
  std::size_t length() const;
};

inline constexpr std::string_view kAnswerInstructions =
    "Answer with one action per line using the verbs GOTO, PICKUP, PLACE, OPEN, CLOSE, TOGGLE_ON, TOGGLE_OFF, "
    "SLICE, CLEAN, HEAT followed by their object arguments.";

/// Renders `template_id` with the placeholders goal, guidance, knowledge
/// (XML), knowledge_text (paraphrase), flags, scene_id and instructions.
/// Throws ValidationError for an unknown template or unresolved placeholder.
AssembledPrompt assemble_prompt(const TaskSpec& task, const HypergraphKnowledge& knowledge,
                                std::string_view template_id, const TemplateRegistry& templates);

}  // namespace hyperscene
