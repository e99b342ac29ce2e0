#include "hyperscene/knowledge.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

#include "hyperscene/errors.hpp"

namespace hyperscene {

std::string format_score(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, 2);
  if (res.ec != std::errc()) throw std::runtime_error("score formatting failed");
  return std::string(buf, res.ptr);
}

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string export_xml(const EnrichedHypergraph& graph) {
  const auto& base = graph.base;
  std::string out = "<scene id=\"" + xml_escape(base.scene_id()) + "\"";
  if (base.hyperedges().empty()) return out + "/>\n";
  out += ">\n";
  for (const auto& edge : base.hyperedges()) {
    out += "  <area id=\"" + std::to_string(edge.id) + "\" label=\"" + xml_escape(graph.area_labels[edge.id]) + "\">\n";
    for (int m : edge.members) {
      const auto& node = base.nodes()[m];
      out += "    <object id=\"" + std::to_string(node.id) + "\" category=\"" + xml_escape(node.category) +
             "\" cf_score=\"" + format_score(graph.cf_scores[m]) + "\"/>\n";
    }
    out += "  </area>\n";
  }
  out += "</scene>\n";
  return out;
}

HypergraphKnowledge make_knowledge(const EnrichedHypergraph& graph, double flag_threshold) {
  HypergraphKnowledge k;
  k.scene_id = graph.base.scene_id();
  for (const auto& edge : graph.base.hyperedges()) {
    KnowledgeArea area{edge.id, graph.area_labels[edge.id], {}};
    for (int m : edge.members) area.members.push_back({m, graph.base.nodes()[m].category, graph.cf_scores[m]});
    k.areas.push_back(std::move(area));
  }
  for (int i = 0; i < graph.base.num_nodes(); ++i) {
    if (graph.cf_scores[i] >= flag_threshold) k.flags.push_back(i);
  }
  k.rendered = export_xml(graph);
  return k;
}

namespace {

int attribute_int(std::string_view tag, std::string_view name, std::size_t offset) {
  const std::string key = " " + std::string(name) + "=\"";
  const auto at = tag.find(key);
  if (at == std::string_view::npos) throw ParseError("knowledge xml: missing " + std::string(name) + " at byte " + std::to_string(offset), offset);
  const auto begin = at + key.size();
  const auto end = tag.find('"', begin);
  int value = 0;
  auto res = std::from_chars(tag.data() + begin, tag.data() + end, value);
  if (res.ec != std::errc() || res.ptr != tag.data() + end) {
    throw ParseError("knowledge xml: bad " + std::string(name) + " at byte " + std::to_string(offset), offset);
  }
  return value;
}

}  // namespace

std::vector<std::pair<int, std::vector<int>>> parse_knowledge_xml(std::string_view xml) {
  std::vector<std::pair<int, std::vector<int>>> areas;
  bool in_area = false;
  std::size_t pos = 0;
  while ((pos = xml.find('<', pos)) != std::string_view::npos) {
    const auto close = xml.find('>', pos);
    if (close == std::string_view::npos) throw ParseError("knowledge xml: unterminated tag at byte " + std::to_string(pos), pos);
    const std::string_view tag = xml.substr(pos, close - pos + 1);
    if (tag.starts_with("<area ")) {
      areas.emplace_back(attribute_int(tag, "id", pos), std::vector<int>{});
      in_area = true;
    } else if (tag.starts_with("</area")) {
      in_area = false;
    } else if (tag.starts_with("<object ")) {
      if (!in_area) throw ParseError("knowledge xml: object outside area at byte " + std::to_string(pos), pos);
      areas.back().second.push_back(attribute_int(tag, "id", pos));
    }
    pos = close + 1;
  }
  return areas;
}

std::string describe_knowledge(const HypergraphKnowledge& knowledge) {
  std::string out;
  for (const auto& area : knowledge.areas) {
    out += area.label + " (area " + std::to_string(area.id) + ") contains ";
    for (std::size_t i = 0; i < area.members.size(); ++i) {
      if (i) out += i + 1 == area.members.size() ? " and " : ", ";
      out += area.members[i].category + " #" + std::to_string(area.members[i].id);
    }
    out += ".\n";
  }
  for (const auto& area : knowledge.areas) {
    for (const auto& obj : area.members) {
      for (int f : knowledge.flags) {
        if (f == obj.id) {
          out += obj.category + " #" + std::to_string(obj.id) + " looks abnormal (score " + format_score(obj.cf_score) + ").\n";
        }
      }
    }
  }
  return out;
}

std::size_t AssembledPrompt::length() const {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

AssembledPrompt assemble_prompt(const TaskSpec& task, const HypergraphKnowledge& knowledge,
                                std::string_view template_id, const TemplateRegistry& templates) {
  const std::string& body = templates.get(template_id);

  std::string guidance;
  for (std::size_t i = 0; i < task.guidance.size(); ++i) {
    guidance += std::to_string(i + 1) + ". " + task.guidance[i];
    if (i + 1 < task.guidance.size()) guidance += '\n';
  }
  std::string flags;
  for (std::size_t i = 0; i < knowledge.flags.size(); ++i) {
    if (i) flags += ", ";
    flags += std::to_string(knowledge.flags[i]);
  }
  const std::string text_form = describe_knowledge(knowledge);
  const auto used = placeholders_in(body);
  const bool paraphrased = std::find(used.begin(), used.end(), "knowledge") == used.end() &&
                           std::find(used.begin(), used.end(), "knowledge_text") != used.end();

  AssembledPrompt prompt;
  prompt.sections = {{"goal", task.goal},
                     {"guidance", guidance},
                     {"knowledge", paraphrased ? text_form : knowledge.rendered},
                     {"instructions", std::string(kAnswerInstructions)}};
  PlaceholderValues values{{"goal", task.goal},
                           {"guidance", guidance},
                           {"knowledge", knowledge.rendered},
                           {"knowledge_text", text_form},
                           {"flags", flags},
                           {"scene_id", knowledge.scene_id},
                           {"instructions", std::string(kAnswerInstructions)}};
  prompt.text = render_template(body, values);
  return prompt;
}

}  // namespace hyperscene
