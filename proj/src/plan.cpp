#include "hyperscene/plan.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "hyperscene/errors.hpp"
#include "hyperscene/scene.hpp"

namespace hyperscene {

using nlohmann::json;

namespace {

struct VerbInfo {
  Verb verb;
  std::string_view name;
  int arity;
};

constexpr VerbInfo kVerbs[] = {
    {Verb::Goto, "GOTO", 1},           {Verb::Pickup, "PICKUP", 1},         {Verb::Place, "PLACE", 2},
    {Verb::Open, "OPEN", 1},           {Verb::Close, "CLOSE", 1},           {Verb::ToggleOn, "TOGGLE_ON", 1},
    {Verb::ToggleOff, "TOGGLE_OFF", 1}, {Verb::Slice, "SLICE", 1},           {Verb::Clean, "CLEAN", 1},
    {Verb::Heat, "HEAT", 1},
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

const VerbInfo& info(Verb v) {
  for (const auto& i : kVerbs) {
    if (i.verb == v) return i;
  }
  return kVerbs[0];
}

}  // namespace

std::string_view to_string(Verb verb) { return info(verb).name; }

Verb verb_from_string(std::string_view name) {
  const std::string u = upper(name);
  for (const auto& i : kVerbs) {
    if (i.name == u) return i.verb;
  }
  throw ValidationError("unknown verb " + std::string(name));
}

int arity(Verb verb) { return info(verb).arity; }

Action make_action(Verb verb, std::vector<std::string> args) {
  if (static_cast<int>(args.size()) != arity(verb)) {
    throw ValidationError(std::string(to_string(verb)) + " takes " + std::to_string(arity(verb)) + " argument(s), got " +
                          std::to_string(args.size()));
  }
  for (auto& a : args) a = lower(a);
  return {verb, std::move(args)};
}

// ---------------------------------------------------------------------------
// Environment

bool SymbolicEnv::is_location(std::string_view id) const {
  return std::find(locations.begin(), locations.end(), id) != locations.end();
}

std::optional<std::string> SymbolicEnv::place_of(std::string_view id) const {
  auto it = objects.find(std::string(id));
  if (it == objects.end()) {
    if (is_location(id)) return std::string(id);
    return std::nullopt;
  }
  if (it->second.surface) return it->first;
  return it->second.location;
}

namespace {

ObjectState* find(SymbolicEnv& env, const std::string& id) {
  auto it = env.objects.find(id);
  return it == env.objects.end() ? nullptr : &it->second;
}

bool agent_at_place_of(const SymbolicEnv& env, const std::string& id) {
  auto p = env.place_of(id);
  return p && *p == env.agent.location;
}

// A device at the agent's location with `flag` set (and switched on if it can be).
template <typename Flag>
bool device_here(const SymbolicEnv& env, Flag flag) {
  for (const auto& [id, obj] : env.objects) {
    if (obj.*flag && (!obj.toggleable || obj.is_on) && agent_at_place_of(env, id)) return true;
  }
  return false;
}

bool enclosure_open(const SymbolicEnv& env, const ObjectState& obj) {
  auto it = env.objects.find(obj.location);
  if (it == env.objects.end()) return true;
  return !it->second.openable || it->second.is_open;
}

bool holding(const SymbolicEnv& env, const std::string& id) { return env.agent.holding && *env.agent.holding == id; }

}  // namespace

bool apply_action(SymbolicEnv& env, const Action& action) {
  if (static_cast<int>(action.args.size()) != arity(action.verb)) return false;
  const std::string& x = action.args[0];

  if (action.verb == Verb::Goto) {
    auto p = env.place_of(x);
    if (!p) return false;
    env.agent.location = *p;
    if (env.agent.holding) env.objects[*env.agent.holding].location = *p;
    return true;
  }

  ObjectState* obj = find(env, x);
  if (obj == nullptr) return false;

  switch (action.verb) {
    case Verb::Pickup:
      if (!obj->holdable || obj->held || env.agent.holding) return false;
      if (obj->location != env.agent.location || !enclosure_open(env, *obj)) return false;
      obj->held = true;
      env.agent.holding = x;
      return true;

    case Verb::Place: {
      const std::string& y = action.args[1];
      ObjectState* target = find(env, y);
      if (target == nullptr || x == y || !holding(env, x) || !target->surface) return false;
      if (!agent_at_place_of(env, y) || (target->openable && !target->is_open)) return false;
      obj->location = y;
      obj->held = false;
      env.agent.holding.reset();
      return true;
    }

    case Verb::Open:
    case Verb::Close: {
      const bool want_open = action.verb == Verb::Open;
      if (!obj->openable || obj->is_open == want_open || !agent_at_place_of(env, x)) return false;
      obj->is_open = want_open;
      return true;
    }

    case Verb::ToggleOn:
    case Verb::ToggleOff: {
      const bool want_on = action.verb == Verb::ToggleOn;
      if (!obj->toggleable || obj->is_on == want_on || !agent_at_place_of(env, x)) return false;
      obj->is_on = want_on;
      return true;
    }

    case Verb::Slice: {
      if (!obj->sliceable || obj->sliced || !agent_at_place_of(env, x)) return false;
      if (!env.agent.holding) return false;
      const ObjectState* tool = find(env, *env.agent.holding);
      if (tool == nullptr || !tool->slicer) return false;
      obj->sliced = true;
      return true;
    }

    case Verb::Clean:
      if (!holding(env, x) || !obj->dirty || !device_here(env, &ObjectState::cleaner)) return false;
      obj->dirty = false;
      return true;

    case Verb::Heat:
      if (!holding(env, x) || !device_here(env, &ObjectState::heater)) return false;
      obj->hot = true;
      return true;

    case Verb::Goto:
      break;
  }
  return false;
}

Execution execute(const SymbolicEnv& env, std::span<const Action> plan) {
  Execution out{env, 0};
  for (const auto& a : plan) {
    if (!apply_action(out.final_env, a)) break;
    ++out.executed;
  }
  return out;
}

double executability(std::span<const Action> plan, const SymbolicEnv& env) {
  if (plan.empty()) return 0.0;
  return static_cast<double>(execute(env, plan).executed) / static_cast<double>(plan.size());
}

std::size_t lcs_length(std::span<const Action> a, std::span<const Action> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double lcs_score(std::span<const Action> gen, std::span<const Action> gold) {
  const std::size_t longest = std::max(gen.size(), gold.size());
  if (longest == 0) return 1.0;
  return static_cast<double>(lcs_length(gen, gold)) / static_cast<double>(longest);
}

double lcs_score(std::span<const Action> gen, std::span<const std::vector<Action>> golds) {
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, lcs_score(gen, g));
  return best;
}

bool holds(const SymbolicEnv& env, const Predicate& p) {
  auto obj = [&env](const std::string& id) -> const ObjectState* {
    auto it = env.objects.find(id);
    return it == env.objects.end() ? nullptr : &it->second;
  };
  auto unary = [&](auto test) {
    if (p.args.size() != 1) return false;
    const ObjectState* o = obj(p.args[0]);
    return o != nullptr && test(*o);
  };
  if (p.name == "on") {
    if (p.args.size() != 2) return false;
    const ObjectState* o = obj(p.args[0]);
    return o != nullptr && obj(p.args[1]) != nullptr && !o->held && o->location == p.args[1];
  }
  if (p.name == "open") return unary([](const ObjectState& o) { return o.openable && o.is_open; });
  if (p.name == "closed") return unary([](const ObjectState& o) { return o.openable && !o.is_open; });
  if (p.name == "toggled_on") return unary([](const ObjectState& o) { return o.toggleable && o.is_on; });
  if (p.name == "toggled_off") return unary([](const ObjectState& o) { return o.toggleable && !o.is_on; });
  if (p.name == "holding") return unary([](const ObjectState& o) { return o.held; });
  if (p.name == "sliced") return unary([](const ObjectState& o) { return o.sliced; });
  if (p.name == "clean") return unary([](const ObjectState& o) { return !o.dirty; });
  if (p.name == "hot") return unary([](const ObjectState& o) { return o.hot; });
  if (p.name == "agent_at") {
    return p.args.size() == 1 && env.place_of(p.args[0]) && *env.place_of(p.args[0]) == env.agent.location;
  }
  return false;
}

bool correctness(const SymbolicEnv& final_env, std::span<const Predicate> goal) {
  return std::all_of(goal.begin(), goal.end(), [&](const Predicate& p) { return holds(final_env, p); });
}

MetricReport evaluate_plan(std::span<const Action> plan, const SymbolicEnv& env,
                           std::span<const std::vector<Action>> golds) {
  const Execution run = execute(env, plan);
  MetricReport r;
  r.executability = plan.empty() ? 0.0 : static_cast<double>(run.executed) / static_cast<double>(plan.size());
  r.lcs = lcs_score(plan, golds);
  r.correct = correctness(run.final_env, env.goal);
  return r;
}

CorpusSummary summarize(std::span<const MetricReport> reports) {
  CorpusSummary s;
  s.samples = reports.size();
  if (reports.empty()) return s;
  double e = 0.0, l = 0.0, c = 0.0;
  for (const auto& r : reports) {
    e += r.executability;
    l += r.lcs;
    c += r.correct ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(reports.size());
  s.mean_executability = e / n;
  s.mean_lcs = l / n;
  s.percent_correct = 100.0 * c / n;
  return s;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const std::vector<std::string> kPredicates = {"on",   "open",   "closed", "toggled_on", "toggled_off",
                                              "holding", "sliced", "clean", "hot",        "agent_at"};

Action action_from_json(const json& j, std::size_t index) {
  const std::string where = "action #" + std::to_string(index);
  if (!j.is_object() || !j.contains("verb") || !j["verb"].is_string()) throw ValidationError(where + ": needs a string 'verb'");
  std::vector<std::string> args;
  if (auto it = j.find("args"); it != j.end()) {
    if (!it->is_array()) throw ValidationError(where + ": 'args' must be an array");
    for (const auto& a : *it) {
      if (!a.is_string()) throw ValidationError(where + ": arguments must be strings");
      args.push_back(a.get<std::string>());
    }
  }
  try {
    return make_action(verb_from_string(j["verb"].get<std::string>()), std::move(args));
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

std::vector<Action> action_list(const json& arr) {
  if (!arr.is_array()) throw ValidationError("plan must be an array of actions");
  std::vector<Action> out;
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(action_from_json(arr[i], i));
  return out;
}

json parse_file(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": parse error at byte " + std::to_string(e.byte), e.byte);
  }
}

bool flag(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return false;
  if (!it->is_boolean()) throw ValidationError(std::string("object field '") + key + "' must be boolean");
  return it->get<bool>();
}

}  // namespace

std::vector<Action> plan_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("plan")) throw ValidationError("plan file needs a 'plan' array");
  return action_list(doc["plan"]);
}

json plan_to_json(std::span<const Action> plan) {
  json arr = json::array();
  for (const auto& a : plan) arr.push_back({{"verb", to_string(a.verb)}, {"args", a.args}});
  return json{{"plan", std::move(arr)}};
}

std::vector<std::vector<Action>> golds_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("gold file must be an object");
  std::vector<std::vector<Action>> golds;
  if (auto it = doc.find("plans"); it != doc.end()) {
    if (!it->is_array()) throw ValidationError("gold 'plans' must be an array of plans");
    for (const auto& p : *it) golds.push_back(action_list(p));
  } else if (doc.contains("plan")) {
    golds.push_back(action_list(doc["plan"]));
  } else {
    throw ValidationError("gold file needs 'plan' or 'plans'");
  }
  return golds;
}

SymbolicEnv env_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("environment must be an object");
  SymbolicEnv env;
  if (auto it = doc.find("locations"); it != doc.end()) {
    if (!it->is_array()) throw ValidationError("'locations' must be an array");
    for (const auto& l : *it) {
      if (!l.is_string()) throw ValidationError("locations must be strings");
      env.locations.push_back(lower(l.get<std::string>()));
    }
  }
  if (auto it = doc.find("objects"); it != doc.end()) {
    if (!it->is_array()) throw ValidationError("'objects' must be an array");
    for (const auto& o : *it) {
      if (!o.is_object() || !o.contains("id") || !o["id"].is_string()) throw ValidationError("each object needs a string 'id'");
      const std::string id = lower(o["id"].get<std::string>());
      ObjectState s;
      s.location = lower(o.value("location", std::string{}));
      s.holdable = flag(o, "holdable");
      s.openable = flag(o, "openable");
      s.is_open = flag(o, "open");
      s.toggleable = flag(o, "toggleable");
      s.is_on = flag(o, "on");
      s.surface = flag(o, "surface");
      s.sliceable = flag(o, "sliceable");
      s.sliced = flag(o, "sliced");
      s.slicer = flag(o, "slicer");
      s.dirty = flag(o, "dirty");
      s.cleaner = flag(o, "cleaner");
      s.heater = flag(o, "heater");
      s.hot = flag(o, "hot");
      if (!env.objects.emplace(id, s).second) throw ValidationError("duplicate object id " + id);
    }
  }
  if (auto it = doc.find("agent"); it != doc.end()) {
    if (!it->is_object()) throw ValidationError("'agent' must be an object");
    env.agent.location = lower(it->value("location", std::string{}));
    if (auto h = it->find("holding"); h != it->end() && !h->is_null()) {
      if (!h->is_string()) throw ValidationError("agent 'holding' must be a string or null");
      const std::string id = lower(h->get<std::string>());
      auto obj = env.objects.find(id);
      if (obj == env.objects.end()) throw ValidationError("agent holds unknown object " + id);
      obj->second.held = true;
      obj->second.location = env.agent.location;
      env.agent.holding = id;
    }
  }
  if (auto it = doc.find("goal"); it != doc.end()) {
    if (!it->is_array()) throw ValidationError("'goal' must be an array");
    for (const auto& g : *it) {
      if (!g.is_object() || !g.contains("pred") || !g["pred"].is_string()) throw ValidationError("goal entries need 'pred'");
      Predicate p;
      p.name = lower(g["pred"].get<std::string>());
      if (std::find(kPredicates.begin(), kPredicates.end(), p.name) == kPredicates.end()) {
        throw ValidationError("unknown predicate " + p.name);
      }
      for (const auto& a : g.value("args", json::array())) {
        if (!a.is_string()) throw ValidationError("predicate arguments must be strings");
        p.args.push_back(lower(a.get<std::string>()));
      }
      env.goal.push_back(std::move(p));
    }
  }
  return env;
}

std::vector<Action> load_plan(const std::filesystem::path& path) { return plan_from_json(parse_file(path)); }
std::vector<std::vector<Action>> load_golds(const std::filesystem::path& path) { return golds_from_json(parse_file(path)); }
SymbolicEnv load_env(const std::filesystem::path& path) { return env_from_json(parse_file(path)); }

}  // namespace hyperscene
