#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace hyperscene {

enum class Verb { Goto, Pickup, Place, Open, Close, ToggleOn, ToggleOff, Slice, Clean, Heat };

std::string_view to_string(Verb verb);
/// Case-insensitive. Throws ValidationError for unknown verbs.
Verb verb_from_string(std::string_view name);
/// PLACE takes (object, receptacle); every other verb takes one argument.
int arity(Verb verb);

struct Action {
  Verb verb = Verb::Goto;
  std::vector<std::string> args;  // lowercase identifiers

  bool operator==(const Action&) const = default;
};

/// Lowercases arguments and checks arity. Throws ValidationError.
Action make_action(Verb verb, std::vector<std::string> args);

/// Symbolic object state. `location` is the id of the place the object rests
/// at (a declared location or a receptacle object). Receptacles are their own
/// place; everything else is at its `location`.
struct ObjectState {
  std::string location;
  bool holdable = false;
  bool openable = false;
  bool is_open = false;
  bool toggleable = false;
  bool is_on = false;
  bool held = false;
  bool surface = false;  // can receive PLACE
  bool sliceable = false;
  bool sliced = false;
  bool slicer = false;   // holding it enables SLICE
  bool dirty = false;
  bool cleaner = false;  // CLEAN works next to it
  bool heater = false;   // HEAT works next to it
  bool hot = false;

  bool operator==(const ObjectState&) const = default;
};

struct AgentState {
  std::string location;
  std::optional<std::string> holding;

  bool operator==(const AgentState&) const = default;
};

/// Goal predicates: on(x, y), open(x), closed(x), toggled_on(x),
/// toggled_off(x), holding(x), sliced(x), clean(x), hot(x), agent_at(loc).
struct Predicate {
  std::string name;
  std::vector<std::string> args;

  bool operator==(const Predicate&) const = default;
};

struct SymbolicEnv {
  std::map<std::string, ObjectState> objects;
  std::vector<std::string> locations;
  AgentState agent;
  std::vector<Predicate> goal;

  /// Where an object can be interacted with.
  std::optional<std::string> place_of(std::string_view id) const;
  bool is_location(std::string_view id) const;
  bool operator==(const SymbolicEnv&) const = default;
};

/// Applies one action if its preconditions hold. Returns false (and leaves
/// `env` untouched) otherwise. Unknown ids fail the action.
///
///   GOTO x        x is a location or object; agent moves to place(x)
///   PICKUP x      holdable, not held, hand empty, agent at x's location,
///                 enclosing receptacle (if openable) open
///   PLACE x y     holding x, y a surface, agent at y, y open if openable
///   OPEN/CLOSE x  openable, currently closed/open, agent at place(x)
///   TOGGLE_ON/OFF toggleable, currently off/on, agent at place(x)
///   SLICE x       sliceable, not sliced, agent at place(x), holding a slicer
///   CLEAN x       holding x, x dirty, a cleaner at the agent's location
///   HEAT x        holding x, a heater at the agent's location
/// Cleaners and heaters that are toggleable must be switched on.
bool apply_action(SymbolicEnv& env, const Action& action);

struct Execution {
  SymbolicEnv final_env;
  std::size_t executed = 0;  // length of the successful prefix
};

/// Runs the plan until the first failing action.
Execution execute(const SymbolicEnv& env, std::span<const Action> plan);

/// Executed prefix over plan length; 0 for an empty plan.
double executability(std::span<const Action> plan, const SymbolicEnv& env);

/// Longest-common-subsequence length by dynamic programming.
std::size_t lcs_length(std::span<const Action> a, std::span<const Action> b);

/// LCS / max(len(gen), len(gold)); 1 when both are empty.
double lcs_score(std::span<const Action> gen, std::span<const Action> gold);
/// Best score over several references; 0 when there are none.
double lcs_score(std::span<const Action> gen, std::span<const std::vector<Action>> golds);

bool holds(const SymbolicEnv& env, const Predicate& predicate);
/// True iff every predicate holds. Predicates over unknown objects are false.
bool correctness(const SymbolicEnv& final_env, std::span<const Predicate> goal);

struct MetricReport {
  double executability = 0.0;
  double lcs = 0.0;
  bool correct = false;
};

MetricReport evaluate_plan(std::span<const Action> plan, const SymbolicEnv& env,
                           std::span<const std::vector<Action>> golds);

struct CorpusSummary {
  std::size_t samples = 0;
  double mean_executability = 0.0;
  double mean_lcs = 0.0;
  double percent_correct = 0.0;
};

CorpusSummary summarize(std::span<const MetricReport> reports);

// File formats.

/// `{"plan": [{"verb": ..., "args": [...]}]}`.
std::vector<Action> plan_from_json(const nlohmann::json& doc);
nlohmann::json plan_to_json(std::span<const Action> plan);
/// Gold file: `{"plan": [...]}` or `{"plans": [[...], ...]}`.
std::vector<std::vector<Action>> golds_from_json(const nlohmann::json& doc);
/// `{"objects": [{id, location, flags...}], "locations": [...],
///   "agent": {location, holding}, "goal": [{pred, args}]}`.
SymbolicEnv env_from_json(const nlohmann::json& doc);

/// Readers over files; throw IoError / ParseError / ValidationError.
std::vector<Action> load_plan(const std::filesystem::path& path);
std::vector<std::vector<Action>> load_golds(const std::filesystem::path& path);
SymbolicEnv load_env(const std::filesystem::path& path);

}  // namespace hyperscene
