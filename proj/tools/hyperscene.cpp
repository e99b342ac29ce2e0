// hyperscene: scene detections -> hypergraph -> trained views -> planner knowledge, plus plan metrics.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hyperscene/annotator.hpp"
#include "hyperscene/enrich.hpp"
#include "hyperscene/errors.hpp"
#include "hyperscene/hypergraph.hpp"
#include "hyperscene/knowledge.hpp"
#include "hyperscene/plan.hpp"
#include "hyperscene/scene.hpp"
#include "hyperscene/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hyperscene;

namespace {

enum Exit { kOk = 0, kValidation = 2, kIo = 3, kNumeric = 4 };

constexpr const char* kEndpointEnv = "HYPERSCENE_ANNOTATOR_ENDPOINT";

// Values given on the command line. Unset members fall through to the config
// file, then to the profile.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::string> profile;

  std::optional<double> epsilon;
  std::optional<int> min_pts;
  std::optional<double> relative_epsilon;

  std::optional<std::string> annotator_mode;
  std::optional<std::string> endpoint;
  std::optional<std::string> transcript;
  std::optional<double> timeout;

  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<double> lr;
  std::optional<int> d;
  std::optional<int> d_p;
  std::optional<double> tau_n, tau_g, tau_m;
  std::optional<double> alpha_g, alpha_m;
  std::optional<double> mask_text, mask_incidence;
  bool normalize_by_memberships = false;
};

struct AnnotatorSettings {
  std::string mode = "fallback";  // fallback | replay | remote
  std::string endpoint;
  std::string transcript;
  double timeout = 10.0;
};

struct RunConfig {
  std::string profile = "desk";
  ClusteringConfig clustering;
  TriViewConfig triview;
  AnnotatorSettings annotator;
};

template <typename T>
void take(const json& section, const char* key, T& target) {
  auto it = section.find(key);
  if (it == section.end() || it->is_null()) return;
  try {
    target = it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config: bad value for '") + key + "'");
  }
}

template <typename T>
void take(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

RunConfig resolve_config(const Overrides& o) {
  json file = json::object();
  if (o.config_path) {
    const std::string bytes = read_file(*o.config_path);
    try {
      file = json::parse(bytes);
    } catch (const json::parse_error& e) {
      throw ParseError("config " + *o.config_path + ": parse error at byte " + std::to_string(e.byte), e.byte);
    }
    if (!file.is_object()) throw ValidationError("config must be a JSON object");
  }

  RunConfig rc;
  take(file, "profile", rc.profile);
  take(o.profile, rc.profile);
  if (rc.profile == "desk") {
    rc.triview = TriViewConfig::desk();
  } else if (rc.profile == "paper") {
    rc.triview = TriViewConfig::paper();
  } else {
    throw ValidationError("unknown profile " + rc.profile);
  }

  const json clustering = file.value("clustering", json::object());
  if (clustering.contains("epsilon") && !clustering["epsilon"].is_null()) {
    double eps = 0.0;
    take(clustering, "epsilon", eps);
    rc.clustering.epsilon = eps;
  }
  take(clustering, "min_pts", rc.clustering.min_pts);
  take(clustering, "relative_epsilon", rc.clustering.relative_epsilon);
  if (o.epsilon) rc.clustering.epsilon = *o.epsilon;
  take(o.min_pts, rc.clustering.min_pts);
  take(o.relative_epsilon, rc.clustering.relative_epsilon);
  if (rc.clustering.epsilon) ClusteringParams{*rc.clustering.epsilon, rc.clustering.min_pts}.validate();
  if (rc.clustering.min_pts < 1) throw ValidationError("min_pts must be at least 1");
  if (!(rc.clustering.relative_epsilon > 0.0)) throw ValidationError("relative_epsilon must be positive");

  auto& t = rc.triview;
  const json tv = file.value("triview", json::object());
  take(tv, "seed", t.seed);
  take(tv, "steps", t.steps);
  take(tv, "learning_rate", t.optimizer.learning_rate);
  take(tv, "d", t.d);
  take(tv, "d_p", t.d_p);
  take(tv, "tau_n", t.tau_n);
  take(tv, "tau_g", t.tau_g);
  take(tv, "tau_m", t.tau_m);
  take(tv, "alpha_g", t.alpha_g);
  take(tv, "alpha_m", t.alpha_m);
  take(tv, "mask_prob_text", t.mask_prob_text);
  take(tv, "mask_prob_incidence", t.mask_prob_incidence);
  take(tv, "normalize_by_memberships", t.normalize_by_memberships);
  take(o.seed, t.seed);
  take(o.steps, t.steps);
  take(o.lr, t.optimizer.learning_rate);
  take(o.d, t.d);
  take(o.d_p, t.d_p);
  take(o.tau_n, t.tau_n);
  take(o.tau_g, t.tau_g);
  take(o.tau_m, t.tau_m);
  take(o.alpha_g, t.alpha_g);
  take(o.alpha_m, t.alpha_m);
  take(o.mask_text, t.mask_prob_text);
  take(o.mask_incidence, t.mask_prob_incidence);
  if (o.normalize_by_memberships) t.normalize_by_memberships = true;
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }

  auto& a = rc.annotator;
  const json an = file.value("annotator", json::object());
  take(an, "mode", a.mode);
  take(an, "endpoint", a.endpoint);
  take(an, "transcript", a.transcript);
  take(an, "timeout", a.timeout);
  if (const char* env = std::getenv(kEndpointEnv); env != nullptr && *env != '\0') a.endpoint = env;
  take(o.annotator_mode, a.mode);
  take(o.endpoint, a.endpoint);
  take(o.transcript, a.transcript);
  take(o.timeout, a.timeout);
  if (a.mode != "fallback" && a.mode != "replay" && a.mode != "remote") {
    throw ValidationError("unknown annotator mode " + a.mode);
  }
  if (a.mode == "replay" && a.transcript.empty()) throw ValidationError("replay mode needs --transcript");
  if (a.mode == "remote" && a.endpoint.empty()) {
    throw ValidationError(std::string("remote mode needs --endpoint or ") + kEndpointEnv);
  }
  return rc;
}

AnnotationService make_service(const AnnotatorSettings& a) {
  LexiconAnnotator lexicon = LexiconAnnotator::bundled();
  if (a.mode == "fallback") return AnnotationService(std::move(lexicon));
  std::shared_ptr<Annotator> remote;
  if (!a.endpoint.empty()) {
    remote = std::make_shared<HttpAnnotator>(a.endpoint, a.timeout,
                                             std::make_shared<const TemplateRegistry>(TemplateRegistry::bundled()));
  }
  if (a.mode == "remote" && a.transcript.empty()) return AnnotationService(std::move(lexicon), remote);
  // Replay serves recorded replies; in remote mode the transcript records new ones.
  auto replay = std::make_shared<ReplayAnnotator>(a.transcript, a.mode == "remote" ? remote : nullptr);
  return AnnotationService(std::move(lexicon), replay);
}

void add_config_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config_path, "JSON config with clustering/triview/annotator sections");
  cmd.add_option("--profile", o.profile, "Preset: desk (default) or paper")->check(CLI::IsMember({"desk", "paper"}));
}

void add_clustering_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--epsilon", o.epsilon, "Absolute DBSCAN radius in pixels");
  cmd.add_option("--min-pts", o.min_pts, "DBSCAN core-point threshold (self included)");
  cmd.add_option("--relative-epsilon", o.relative_epsilon, "Radius as a fraction of the larger image side");
}

void add_annotator_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--annotator", o.annotator_mode, "fallback, replay or remote")
      ->check(CLI::IsMember({"fallback", "replay", "remote"}));
  cmd.add_option("--endpoint", o.endpoint, std::string("Annotator base URL (also ") + kEndpointEnv + ")");
  cmd.add_option("--transcript", o.transcript, "Replay transcript (JSON lines)");
  cmd.add_option("--timeout", o.timeout, "Remote annotator timeout in seconds");
}

void add_triview_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--seed", o.seed, "RNG seed");
  cmd.add_option("--steps", o.steps, "Optimizer steps");
  cmd.add_option("--lr", o.lr, "Adam learning rate");
  cmd.add_option("--d", o.d, "Semantic embedding width");
  cmd.add_option("--d-p", o.d_p, "Projection width");
  cmd.add_option("--tau-n", o.tau_n, "Node loss temperature");
  cmd.add_option("--tau-g", o.tau_g, "Area loss temperature");
  cmd.add_option("--tau-m", o.tau_m, "Membership loss temperature");
  cmd.add_option("--alpha-g", o.alpha_g, "Area loss weight");
  cmd.add_option("--alpha-m", o.alpha_m, "Membership loss weight");
  cmd.add_option("--mask-text", o.mask_text, "Token masking probability");
  cmd.add_option("--mask-incidence", o.mask_incidence, "Membership masking probability");
  cmd.add_flag("--normalize-by-memberships", o.normalize_by_memberships,
               "Divide the membership loss by the positive count instead of 2K");
}

std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------

int cmd_build(const std::string& scene_path, const std::string& out, const Overrides& o) {
  const RunConfig rc = resolve_config(o);
  const SceneRecord scene = load_scene(scene_path);
  const SceneHypergraph graph = build_hypergraph(scene, rc.clustering);
  const EnrichedHypergraph enriched = enrich(graph, make_service(rc.annotator));
  write_file(out, serialize_enriched(enriched));
  std::cout << "wrote " << out << ": " << graph.num_nodes() << " nodes, " << graph.num_edges() << " areas\n";
  return kOk;
}

int cmd_train(const std::string& graph_path, const std::string& params_out, const std::string& trace_out,
              const Overrides& o) {
  const RunConfig rc = resolve_config(o);
  const EnrichedHypergraph graph = load_enriched(graph_path);
  const TrainResult result = train(graph, rc.triview);
  write_file(params_out, encode_params(result.params, rc.triview));
  write_file(trace_out, trace_csv(result.trace));
  if (result.trace.empty()) {
    std::cout << "steps=0, parameters left at initialization\n";
  } else {
    const auto& l = result.trace.back().loss;
    std::cout << "step " << result.trace.back().step << ": L_n=" << shortest(l.node) << " L_g=" << shortest(l.area)
              << " L_m=" << shortest(l.membership) << " L=" << shortest(l.total) << "\n";
  }
  return kOk;
}

int cmd_export(const std::string& graph_path, const std::string& template_id, const std::string& xml_out,
               const std::string& prompt_out, const std::optional<std::string>& templates_dir, double threshold,
               const std::optional<std::string>& task_path) {
  TemplateRegistry templates = TemplateRegistry::bundled();
  if (templates_dir) templates.load_directory(*templates_dir);
  if (!templates.contains(template_id)) throw ValidationError("unknown template id " + template_id);

  const EnrichedHypergraph graph = load_enriched(graph_path);
  TaskSpec task = graph.base.task().value_or(TaskSpec{});
  if (task_path) {
    const std::string bytes = read_file(*task_path);
    try {
      task = task_from_json(json::parse(bytes));
    } catch (const json::parse_error& e) {
      throw ParseError("task " + *task_path + ": parse error at byte " + std::to_string(e.byte), e.byte);
    }
  }
  const HypergraphKnowledge knowledge = make_knowledge(graph, threshold);
  const AssembledPrompt prompt = assemble_prompt(task, knowledge, template_id, templates);
  write_file(xml_out, knowledge.rendered);
  if (!prompt_out.empty()) write_file(prompt_out, prompt.text);
  std::cout << "wrote " << xml_out << " (" << knowledge.areas.size() << " areas, " << knowledge.flags.size()
            << " flagged)\n";
  return kOk;
}

std::set<std::string> sample_ids(const fs::path& dir) {
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) throw IoError("cannot list " + dir.string());
  std::set<std::string> ids;
  for (const auto& entry : it) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") ids.insert(entry.path().stem().string());
  }
  return ids;
}

void require_same(const std::set<std::string>& a, const std::set<std::string>& b, const char* a_name,
                  const char* b_name) {
  for (const auto& id : a) {
    if (!b.count(id)) throw ValidationError(std::string("sample ") + id + " has a " + a_name + " file but no " + b_name);
  }
  for (const auto& id : b) {
    if (!a.count(id)) throw ValidationError(std::string("sample ") + id + " has a " + b_name + " file but no " + a_name);
  }
}

int cmd_eval(const fs::path& plans, const fs::path& envs, const fs::path& golds, const std::string& out, int workers) {
  const auto plan_ids = sample_ids(plans);
  require_same(plan_ids, sample_ids(golds), "plan", "gold");
  require_same(plan_ids, sample_ids(envs), "plan", "environment");
  const std::vector<std::string> ids(plan_ids.begin(), plan_ids.end());

  std::vector<MetricReport> reports(ids.size());
  std::vector<std::string> errors(ids.size());
  std::vector<int> codes(ids.size(), kOk);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < ids.size();) {
      const std::string file = ids[i] + ".json";
      try {
        reports[i] = evaluate_plan(load_plan(plans / file), load_env(envs / file), load_golds(golds / file));
      } catch (const IoError& e) {
        errors[i] = e.what();
        codes[i] = kIo;
      } catch (const std::exception& e) {
        errors[i] = "sample " + ids[i] + ": " + e.what();
        codes[i] = kValidation;
      }
    }
  };
  const int n = std::clamp(workers, 1, std::max<int>(1, static_cast<int>(ids.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (codes[i] != kOk) {
      std::cerr << "error: " << errors[i] << "\n";
      return codes[i];
    }
  }

  std::string csv = "sample,exec,lcs,correct\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    csv += ids[i] + "," + shortest(reports[i].executability) + "," + shortest(reports[i].lcs) + "," +
           (reports[i].correct ? "1" : "0") + "\n";
  }
  if (!ids.empty()) {
    const CorpusSummary s = summarize(reports);
    const auto n_correct = std::count_if(reports.begin(), reports.end(), [](const MetricReport& r) { return r.correct; });
    csv += "mean," + shortest(s.mean_executability) + "," + shortest(s.mean_lcs) + "," +
           shortest(static_cast<double>(n_correct) / static_cast<double>(reports.size())) + "\n";
    std::cout << ids.size() << " samples: exec " << shortest(s.mean_executability) << ", lcs " << shortest(s.mean_lcs)
              << ", correct " << shortest(s.percent_correct) << "%\n";
  } else {
    std::cout << "empty corpus\n";
  }
  write_file(out, csv);
  return kOk;
}

int cmd_grad_check(int trials, double step, double tolerance, const Overrides& o) {
  const RunConfig rc = resolve_config(o);
  const GradCheckReport report = grad_check(rc.triview, trials, step);
  for (const auto& t : report.per_tensor) {
    std::cout << t.name << ": rel " << shortest(t.relative_error) << ", abs " << shortest(t.max_abs_error) << "\n";
  }
  std::cout << "max relative error " << shortest(report.max_relative_error) << " (" << report.worst_tensor << ") over "
            << report.trials << " instances: " << (report.passed(tolerance) ? "ok" : "FAILED") << "\n";
  return report.passed(tolerance) ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene hypergraph construction, tri-view training, knowledge export and plan metrics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hyperscene 0.1.0");

  Overrides o;

  std::string scene_path, graph_out;
  auto* build = app.add_subcommand("build", "Cluster a scene into areas, annotate them and write the hypergraph JSON");
  build->add_option("scene", scene_path, "Scene JSON")->required();
  build->add_option("-o,--output", graph_out, "Hypergraph JSON to write")->required();
  add_config_flags(*build, o);
  add_clustering_flags(*build, o);
  add_annotator_flags(*build, o);

  std::string train_graph, params_out, trace_out;
  auto* trainc = app.add_subcommand("train", "Train projection heads and discriminator on one hypergraph");
  trainc->add_option("graph", train_graph, "Hypergraph JSON from build")->required();
  trainc->add_option("--params", params_out, "Parameter file to write")->required();
  trainc->add_option("--trace", trace_out, "Per-step loss CSV to write")->required();
  add_config_flags(*trainc, o);
  add_triview_flags(*trainc, o);

  std::string export_graph, template_id = "planner_xml", xml_out, prompt_out;
  std::optional<std::string> templates_dir, task_path;
  double threshold = kDefaultFlagThreshold;
  auto* exportc = app.add_subcommand("export", "Write the knowledge XML and the assembled planner prompt");
  exportc->add_option("graph", export_graph, "Hypergraph JSON from build")->required();
  exportc->add_option("--template", template_id, "Prompt template id")->capture_default_str();
  exportc->add_option("--xml", xml_out, "Knowledge XML to write")->required();
  exportc->add_option("--prompt", prompt_out, "Prompt text to write");
  exportc->add_option("--templates-dir", templates_dir, "Extra *.txt templates (file stem is the id)");
  exportc->add_option("--flag-threshold", threshold, "Counterfactual score that flags an object")->capture_default_str();
  exportc->add_option("--task", task_path, "Task JSON {goal, guidance}; defaults to the scene's task");

  std::string plans_dir, envs_dir, golds_dir, report_out;
  int workers = 1;
  auto* evalc = app.add_subcommand("eval", "Score plans for executability, LCS and correctness");
  evalc->add_option("--plans", plans_dir, "Directory of <id>.json plans")->required();
  evalc->add_option("--envs", envs_dir, "Directory of <id>.json environments")->required();
  evalc->add_option("--golds", golds_dir, "Directory of <id>.json gold plans")->required();
  evalc->add_option("-o,--output", report_out, "Report CSV to write")->required();
  evalc->add_option("--workers", workers, "Parallel evaluation threads")->capture_default_str()->check(CLI::PositiveNumber);

  int trials = 50;
  double fd_step = 1e-6, tolerance = 1e-5;
  auto* gradc = app.add_subcommand("grad-check", "Compare analytic gradients with central differences");
  gradc->add_option("--trials", trials, "Random instances")->capture_default_str()->check(CLI::PositiveNumber);
  gradc->add_option("--fd-step", fd_step, "Finite-difference step")->capture_default_str();
  gradc->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();
  add_config_flags(*gradc, o);
  add_triview_flags(*gradc, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*build) return cmd_build(scene_path, graph_out, o);
    if (*trainc) return cmd_train(train_graph, params_out, trace_out, o);
    if (*exportc) return cmd_export(export_graph, template_id, xml_out, prompt_out, templates_dir, threshold, task_path);
    if (*evalc) return cmd_eval(plans_dir, envs_dir, golds_dir, report_out, workers);
    if (*gradc) return cmd_grad_check(trials, fd_step, tolerance, o);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    // ParseError, ValidationError, std::invalid_argument and friends.
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kValidation;
}
