#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mcmine/benchgen.hpp"
#include "mcmine/evaluator.hpp"
#include "mcmine/gateway.hpp"
#include "mcmine/http_transport.hpp"
#include "mcmine/mcinject.hpp"
#include "mcmine/mcminer.hpp"
#include "mcmine/mock_backend.hpp"
#include "mcmine/registry.hpp"
#include "mcmine/serialization.hpp"
#include "mcmine/service.hpp"

namespace fs = std::filesystem;
using namespace mcmine;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Globals {
  std::string mock_scenario;
  std::string record_scenario;
  std::string prompts;
  std::string config;
  bool verbose = false;
};

// Owns the client stack shared by every subcommand.
class Runtime {
 public:
  explicit Runtime(const Globals& g)
      : registry_(g.config.empty() ? ModelRegistry::from_environment() : ModelRegistry::load(g.config)),
        templates_(g.prompts.empty() ? default_prompt_dir() : fs::path(g.prompts)),
        record_path_(g.record_scenario) {
    if (!g.mock_scenario.empty()) {
      gateway_.set_mock(mock_scenario_load(g.mock_scenario), true);
    } else {
      gateway_.set_hosted(std::make_unique<HostedBackend>(transport_));
    }
    if (!record_path_.empty()) recorder_ = std::make_unique<RecordingClient>(gateway_);
  }

  ~Runtime() {
    if (!recorder_) return;
    try {
      write_file(record_path_, to_json(recorder_->scenario()).dump(2) + "\n");
    } catch (const std::exception& e) {
      spdlog::error("could not write recorded scenario: {}", e.what());
    }
  }

  ChatClient& client() { return recorder_ ? static_cast<ChatClient&>(*recorder_) : gateway_; }
  LlmContext ctx() { return LlmContext{client(), templates_}; }
  const ModelRegistry& registry() const { return registry_; }
  const TemplateLibrary& templates() const { return templates_; }
  bool mock() const { return gateway_.mock_only(); }

  const ModelConfig& model(const std::string& id, bool reasoning = false) const {
    return registry_.resolve(id, reasoning);
  }

 private:
  ModelRegistry registry_;
  TemplateLibrary templates_;
  HttpLibTransport transport_;
  Gateway gateway_;
  std::string record_path_;
  std::unique_ptr<RecordingClient> recorder_;
};

fs::path resolve_relative(const fs::path& base_file, const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) return base_file.parent_path() / path;
  return path;
}

// ---------------------------------------------------------------------------

struct InjectArgs {
  std::string problems, misconceptions, problem_id, misconception_id;
  std::size_t solution_index = 0;
  std::string model = "sonnet-4.5-reasoning", judge_model = "sonnet-4.5-reasoning";
  int max_refinements = 1;
  bool json = false;
};

int run_inject(Runtime& rt, const InjectArgs& a) {
  const auto bank = load_problems(a.problems);
  const auto mcs = load_misconceptions(a.misconceptions);
  const auto p = bank.problems.find(a.problem_id);
  if (p == bank.problems.end()) throw ValidationError("unknown problem id '" + a.problem_id + "'");
  const auto mc = mcs.find(a.misconception_id);
  if (mc == mcs.end()) throw ValidationError("unknown misconception id '" + a.misconception_id + "'");
  const auto s = bank.solutions.find(a.problem_id);
  if (s == bank.solutions.end() || a.solution_index >= s->second.solutions.size()) {
    throw ValidationError("problem '" + a.problem_id + "' has no solution #" + std::to_string(a.solution_index));
  }
  InjectionSettings settings{rt.model(a.model), rt.model(a.judge_model), a.max_refinements};
  const auto attempt =
      inject_with_refinement(p->second, s->second.solutions[a.solution_index], mc->second, settings, rt.ctx());
  if (a.json) {
    std::cout << audit_record(a.problem_id, a.misconception_id, attempt).dump(2) << "\n";
  } else {
    std::cout << outcome_name(attempt.outcome) << "\n";
    if (const auto* inj = std::get_if<Injected>(&attempt.outcome)) std::cout << inj->code;
  }
  return kExitOk;
}

struct GenArgs {
  std::string config, problems, misconceptions, out;
  std::string model = "sonnet-4.5-reasoning", judge_model = "sonnet-4.5-reasoning";
  int max_refinements = 1;
};

int run_genbench(Runtime& rt, const GenArgs& a) {
  const fs::path cfg_path(a.config);
  const auto cfg_json = parse_json(read_file(cfg_path), cfg_path.string());
  const auto cfg = gen_config_from_json(cfg_json);
  auto pick = [&](const std::string& flag, const char* key) -> fs::path {
    if (!flag.empty()) return flag;
    if (cfg_json.contains(key) && cfg_json.at(key).is_string()) {
      return resolve_relative(cfg_path, cfg_json.at(key).get<std::string>());
    }
    throw ValidationError(std::string("no ") + key + " file given (flag or config key '" + key + "')");
  };
  const auto mcs = load_misconceptions(pick(a.misconceptions, "misconceptions"));
  const auto bank = load_problems(pick(a.problems, "problems"));
  InjectionSettings settings{rt.model(a.model), rt.model(a.judge_model), a.max_refinements};
  const auto result = generate_dataset(mcs, bank, cfg, make_llm_injector(settings, rt.ctx()));

  const fs::path out(a.out);
  write_dataset(out, result.dataset);
  write_file(out / "genreport.json", to_json(result.report).dump(2) + "\n");
  write_file(out / "injection_audit.jsonl", dump_jsonl(result.audit));

  const auto& r = result.report;
  const auto& st = result.dataset.stats;
  std::cout << "attempted " << r.attempted << ", injected " << r.injected << ", inapplicable "
            << r.inapplicable << ", rejected " << r.rejected << ", replaced " << r.replaced << "\n"
            << "bags " << st.total_bags << " (" << st.bags_with_misconception << " with misconception, "
            << st.bags_correct_only << " correct-only), samples " << st.total_samples << "\n";
  if (!r.failed_bags.empty()) {
    std::cerr << r.failed_bags.size() << " bag(s) failed; see genreport.json\n";
    return kExitRuntime;
  }
  return kExitOk;
}

struct MineArgs {
  std::string mode = "multi", dataset, model, out = "predictions.jsonl", equivalence = "text";
  std::string judge_model = "sonnet-4.5-reasoning";
  bool reasoning = false;
  int workers = 1;
};

int run_mine(Runtime& rt, const MineArgs& a) {
  const auto d = load_dataset(a.dataset);
  MiningOptions opt;
  opt.mode = mine_mode_from_string(a.mode);
  opt.model = rt.model(a.model, a.reasoning);
  if (a.equivalence == "judge") {
    opt.equivalence = EquivalenceKind::judge;
  } else if (a.equivalence != "text") {
    throw ValidationError("unknown equivalence '" + a.equivalence + "' (expected text or judge)");
  }
  opt.judge_model = rt.model(a.judge_model);
  opt.workers = a.workers;
  const auto results = run_mining(d, opt, rt.ctx());
  std::vector<Json> lines;
  std::size_t found_count = 0, degraded = 0;
  for (const auto& b : results) {
    lines.push_back(to_json(b, opt.model.id));
    if (is_found(b.prediction)) ++found_count;
    for (const auto& r : b.replies) degraded += r.error ? 1 : 0;
  }
  write_file(a.out, dump_jsonl(lines));
  std::cout << "mined " << results.size() << " bags (" << to_string(opt.mode) << "), " << found_count
            << " with a misconception, " << degraded << " degraded replies\n";
  return kExitOk;
}

struct EvalArgs {
  std::string dataset, predictions, out = "eval_report.json";
  std::string judge_model = "sonnet-4.5-reasoning";
  int workers = 1;
};

int run_eval(Runtime& rt, const EvalArgs& a) {
  const auto d = load_dataset(a.dataset);
  const auto preds = load_predictions(a.predictions);
  EvalSettings settings;
  settings.match_model = rt.model(a.judge_model);
  settings.validation_model = rt.model(a.judge_model);
  settings.workers = a.workers;
  const auto records = evaluate_dataset(d, preds, settings, rt.ctx());
  const auto report = eval_report(records);
  write_file(a.out, report.dump(2) + "\n");
  const auto& c = report.at("counts");
  std::printf("tp=%llu tn=%llu fp=%llu fn=%llu  P=%.4f R=%.4f F1=%.4f acc=%.4f\n",
              static_cast<unsigned long long>(c.at("tp").get<std::uint64_t>()),
              static_cast<unsigned long long>(c.at("tn").get<std::uint64_t>()),
              static_cast<unsigned long long>(c.at("fp").get<std::uint64_t>()),
              static_cast<unsigned long long>(c.at("fn").get<std::uint64_t>()),
              report.at("precision").get<double>(), report.at("recall").get<double>(),
              report.at("f1").get<double>(), report.at("accuracy").get<double>());
  return kExitOk;
}

int run_stats(const std::string& dataset) {
  const auto d = load_dataset(dataset);
  const auto recount = dataset_stats(d.bags);
  const auto& s = d.stats;
  std::cout << "total_samples " << s.total_samples << " = exhibiting " << s.samples_exhibiting << " + clean "
            << s.samples_clean << "\n"
            << "total_bags " << s.total_bags << " = with_misconception " << s.bags_with_misconception
            << " + correct_only " << s.bags_correct_only << "\n";
  const auto violations = validate_dataset(d);
  for (const auto& v : violations) std::cout << "violation " << v.entity << ": " << v.message << "\n";
  if (!violations.empty() || recount != s) {
    std::cout << "identities FAIL\n";
    return kExitValidation;
  }
  std::cout << "identities OK\n";
  return kExitOk;
}

struct ServeArgs {
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string cors_origin = "*";
};

int run_serve(Runtime& rt, const ServeArgs& a) {
  ServiceOptions opts;
  opts.cors_origin = a.cors_origin;
  opts.deterministic_timing = rt.mock();
  Service svc(rt.registry(), rt.client(), rt.templates(), opts);
  if (!svc.listen(a.host, a.port)) {
    spdlog::error("could not bind {}:{}", a.host, a.port);
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("mcmine"));
  spdlog::set_level(spdlog::level::warn);

  CLI::App app{"Programming misconception benchmark generation, mining and evaluation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--mock-scenario", g.mock_scenario, "Serve every model call from a scripted scenario file");
  app.add_option("--record-scenario", g.record_scenario, "Write every completion seen to a replay scenario");
  app.add_option("--prompts", g.prompts, "Prompt template directory");
  app.add_option("--config", g.config, "Model registry file (default: $MCMINE_CONFIG or built-in presets)");
  app.add_flag("-v,--verbose", g.verbose, "Info-level logging");

  InjectArgs ia;
  auto* inject = app.add_subcommand("inject", "Inject one misconception into one correct solution");
  inject->add_option("--problems", ia.problems, "problems.jsonl")->required();
  inject->add_option("--misconceptions", ia.misconceptions, "misconceptions.json")->required();
  inject->add_option("--problem", ia.problem_id, "Problem id")->required();
  inject->add_option("--misconception", ia.misconception_id, "Misconception id")->required();
  inject->add_option("--solution-index", ia.solution_index, "Which stored solution to modify");
  inject->add_option("--model", ia.model, "Injection model id");
  inject->add_option("--judge-model", ia.judge_model, "Judge model id");
  inject->add_option("--max-refinements", ia.max_refinements, "Feedback rounds after a rejection")
      ->check(CLI::NonNegativeNumber);
  inject->add_flag("--json", ia.json, "Print the full audit record");

  GenArgs ga;
  auto* genbench = app.add_subcommand("genbench", "Generate a benchmark dataset");
  genbench->add_option("config", ga.config, "Generation config (JSON)")->required();
  genbench->add_option("--problems", ga.problems, "problems.jsonl (overrides the config)");
  genbench->add_option("--misconceptions", ga.misconceptions, "misconceptions.json (overrides the config)");
  genbench->add_option("--out", ga.out, "Output directory")->required();
  genbench->add_option("--model", ga.model, "Injection model id");
  genbench->add_option("--judge-model", ga.judge_model, "Judge model id");
  genbench->add_option("--max-refinements", ga.max_refinements, "Feedback rounds after a rejection")
      ->check(CLI::NonNegativeNumber);

  MineArgs ma;
  auto* mine = app.add_subcommand("mine", "Mine misconceptions from every bag");
  mine->add_option("--mode", ma.mode, "single or multi")->check(CLI::IsMember({"single", "multi"}));
  mine->add_option("--dataset", ma.dataset, "Dataset directory or dataset.json")->required();
  mine->add_option("--model", ma.model, "Model id")->required();
  mine->add_flag("--reasoning", ma.reasoning, "Use the model's reasoning variant");
  mine->add_option("--out", ma.out, "predictions.jsonl path");
  mine->add_option("--equivalence", ma.equivalence, "Single-mode clustering: text or judge")
      ->check(CLI::IsMember({"text", "judge"}));
  mine->add_option("--judge-model", ma.judge_model, "Model id for judge clustering");
  mine->add_option("--workers", ma.workers, "Bags mined concurrently")->check(CLI::PositiveNumber);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--dataset", ea.dataset, "Dataset directory or dataset.json")->required();
  eval->add_option("--predictions", ea.predictions, "predictions.jsonl")->required();
  eval->add_option("--out", ea.out, "eval_report.json path");
  eval->add_option("--judge-model", ea.judge_model, "Semantic match and validation model id");
  eval->add_option("--workers", ea.workers, "Bags evaluated concurrently")->check(CLI::PositiveNumber);

  std::string stats_dataset;
  auto* stats = app.add_subcommand("stats", "Print dataset statistics and check identities");
  stats->add_option("dataset", stats_dataset, "Dataset directory or dataset.json")->required();

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the HTTP analysis service");
  serve->add_option("--port", sa.port, "Port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", sa.host, "Bind address");
  serve->add_option("--cors-origin", sa.cors_origin, "Allowed CORS origin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }
  if (g.verbose) spdlog::set_level(spdlog::level::info);

  try {
    if (stats->parsed()) return run_stats(stats_dataset);
    Runtime rt(g);
    if (inject->parsed()) return run_inject(rt, ia);
    if (genbench->parsed()) return run_genbench(rt, ga);
    if (mine->parsed()) return run_mine(rt, ma);
    if (eval->parsed()) return run_eval(rt, ea);
    if (serve->parsed()) return run_serve(rt, sa);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const MalformedScenario& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InsufficientProblems& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const MissingBinding& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
