#pragma once

// Misconception mining over bags: per-pair mining with count aggregation
// (single mode) and whole-bag mining in one completion (multi mode).

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mcmine/core_model.hpp"
#include "mcmine/mcinject.hpp"
#include "mcmine/semantic.hpp"
#include "mcmine/serialization.hpp"
#include "mcmine/tags.hpp"

namespace mcmine {

inline MiningPrediction parse_miner_output(std::string_view text) {
  const auto block = first_tag_block(text, "misconception");
  if (!block) throw ParseError("miner output has no <misconception> block");
  if (trimmed(*block) == "NONE") return NoneFound{};
  const auto desc = first_tag_block(*block, "description");
  if (!desc) throw ParseError("miner output has no <description> tag");
  const auto expl = first_tag_block(*block, "explanation");
  if (!expl) throw ParseError("miner output has no <explanation> tag");
  auto d = trimmed(*desc);
  if (d.empty()) throw ParseError("miner output has an empty description");
  return FoundMisconception{std::move(d), trimmed(*expl)};
}

struct MineReply {
  MiningPrediction prediction = NoneFound{};
  std::string raw;
  std::optional<std::string> error;  // set when the prediction is a degraded NoneFound
  std::optional<std::string> reasoning_trace;
};

namespace detail {

// Gateway and parse failures degrade to a flagged NoneFound. A missing
// credential is a configuration error and propagates.
template <typename Fn>
MineReply guarded_mine(Fn&& fn) {
  MineReply r;
  try {
    auto completion = fn();
    r.raw = completion.text;
    r.reasoning_trace = completion.reasoning_trace;
    r.prediction = parse_miner_output(completion.text);
  } catch (const Unauthorized&) {
    throw;
  } catch (const ParseError& e) {
    r.prediction = NoneFound{};
    r.error = std::string("parse: ") + e.what();
  } catch (const GatewayError& e) {
    r.prediction = NoneFound{};
    r.error = std::string("gateway: ") + e.what();
  }
  return r;
}

}  // namespace detail

inline std::string single_prompt(const std::string& problem_description, const std::string& code,
                                 const TemplateLibrary& templates) {
  return render(templates.get(prompts::kMinerSingle),
                {{"problem_description", problem_description}, {"student_code", code}});
}

/// Problem/code pairs as numbered "Sample i" sections in bag order.
inline std::string multi_prompt(const std::vector<std::pair<std::string, std::string>>& pairs,
                                const TemplateLibrary& templates) {
  const auto& sample = templates.get(prompts::kMinerMultiSample);
  std::string samples;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    samples += render(sample, {{"index", std::to_string(i + 1)},
                               {"problem_description", pairs[i].first},
                               {"student_code", pairs[i].second}});
  }
  return render(templates.get(prompts::kMinerMulti), {{"samples", samples}});
}

inline MineReply mine_text(const std::string& problem_description, const std::string& code,
                           const ModelConfig& cfg, const LlmContext& ctx) {
  return detail::guarded_mine([&] {
    return ctx.client.complete(cfg, user_prompt(single_prompt(problem_description, code, ctx.templates)));
  });
}

inline MineReply mine_single(const ProblemCodePair& pair, const Problem& problem,
                             const ModelConfig& cfg, const LlmContext& ctx) {
  return mine_text(problem.description, pair.code, cfg, ctx);
}

inline MineReply mine_multi_text(const std::vector<std::pair<std::string, std::string>>& pairs,
                                 const ModelConfig& cfg, const LlmContext& ctx) {
  return detail::guarded_mine(
      [&] { return ctx.client.complete(cfg, user_prompt(multi_prompt(pairs, ctx.templates))); });
}

inline std::vector<std::pair<std::string, std::string>> bag_texts(
    const Bag& bag, const std::map<std::string, Problem>& problems) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& p : bag.pairs) {
    const auto it = problems.find(p.problem_id);
    if (it == problems.end()) {
      throw ValidationError("bag " + bag.bag_id + " references unknown problem '" + p.problem_id + "'");
    }
    out.emplace_back(it->second.description, p.code);
  }
  return out;
}

inline MineReply mine_multi(const Bag& bag, const std::map<std::string, Problem>& problems,
                            const ModelConfig& cfg, const LlmContext& ctx) {
  return mine_multi_text(bag_texts(bag, problems), cfg, ctx);
}

// ---------------------------------------------------------------------------
// Aggregation

using Equivalence = std::function<bool(const FoundMisconception& representative,
                                       const FoundMisconception& candidate)>;

/// Lowercased description with whitespace runs collapsed and trailing
/// punctuation dropped.
inline std::string normalize_description(std::string_view text) {
  std::string out;
  bool space = false;
  for (const char c : detail::trim_view(text)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  while (!out.empty() && (out.back() == '.' || out.back() == '!' || out.back() == ' ')) out.pop_back();
  return out;
}

inline Equivalence normalized_text_equivalence() {
  return [](const FoundMisconception& a, const FoundMisconception& b) {
    return normalize_description(a.description) == normalize_description(b.description);
  };
}

/// Pairwise semantic-match judge against cluster representatives.
inline Equivalence judge_equivalence(std::string code_samples, ModelConfig cfg, LlmContext ctx) {
  return [code_samples = std::move(code_samples), cfg = std::move(cfg), ctx](
             const FoundMisconception& rep, const FoundMisconception& cand) {
    if (normalize_description(rep.description) == normalize_description(cand.description)) return true;
    try {
      return llm_semantic_match(describe(rep), describe(cand), code_samples, cfg, ctx);
    } catch (const ParseError&) {
      return false;
    }
  };
}

struct Aggregate {
  MiningPrediction prediction = NoneFound{};
  std::size_t count = 0;                 // size of the winning cluster
  std::vector<std::size_t> cluster_sizes;  // in order of first appearance
};

/// Greedy clustering in index order; the largest cluster wins and ties go to
/// the cluster seen first. Its first member is the representative.
inline Aggregate aggregate_single(const std::vector<MiningPrediction>& preds, const Equivalence& equiv) {
  std::vector<const FoundMisconception*> reps;
  Aggregate agg;
  for (const auto& p : preds) {
    const auto* f = found(p);
    if (!f) continue;
    bool placed = false;
    for (std::size_t c = 0; c < reps.size(); ++c) {
      if (equiv(*reps[c], *f)) {
        ++agg.cluster_sizes[c];
        placed = true;
        break;
      }
    }
    if (!placed) {
      reps.push_back(f);
      agg.cluster_sizes.push_back(1);
    }
  }
  for (std::size_t c = 0; c < reps.size(); ++c) {
    if (agg.cluster_sizes[c] > agg.count) {
      agg.count = agg.cluster_sizes[c];
      agg.prediction = *reps[c];
    }
  }
  return agg;
}

// ---------------------------------------------------------------------------
// Dataset runs

enum class MineMode { single, multi };
enum class EquivalenceKind { normalized_text, judge };

inline std::string to_string(MineMode m) { return m == MineMode::single ? "single" : "multi"; }
inline MineMode mine_mode_from_string(const std::string& s) {
  if (s == "single") return MineMode::single;
  if (s == "multi") return MineMode::multi;
  throw ValidationError("unknown mining mode '" + s + "' (expected single or multi)");
}

struct MiningOptions {
  MineMode mode = MineMode::multi;
  ModelConfig model;
  EquivalenceKind equivalence = EquivalenceKind::normalized_text;
  ModelConfig judge_model = presets::judge_default();
  int workers = 1;
};

struct BagMining {
  std::string bag_id;
  MineMode mode = MineMode::multi;
  MiningPrediction prediction = NoneFound{};
  std::vector<MineReply> replies;  // one per pair (single) or one per bag (multi)
};

inline Json to_json(const BagMining& b, const std::string& model_id) {
  Json per_pair = nullptr;
  Json raw = Json::array();
  Json errors = Json::array();
  if (b.mode == MineMode::single) per_pair = Json::array();
  for (std::size_t i = 0; i < b.replies.size(); ++i) {
    const auto& r = b.replies[i];
    if (b.mode == MineMode::single) per_pair.push_back(to_json(r.prediction));
    raw.push_back(r.raw);
    if (r.error) errors.push_back({{"index", i}, {"error", *r.error}});
  }
  Json j{{"bag_id", b.bag_id},
         {"mode", to_string(b.mode)},
         {"prediction", to_json(b.prediction)},
         {"per_pair", std::move(per_pair)},
         {"raw", std::move(raw)},
         {"model", model_id}};
  if (!errors.empty()) j["errors"] = std::move(errors);
  return j;
}

inline BagMining mine_bag(const Bag& bag, const std::map<std::string, Problem>& problems,
                          const MiningOptions& opt, const LlmContext& ctx) {
  BagMining out;
  out.bag_id = bag.bag_id;
  out.mode = opt.mode;
  const auto texts = bag_texts(bag, problems);
  if (opt.mode == MineMode::multi) {
    out.replies.push_back(mine_multi_text(texts, opt.model, ctx));
    out.prediction = out.replies.front().prediction;
    return out;
  }
  std::vector<MiningPrediction> preds;
  for (const auto& [problem, code] : texts) {
    out.replies.push_back(mine_text(problem, code, opt.model, ctx));
    preds.push_back(out.replies.back().prediction);
  }
  const auto equiv = opt.equivalence == EquivalenceKind::judge
                         ? judge_equivalence(render_code_samples(bag, ctx.templates), opt.judge_model, ctx)
                         : normalized_text_equivalence();
  out.prediction = aggregate_single(preds, equiv).prediction;
  return out;
}

/// Mines every bag; results are in bag order regardless of worker count.
inline std::vector<BagMining> run_mining(const Dataset& d, const MiningOptions& opt, const LlmContext& ctx) {
  std::vector<BagMining> out(d.bags.size());
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(opt.workers, 1)),
                                             std::max<std::size_t>(d.bags.size(), 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < d.bags.size(); ++i) out[i] = mine_bag(d.bags[i], d.problems, opt, ctx);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (auto i = next.fetch_add(1); i < d.bags.size(); i = next.fetch_add(1)) {
          try {
            out[i] = mine_bag(d.bags[i], d.problems, opt, ctx);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Bag id to prediction, read back from predictions.jsonl.
inline std::map<std::string, MiningPrediction> load_predictions(const std::filesystem::path& path) {
  std::map<std::string, MiningPrediction> out;
  for (const auto& j : parse_jsonl(read_file(path), path.string())) {
    if (!j.is_object() || !j.contains("bag_id") || !j.at("bag_id").is_string() ||
        !j.contains("prediction")) {
      throw ValidationError(path.string() + ": prediction record needs bag_id and prediction");
    }
    const auto id = j.at("bag_id").get<std::string>();
    if (!out.emplace(id, prediction_from_json(j.at("prediction"))).second) {
      throw ValidationError(path.string() + ": duplicate prediction for bag '" + id + "'");
    }
  }
  return out;
}

}  // namespace mcmine
