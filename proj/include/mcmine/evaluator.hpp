#pragma once

// Scoring of mined predictions against bag ground truth, with credit for
// validated novel misconceptions.

#include <atomic>
#include <exception>
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

namespace mcmine {

struct Contributions {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  Contributions& operator+=(const Contributions& o) noexcept {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Contributions&, const Contributions&) = default;
};

inline Json to_json(const Contributions& c) {
  return Json{{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
}

/// Contribution table. Flags that cannot apply to a row (matched or validated
/// on NoneFound) are ignored.
inline Contributions score_bag(bool gt_present, bool found, bool matched, bool novel_validated) {
  if (!found) return gt_present ? Contributions{0, 0, 0, 1} : Contributions{0, 1, 0, 0};
  if (gt_present) {
    if (matched) return {1, 0, 0, 0};
    if (novel_validated) return {1, 0, 0, 1};
    return {0, 0, 1, 0};
  }
  if (novel_validated) return {1, 0, 0, 0};
  return {0, 0, 1, 0};
}

// ---------------------------------------------------------------------------
// LLM-backed checks

struct EvalSettings {
  ModelConfig match_model = presets::judge_default();
  ModelConfig validation_model = presets::judge_default();
  /// Minimum number of Y verdicts for a bag of n pairs; default ceil(n/2).
  std::function<std::size_t(std::size_t)> novel_threshold = [](std::size_t n) { return (n + 1) / 2; };
  int workers = 1;
};

/// Short-circuits the three cases involving an absent side without a call.
inline bool semantic_match(const std::optional<Misconception>& gt, const MiningPrediction& pred,
                           const Bag& bag, const ModelConfig& cfg, const LlmContext& ctx) {
  const auto* f = found(pred);
  if (!gt) return f == nullptr;
  if (!f) return false;
  return llm_semantic_match(describe(*gt), describe(*f), render_code_samples(bag, ctx.templates), cfg, ctx);
}

struct NovelValidation {
  bool validated = false;
  std::size_t yes = 0;
  std::size_t threshold = 0;
};

/// Judges every pair against the prediction; unparseable verdicts count as N.
inline NovelValidation validate_novel(const FoundMisconception& pred, const Bag& bag,
                                      const EvalSettings& settings, const LlmContext& ctx) {
  Misconception as_mc;
  as_mc.id = "predicted";
  as_mc.description = pred.description;
  as_mc.example_code = pred.explanation;
  NovelValidation v;
  v.threshold = settings.novel_threshold(bag.pairs.size());
  for (const auto& pair : bag.pairs) {
    try {
      if (judge_exhibits(as_mc, pair.code, settings.validation_model, ctx).verdict.exhibits) ++v.yes;
    } catch (const ParseError&) {
    }
  }
  v.validated = !bag.pairs.empty() && v.yes >= v.threshold;
  return v;
}

struct EvalRecord {
  std::string bag_id;
  std::optional<std::string> gt;
  MiningPrediction prediction = NoneFound{};
  bool matched = false;
  bool novel_validated = false;
  Contributions contributions;
};

inline EvalRecord evaluate_bag(const Bag& bag, const MiningPrediction& pred,
                               const std::map<std::string, Misconception>& bank,
                               const EvalSettings& settings, const LlmContext& ctx) {
  EvalRecord r;
  r.bag_id = bag.bag_id;
  r.gt = bag.gt_label;
  r.prediction = pred;
  std::optional<Misconception> gt;
  if (bag.gt_label) {
    const auto it = bank.find(*bag.gt_label);
    if (it == bank.end()) throw ValidationError("bag " + bag.bag_id + " has unknown label '" + *bag.gt_label + "'");
    gt = it->second;
  }
  r.matched = semantic_match(gt, pred, bag, settings.match_model, ctx);
  if (const auto* f = found(pred); f && !r.matched) {
    r.novel_validated = validate_novel(*f, bag, settings, ctx).validated;
  }
  r.contributions = score_bag(gt.has_value(), is_found(pred), r.matched, r.novel_validated);
  return r;
}

/// One record per bag, in bag order. Every bag needs a prediction.
inline std::vector<EvalRecord> evaluate_dataset(const Dataset& d,
                                                const std::map<std::string, MiningPrediction>& preds,
                                                const EvalSettings& settings, const LlmContext& ctx) {
  for (const auto& [id, _] : preds) {
    if (std::none_of(d.bags.begin(), d.bags.end(), [&](const Bag& b) { return b.bag_id == id; })) {
      throw ValidationError("prediction for unknown bag '" + id + "'");
    }
  }
  for (const auto& b : d.bags) {
    if (!preds.contains(b.bag_id)) throw ValidationError("no prediction for bag '" + b.bag_id + "'");
  }
  std::vector<EvalRecord> out(d.bags.size());
  auto one = [&](std::size_t i) {
    out[i] = evaluate_bag(d.bags[i], preds.at(d.bags[i].bag_id), d.misconceptions, settings, ctx);
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(settings.workers, 1)),
                                             std::max<std::size_t>(d.bags.size(), 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < d.bags.size(); ++i) one(i);
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
            one(i);
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

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  Contributions counts;
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
  double accuracy_bag_level = 0;
  std::size_t bags = 0;
  std::vector<std::string> undefined;  // metrics whose denominator was zero
  std::map<std::string, Metrics> slices;
};

namespace detail {

inline double ratio(std::uint64_t num, std::uint64_t den, const char* name, std::vector<std::string>& undefined) {
  if (den == 0) {
    undefined.emplace_back(name);
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

/// Precision, recall, F1 and event accuracy from raw counts.
inline Metrics metrics_from_counts(const Contributions& c) {
  Metrics m;
  m.counts = c;
  m.precision = detail::ratio(c.tp, c.tp + c.fp, "precision", m.undefined);
  m.recall = detail::ratio(c.tp, c.tp + c.fn, "recall", m.undefined);
  if (m.precision + m.recall > 0) {
    m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.undefined.emplace_back("f1");
  }
  m.accuracy = detail::ratio(c.tp + c.tn, c.total(), "accuracy", m.undefined);
  return m;
}

/// F1 from precision and recall given directly.
inline double f1_score(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

namespace detail {

inline Metrics metrics_over(const std::vector<const EvalRecord*>& records) {
  Contributions sum;
  std::uint64_t correct_bags = 0;
  for (const auto* r : records) {
    sum += r->contributions;
    if (r->contributions.tp > 0 || r->contributions.tn > 0) ++correct_bags;
  }
  auto m = metrics_from_counts(sum);
  m.bags = records.size();
  m.accuracy_bag_level = ratio(correct_bags, records.size(), "accuracy_bag_level", m.undefined);
  return m;
}

}  // namespace detail

inline Metrics compute_metrics(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw EmptyInput("compute_metrics: no records");
  std::vector<const EvalRecord*> all, with_mc, correct_only;
  for (const auto& r : records) {
    all.push_back(&r);
    (r.gt ? with_mc : correct_only).push_back(&r);
  }
  auto m = detail::metrics_over(all);
  m.slices.emplace("misconception_bags", detail::metrics_over(with_mc));
  m.slices.emplace("correct_only_bags", detail::metrics_over(correct_only));
  return m;
}

inline Json to_json(const Metrics& m) {
  Json j{{"counts", to_json(m.counts)},
         {"precision", m.precision},
         {"recall", m.recall},
         {"f1", m.f1},
         {"accuracy", m.accuracy},
         {"accuracy_bag_level", m.accuracy_bag_level},
         {"bags", m.bags},
         {"undefined", m.undefined}};
  if (!m.slices.empty()) {
    Json slices = Json::object();
    for (const auto name : {"misconception_bags", "correct_only_bags"}) {
      if (const auto it = m.slices.find(name); it != m.slices.end()) slices[name] = to_json(it->second);
    }
    j["slices"] = std::move(slices);
  }
  return j;
}

inline Json to_json(const EvalRecord& r) {
  return Json{{"bag_id", r.bag_id},
              {"gt", detail::nullable(r.gt)},
              {"prediction", to_json(r.prediction)},
              {"matched", r.matched},
              {"novel_validated", r.novel_validated},
              {"contributions", to_json(r.contributions)}};
}

/// eval_report.json content.
inline Json eval_report(const std::vector<EvalRecord>& records) {
  auto j = to_json(compute_metrics(records));
  Json novels = Json::array();
  for (const auto& r : records) {
    const auto* f = found(r.prediction);
    if (!f || r.matched || !r.novel_validated) continue;
    novels.push_back({{"bag_id", r.bag_id},
                      {"description", f->description},
                      {"correct_only_bag", !r.gt.has_value()}});
  }
  j["novel_true_positives"] = std::move(novels);
  Json recs = Json::array();
  for (const auto& r : records) recs.push_back(to_json(r));
  j["records"] = std::move(recs);
  return j;
}

}  // namespace mcmine
