#pragma once

// Benchmark generation: simulated students, each a bag of problem-code pairs
// built by injecting one misconception into sampled correct solutions, plus
// injection-free negative bags.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "mcmine/core_model.hpp"
#include "mcmine/mcinject.hpp"
#include "mcmine/serialization.hpp"

namespace mcmine {

enum class Selection { round_robin, uniform_random };

struct GenConfig {
  int num_bags = 339;
  std::size_t bag_size_min = 4;
  std::size_t bag_size_max = 8;
  double correct_only_fraction = 0.177;
  std::uint64_t seed = 0;
  Selection selection = Selection::round_robin;
  std::vector<std::string> problem_ids;     // empty = whole bank
  std::optional<std::string> verify_runner;  // command run as `<runner> <file>`
  int workers = 1;
};

inline void validate_gen_config(const GenConfig& c) {
  if (c.num_bags < 1) throw ValidationError("num_bags must be at least 1");
  if (c.bag_size_min < 1 || c.bag_size_min > c.bag_size_max) {
    throw ValidationError("bag sizes must satisfy 1 <= bag_size_min <= bag_size_max");
  }
  if (!(c.correct_only_fraction >= 0.0 && c.correct_only_fraction <= 1.0)) {
    throw ValidationError("correct_only_fraction must be in [0, 1]");
  }
  if (c.workers < 1) throw ValidationError("workers must be at least 1");
}

inline GenConfig gen_config_from_json(const Json& j) {
  GenConfig c;
  c.num_bags = j.value("num_bags", c.num_bags);
  c.bag_size_min = j.value("bag_size_min", c.bag_size_min);
  c.bag_size_max = j.value("bag_size_max", c.bag_size_max);
  c.correct_only_fraction = j.value("correct_only_fraction", c.correct_only_fraction);
  c.seed = j.value("seed", c.seed);
  const auto sel = j.value("selection", std::string{"round_robin"});
  if (sel == "round_robin") {
    c.selection = Selection::round_robin;
  } else if (sel == "uniform_random") {
    c.selection = Selection::uniform_random;
  } else {
    throw ValidationError("unknown selection '" + sel + "'");
  }
  c.problem_ids = j.value("problem_ids", std::vector<std::string>{});
  if (j.contains("verify_runner") && j.at("verify_runner").is_string()) {
    c.verify_runner = j.at("verify_runner").get<std::string>();
  }
  c.workers = j.value("workers", c.workers);
  validate_gen_config(c);
  return c;
}

// ---------------------------------------------------------------------------
// Seeded sampling. The engine is mt19937_64, whose output sequence is fixed by
// the standard; bounded draws avoid std distributions so results do not
// depend on the standard library.

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for bag `index`, independent of how bags are scheduled.
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 1));
}

/// Uniform draw from [0, n) by rejection.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  if (n == 0) throw ValidationError("uniform_below: empty range");
  const auto limit = std::numeric_limits<std::uint64_t>::max() -
                     std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// n distinct indices from [0, bank_size) via a partial Fisher-Yates shuffle.
inline std::vector<std::size_t> sample_bag_indices(Rng& rng, std::size_t bank_size, std::size_t n) {
  if (n > bank_size) {
    throw InsufficientProblems("cannot sample " + std::to_string(n) + " distinct problems from " +
                               std::to_string(bank_size));
  }
  std::vector<std::size_t> idx(bank_size);
  for (std::size_t i = 0; i < bank_size; ++i) idx[i] = i;
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(rng, bank_size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

/// Number of injection-free bags: K * fraction rounded half up.
inline std::size_t correct_only_count(int num_bags, double fraction) {
  // the epsilon absorbs representation error in fractions like 60/339
  return static_cast<std::size_t>(std::floor(num_bags * fraction + 0.5 + 1e-9));
}

// ---------------------------------------------------------------------------
// Optional verification of correct solutions by an external runner.

/// Writes the code followed by the problem's assertions to a temp file and
/// runs `<runner> <file>`. Passing means exit status 0.
inline bool verify_solution(const Problem& problem, const std::string& code, const std::string& runner) {
  static std::atomic<std::uint64_t> counter{0};
  const auto path = std::filesystem::temp_directory_path() /
                    ("mcmine_verify_" + std::to_string(::getpid()) + "_" +
                     std::to_string(counter.fetch_add(1)) + ".py");
  std::string program = code;
  if (!program.empty() && program.back() != '\n') program += '\n';
  for (const auto& t : problem.tests) program += t + "\n";
  write_file(path, program);
  const auto cmd = runner + " '" + path.string() + "' > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  std::filesystem::remove(path);
  return status == 0;
}

// ---------------------------------------------------------------------------

/// Turns (problem, correct solution, misconception) into an injection attempt.
/// Throwing marks the whole bag as failed.
using Injector =
    std::function<InjectionAttempt(const Problem&, const std::string&, const Misconception&)>;

/// The LLM-backed injector. Judge or extraction parse failures become
/// rejections with a warning; gateway errors propagate.
inline Injector make_llm_injector(InjectionSettings settings, LlmContext ctx) {
  return [settings = std::move(settings), ctx](const Problem& p, const std::string& solution,
                                               const Misconception& mc) {
    try {
      return inject_with_refinement(p, solution, mc, settings, ctx);
    } catch (const ParseError& e) {
      InjectionAttempt a{Rejected{""}, "", std::nullopt, std::nullopt, std::nullopt};
      a.warning = std::string("parse failure: ") + e.what();
      return a;
    }
  };
}

struct FailedBag {
  std::string bag_id;
  std::string error;
};

struct GenReport {
  std::uint64_t attempted = 0;
  std::uint64_t injected = 0;
  std::uint64_t inapplicable = 0;
  std::uint64_t rejected = 0;
  std::uint64_t replaced = 0;
  std::uint64_t relabeled_bags = 0;
  std::vector<FailedBag> failed_bags;
  std::vector<std::string> warnings;
};

inline Json to_json(const GenReport& r) {
  Json failed = Json::array();
  for (const auto& f : r.failed_bags) failed.push_back({{"bag_id", f.bag_id}, {"error", f.error}});
  return Json{{"attempted", r.attempted},
              {"injected", r.injected},
              {"inapplicable", r.inapplicable},
              {"rejected", r.rejected},
              {"replaced", r.replaced},
              {"relabeled_bags", r.relabeled_bags},
              {"failed_bags", std::move(failed)},
              {"warnings", r.warnings}};
}

struct GenerationResult {
  Dataset dataset;
  GenReport report;
  std::vector<Json> audit;  // one record per injection attempt, in bag order
};

inline std::string bag_id_for(std::size_t index, int num_bags) {
  auto digits = std::to_string(num_bags).size();
  digits = std::max<std::size_t>(digits, 4);
  auto n = std::to_string(index + 1);
  return "bag-" + std::string(digits - std::min(digits, n.size()), '0') + n;
}

namespace detail {

struct BagPlan {
  std::string bag_id;
  std::optional<std::string> misconception;  // nullopt = correct-only by design
};

struct BagOutcome {
  Bag bag;
  std::uint64_t attempted = 0, injected = 0, inapplicable = 0, rejected = 0;
  bool relabeled = false;
  std::optional<std::string> error;
  std::vector<std::string> warnings;
  std::vector<Json> audit;
};

}  // namespace detail

inline GenerationResult generate_dataset(const std::map<std::string, Misconception>& mc_bank,
                                         const ProblemBank& ps_bank, const GenConfig& cfg,
                                         const Injector& injector) {
  validate_gen_config(cfg);

  std::vector<std::string> candidates;
  if (cfg.problem_ids.empty()) {
    for (const auto& [id, _] : ps_bank.problems) candidates.push_back(id);
  } else {
    for (const auto& id : cfg.problem_ids) {
      if (!ps_bank.problems.contains(id)) throw ValidationError("unknown problem id '" + id + "'");
    }
    candidates = cfg.problem_ids;
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  }

  // Solutions eligible for sampling, per candidate problem.
  std::map<std::string, std::vector<std::string>> usable;
  for (const auto& id : candidates) {
    const auto it = ps_bank.solutions.find(id);
    if (it == ps_bank.solutions.end()) continue;
    std::vector<std::string> sols;
    for (const auto& s : it->second.solutions) {
      if (!cfg.verify_runner || verify_solution(ps_bank.problems.at(id), s, *cfg.verify_runner)) {
        sols.push_back(s);
      }
    }
    if (!sols.empty()) usable.emplace(id, std::move(sols));
  }
  std::erase_if(candidates, [&](const std::string& id) { return !usable.contains(id); });
  if (candidates.size() < cfg.bag_size_max) {
    throw InsufficientProblems("problem bank has " + std::to_string(candidates.size()) +
                               " usable problems but bags may need " +
                               std::to_string(cfg.bag_size_max));
  }

  const auto K = static_cast<std::size_t>(cfg.num_bags);
  const auto n_negative = correct_only_count(cfg.num_bags, cfg.correct_only_fraction);
  std::vector<std::string> mc_ids;
  for (const auto& [id, _] : mc_bank) mc_ids.push_back(id);
  if (n_negative < K && mc_ids.empty()) throw ValidationError("misconception bank is empty");

  Rng master(cfg.seed);
  const auto neg = sample_bag_indices(master, K, n_negative);
  const std::set<std::size_t> negative(neg.begin(), neg.end());

  std::vector<detail::BagPlan> plan(K);
  std::size_t labeled_ordinal = 0;
  for (std::size_t k = 0; k < K; ++k) {
    plan[k].bag_id = bag_id_for(k, cfg.num_bags);
    if (negative.contains(k)) continue;
    if (cfg.selection == Selection::round_robin) {
      plan[k].misconception = mc_ids[labeled_ordinal % mc_ids.size()];
    } else {
      Rng pick(child_seed(cfg.seed ^ 0x5eedULL, k));
      plan[k].misconception = mc_ids[uniform_below(pick, mc_ids.size())];
    }
    ++labeled_ordinal;
  }

  auto build = [&](std::size_t k) {
    detail::BagOutcome out;
    out.bag.bag_id = plan[k].bag_id;
    Rng rng(child_seed(cfg.seed, k));
    const auto span = cfg.bag_size_max - cfg.bag_size_min + 1;
    const auto n = cfg.bag_size_min + static_cast<std::size_t>(uniform_below(rng, span));
    const auto picks = sample_bag_indices(rng, candidates.size(), n);
    const Misconception* mc = plan[k].misconception ? &mc_bank.at(*plan[k].misconception) : nullptr;
    try {
      for (const auto i : picks) {
        const auto& pid = candidates[i];
        const auto& sols = usable.at(pid);
        const auto& solution = sols[uniform_below(rng, sols.size())];
        ProblemCodePair pair{pid, solution, std::nullopt};
        if (mc) {
          ++out.attempted;
          auto attempt = injector(ps_bank.problems.at(pid), solution, *mc);
          if (attempt.warning) out.warnings.push_back(out.bag.bag_id + "/" + pid + ": " + *attempt.warning);
          out.audit.push_back(audit_record(pid, mc->id, attempt));
          if (const auto* inj = std::get_if<Injected>(&attempt.outcome)) {
            ++out.injected;
            pair.code = inj->code;
            pair.exhibits = mc->id;
          } else if (std::holds_alternative<Inapplicable>(attempt.outcome)) {
            ++out.inapplicable;
          } else {
            ++out.rejected;
          }
        }
        out.bag.pairs.push_back(std::move(pair));
      }
    } catch (const std::exception& e) {
      out.error = e.what();
      return out;
    }
    if (mc && out.injected > 0) {
      out.bag.gt_label = mc->id;
    } else if (mc) {
      out.relabeled = true;
    }
    return out;
  };

  std::vector<detail::BagOutcome> outcomes(K);
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), K);
  if (workers <= 1) {
    for (std::size_t k = 0; k < K; ++k) outcomes[k] = build(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (auto k = next.fetch_add(1); k < K; k = next.fetch_add(1)) outcomes[k] = build(k);
      });
    }
  }

  GenerationResult result;
  auto& d = result.dataset;
  d.misconceptions = mc_bank;
  d.problems = ps_bank.problems;
  d.solutions = ps_bank.solutions;
  d.generation_seed = cfg.seed;
  auto& rep = result.report;
  for (auto& o : outcomes) {
    for (auto& w : o.warnings) rep.warnings.push_back(std::move(w));
    for (auto& a : o.audit) result.audit.push_back(std::move(a));
    if (o.error) {
      rep.failed_bags.push_back({o.bag.bag_id, *o.error});
      continue;
    }
    rep.attempted += o.attempted;
    rep.injected += o.injected;
    rep.inapplicable += o.inapplicable;
    rep.rejected += o.rejected;
    if (o.relabeled) ++rep.relabeled_bags;
    d.bags.push_back(std::move(o.bag));
  }
  rep.replaced = rep.inapplicable + rep.rejected;
  d.stats = dataset_stats(d.bags);
  return result;
}

}  // namespace mcmine
