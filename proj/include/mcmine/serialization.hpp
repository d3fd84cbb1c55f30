#pragma once

// JSON forms of the domain types and readers/writers for the canonical
// dataset files: misconceptions.json, problems.jsonl, bags.jsonl, dataset.json.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcmine/core_model.hpp"

namespace mcmine {

using Json = nlohmann::ordered_json;

inline constexpr const char* kMisconceptionsFile = "misconceptions.json";
inline constexpr const char* kProblemsFile = "problems.jsonl";
inline constexpr const char* kBagsFile = "bags.jsonl";
inline constexpr const char* kDatasetFile = "dataset.json";

// ---------------------------------------------------------------------------
// enums

inline std::string to_string(Category c) { return c == Category::harmful ? "harmful" : "benign"; }
inline std::string to_string(Origin o) {
  return o == Origin::documented ? "documented" : "artificial";
}
inline std::string to_string(Provider p) {
  switch (p) {
    case Provider::openai: return "openai";
    case Provider::anthropic: return "anthropic";
    case Provider::gemini: return "gemini";
    case Provider::mock: return "mock";
  }
  return "mock";
}
inline std::string to_string(Effort e) {
  switch (e) {
    case Effort::low: return "low";
    case Effort::medium: return "medium";
    case Effort::high: return "high";
  }
  return "medium";
}

inline Category category_from_string(const std::string& s) {
  if (s == "harmful") return Category::harmful;
  if (s == "benign") return Category::benign;
  throw ValidationError("unknown category '" + s + "'");
}
inline Origin origin_from_string(const std::string& s) {
  if (s == "documented") return Origin::documented;
  if (s == "artificial") return Origin::artificial;
  throw ValidationError("unknown origin '" + s + "'");
}
inline Provider provider_from_string(const std::string& s) {
  if (s == "openai") return Provider::openai;
  if (s == "anthropic") return Provider::anthropic;
  if (s == "gemini") return Provider::gemini;
  if (s == "mock") return Provider::mock;
  throw ValidationError("unknown provider '" + s + "'");
}
inline Effort effort_from_string(const std::string& s) {
  if (s == "low") return Effort::low;
  if (s == "medium") return Effort::medium;
  if (s == "high") return Effort::high;
  throw ValidationError("unknown reasoning effort '" + s + "'");
}

namespace detail {

template <typename T>
T required(const Json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(std::string(what) + ": missing field \"" + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string(what) + ": field \"" + key + "\" has the wrong type");
  }
}

inline Json nullable(const std::optional<std::string>& s) {
  return s ? Json(*s) : Json(nullptr);
}

inline std::optional<std::string> optional_string(const Json& j, const char* key,
                                                  const char* what) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_string()) {
    throw ValidationError(std::string(what) + ": field \"" + key + "\" must be string or null");
  }
  return j.at(key).get<std::string>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// per-type conversions

inline Json to_json(const Misconception& m) {
  return Json{{"id", m.id},
              {"description", m.description},
              {"example", m.example_code},
              {"category", to_string(m.category)},
              {"origin", to_string(m.origin)},
              {"source", m.source}};
}

inline Misconception misconception_from_json(const Json& j) {
  constexpr const char* what = "misconception";
  Misconception m;
  m.id = detail::required<std::string>(j, "id", what);
  m.description = detail::required<std::string>(j, "description", what);
  m.example_code = j.value("example", std::string{});
  m.category = category_from_string(detail::required<std::string>(j, "category", what));
  m.origin = origin_from_string(detail::required<std::string>(j, "origin", what));
  m.source = j.value("source", std::string{});
  return m;
}

inline Json to_json(const Problem& p, const SolutionSet* solutions) {
  Json j{{"id", p.id}, {"description", p.description}, {"tests", p.tests}};
  j["solutions"] = solutions ? Json(solutions->solutions) : Json::array();
  j["source"] = p.source;
  if (p.untested) j["untested"] = true;
  return j;
}

inline std::pair<Problem, SolutionSet> problem_from_json(const Json& j) {
  constexpr const char* what = "problem";
  Problem p;
  p.id = detail::required<std::string>(j, "id", what);
  p.description = detail::required<std::string>(j, "description", what);
  p.tests = j.contains("tests") ? detail::required<std::vector<std::string>>(j, "tests", what)
                                : std::vector<std::string>{};
  p.source = j.value("source", std::string{});
  p.untested = j.value("untested", false);
  SolutionSet s{p.id, j.contains("solutions")
                          ? detail::required<std::vector<std::string>>(j, "solutions", what)
                          : std::vector<std::string>{}};
  return {std::move(p), std::move(s)};
}

inline Json to_json(const ProblemCodePair& pair) {
  return Json{{"problem_id", pair.problem_id},
              {"code", pair.code},
              {"exhibits", detail::nullable(pair.exhibits)}};
}

inline Json to_json(const Bag& bag) {
  Json pairs = Json::array();
  for (const auto& p : bag.pairs) pairs.push_back(to_json(p));
  return Json{{"bag_id", bag.bag_id},
              {"gt_misconception_id", detail::nullable(bag.gt_label)},
              {"pairs", std::move(pairs)}};
}

inline Bag bag_from_json(const Json& j) {
  constexpr const char* what = "bag";
  Bag bag;
  bag.bag_id = detail::required<std::string>(j, "bag_id", what);
  bag.gt_label = detail::optional_string(j, "gt_misconception_id", what);
  if (!j.contains("pairs") || !j.at("pairs").is_array()) {
    throw ValidationError("bag " + bag.bag_id + ": \"pairs\" must be an array");
  }
  for (const auto& pj : j.at("pairs")) {
    ProblemCodePair pair;
    pair.problem_id = detail::required<std::string>(pj, "problem_id", "pair");
    pair.code = detail::required<std::string>(pj, "code", "pair");
    pair.exhibits = detail::optional_string(pj, "exhibits", "pair");
    bag.pairs.push_back(std::move(pair));
  }
  return bag;
}

inline Json to_json(const DatasetStats& s) {
  return Json{{"total_samples", s.total_samples},
              {"samples_exhibiting", s.samples_exhibiting},
              {"samples_clean", s.samples_clean},
              {"total_bags", s.total_bags},
              {"bags_with_misconception", s.bags_with_misconception},
              {"bags_correct_only", s.bags_correct_only}};
}

inline DatasetStats stats_from_json(const Json& j) {
  constexpr const char* what = "stats";
  DatasetStats s;
  s.total_samples = detail::required<std::uint64_t>(j, "total_samples", what);
  s.samples_exhibiting = detail::required<std::uint64_t>(j, "samples_exhibiting", what);
  s.samples_clean = detail::required<std::uint64_t>(j, "samples_clean", what);
  s.total_bags = detail::required<std::uint64_t>(j, "total_bags", what);
  s.bags_with_misconception = detail::required<std::uint64_t>(j, "bags_with_misconception", what);
  s.bags_correct_only = detail::required<std::uint64_t>(j, "bags_correct_only", what);
  return s;
}

inline Json to_json(const MiningPrediction& p) {
  if (const auto* f = found(p)) {
    return Json{{"description", f->description}, {"explanation", f->explanation}};
  }
  return Json(nullptr);
}

inline MiningPrediction prediction_from_json(const Json& j) {
  if (j.is_null()) return NoneFound{};
  return FoundMisconception{detail::required<std::string>(j, "description", "prediction"),
                            j.value("explanation", std::string{})};
}

inline Json to_json(const Reasoning& r) {
  if (const auto* b = std::get_if<ReasoningBudget>(&r)) {
    return Json{{"type", "budget"}, {"tokens", b->tokens}};
  }
  if (const auto* e = std::get_if<ReasoningEffort>(&r)) {
    return Json{{"type", "effort"}, {"level", to_string(e->level)}};
  }
  return Json{{"type", "off"}};
}

inline Reasoning reasoning_from_json(const Json& j) {
  const auto type = j.value("type", std::string{"off"});
  if (type == "off") return ReasoningOff{};
  if (type == "budget") return ReasoningBudget{detail::required<int>(j, "tokens", "reasoning")};
  if (type == "effort") {
    return ReasoningEffort{effort_from_string(detail::required<std::string>(j, "level", "reasoning"))};
  }
  throw ValidationError("unknown reasoning type '" + type + "'");
}

inline Json to_json(const ModelConfig& c) {
  return Json{{"id", c.id},
              {"provider", to_string(c.provider)},
              {"model_name", c.model_name},
              {"temperature", c.temperature},
              {"max_tokens", c.max_tokens},
              {"reasoning", to_json(c.reasoning)}};
}

inline ModelConfig model_config_from_json(const Json& j) {
  constexpr const char* what = "model config";
  ModelConfig c;
  c.id = detail::required<std::string>(j, "id", what);
  c.provider = provider_from_string(detail::required<std::string>(j, "provider", what));
  c.model_name = j.value("model_name", std::string{});
  c.temperature = j.value("temperature", 0.1);
  c.max_tokens = j.value("max_tokens", 4000);
  if (j.contains("reasoning")) c.reasoning = reasoning_from_json(j.at("reasoning"));
  validate_model_config(c);
  return c;
}

// ---------------------------------------------------------------------------
// files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

inline Json parse_json(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

/// Parses one JSON value per non-blank line.
inline std::vector<Json> parse_jsonl(const std::string& text, const std::string& where) {
  std::vector<Json> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim_view(line).empty()) continue;
    out.push_back(parse_json(line, where + ":" + std::to_string(lineno)));
  }
  return out;
}

template <typename Range, typename Fn>
std::string dump_jsonl(const Range& items, Fn&& to_line) {
  std::string out;
  for (const auto& item : items) {
    out += to_line(item).dump();
    out += '\n';
  }
  return out;
}

inline std::string dump_jsonl(const std::vector<Json>& items) {
  return dump_jsonl(items, [](const Json& j) -> const Json& { return j; });
}

inline std::map<std::string, Misconception> load_misconceptions(const std::filesystem::path& path) {
  const auto j = parse_json(read_file(path), path.string());
  if (!j.is_array()) throw ValidationError(path.string() + ": expected a JSON array");
  std::map<std::string, Misconception> out;
  for (const auto& item : j) {
    auto m = misconception_from_json(item);
    if (out.contains(m.id)) throw ValidationError("duplicate misconception id '" + m.id + "'");
    out.emplace(m.id, std::move(m));
  }
  return out;
}

inline std::string dump_misconceptions(const std::map<std::string, Misconception>& bank) {
  Json arr = Json::array();
  for (const auto& [_, m] : bank) arr.push_back(to_json(m));
  return arr.dump(2) + "\n";
}

struct ProblemBank {
  std::map<std::string, Problem> problems;
  std::map<std::string, SolutionSet> solutions;
};

inline ProblemBank load_problems(const std::filesystem::path& path) {
  ProblemBank bank;
  for (const auto& j : parse_jsonl(read_file(path), path.string())) {
    auto [p, s] = problem_from_json(j);
    if (bank.problems.contains(p.id)) throw ValidationError("duplicate problem id '" + p.id + "'");
    bank.solutions.emplace(p.id, std::move(s));
    bank.problems.emplace(p.id, std::move(p));
  }
  return bank;
}

inline std::string dump_problems(const std::map<std::string, Problem>& problems,
                                 const std::map<std::string, SolutionSet>& solutions) {
  std::string out;
  for (const auto& [id, p] : problems) {
    const auto it = solutions.find(id);
    out += to_json(p, it == solutions.end() ? nullptr : &it->second).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Bag> load_bags(const std::filesystem::path& path) {
  std::vector<Bag> bags;
  for (const auto& j : parse_jsonl(read_file(path), path.string())) bags.push_back(bag_from_json(j));
  return bags;
}

inline std::string dump_bags(const std::vector<Bag>& bags) {
  return dump_jsonl(bags, [](const Bag& b) { return to_json(b); });
}

inline Json dataset_header(const Dataset& d) {
  return Json{{"generation_seed", d.generation_seed},
              {"stats", to_json(d.stats)},
              {"files",
               {{"misconceptions", kMisconceptionsFile},
                {"problems", kProblemsFile},
                {"bags", kBagsFile}}}};
}

/// Writes the four canonical files into `dir`.
inline void write_dataset(const std::filesystem::path& dir, const Dataset& d) {
  std::filesystem::create_directories(dir);
  write_file(dir / kMisconceptionsFile, dump_misconceptions(d.misconceptions));
  write_file(dir / kProblemsFile, dump_problems(d.problems, d.solutions));
  write_file(dir / kBagsFile, dump_bags(d.bags));
  write_file(dir / kDatasetFile, dataset_header(d).dump(2) + "\n");
}

/// Accepts either the dataset.json path or the directory holding it.
inline Dataset load_dataset(std::filesystem::path path) {
  if (std::filesystem::is_directory(path)) path /= kDatasetFile;
  const auto header = parse_json(read_file(path), path.string());
  const auto dir = path.parent_path();
  const Json files = header.value("files", Json::object());
  Dataset d;
  d.generation_seed = detail::required<std::uint64_t>(header, "generation_seed", "dataset");
  if (!header.contains("stats")) throw ValidationError("dataset: missing field \"stats\"");
  d.stats = stats_from_json(header.at("stats"));
  d.misconceptions =
      load_misconceptions(dir / files.value("misconceptions", std::string{kMisconceptionsFile}));
  auto bank = load_problems(dir / files.value("problems", std::string{kProblemsFile}));
  d.problems = std::move(bank.problems);
  d.solutions = std::move(bank.solutions);
  d.bags = load_bags(dir / files.value("bags", std::string{kBagsFile}));
  return d;
}

}  // namespace mcmine
