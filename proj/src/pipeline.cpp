#include "nmt/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>
#include <unordered_map>

#include "json.hpp"

namespace nmt {

using ordered_json = nlohmann::ordered_json;

namespace {

struct Outcome {
  enum class Kind { Skip, Strict, Soft, Unlabeled } kind = Kind::Unlabeled;
  std::optional<EnsembleAnswer> answer;
};

double round6(double z) { return std::round(z * 1e6) / 1e6; }

const Instance& find_instance(const std::unordered_map<std::string, const Instance*>& index, const std::string& id) {
  auto it = index.find(id);
  if (it == index.end()) throw PipelineError("unknown instance " + id);
  return *it->second;
}

std::unordered_map<std::string, const Instance*> index_corpus(const std::vector<Instance>& corpus) {
  std::unordered_map<std::string, const Instance*> index;
  for (const auto& inst : corpus) index.emplace(inst.id, &inst);
  return index;
}

}  // namespace

LabeledSplits label_corpus(const std::vector<TeacherProgram>& programs, const std::vector<Instance>& corpus,
                           const LabelConfig& config) {
  std::set<std::string> references;
  for (const auto& p : programs) {
    if (!p.validated) throw PipelineError("teacher " + p.id + " is not validated");
    references.insert(p.reference.id);
  }
  SearchConfig search = config.strict_only ? strict_config(config.search) : config.search;

  std::vector<Outcome> outcomes(corpus.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < corpus.size(); i = next++) {
      if (references.count(corpus[i].id)) {
        outcomes[i].kind = Outcome::Kind::Skip;
        continue;
      }
      auto a = ensemble_answer(programs, corpus[i], search);
      if (a && a->z == 1.0) {
        outcomes[i] = {Outcome::Kind::Strict, a};
      } else if (a && a->z > search.threshold) {
        outcomes[i] = {Outcome::Kind::Soft, a};
      }
    }
  };
  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(corpus.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  LabeledSplits out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& o = outcomes[i];
    const auto& id = corpus[i].id;
    switch (o.kind) {
      case Outcome::Kind::Skip: break;
      case Outcome::Kind::Strict: out.strict.push_back({id, o.answer->span, o.answer->teacher_id}); break;
      case Outcome::Kind::Soft:
        out.unlabeled.push_back(id);
        out.soft.push_back({id, o.answer->span, o.answer->z, o.answer->teacher_id});
        break;
      case Outcome::Kind::Unlabeled: out.unlabeled.push_back(id); break;
    }
  }
  return out;
}

std::map<std::string, double> question_head_histogram(const LabeledSplits& splits,
                                                      const std::vector<Instance>& corpus) {
  const auto index = index_corpus(corpus);
  std::map<std::string, int> counts;
  for (const auto& e : splits.strict) {
    const auto& q = find_instance(index, e.instance_id).question;
    std::string head;
    for (int i = 0; i < std::min(2, q.size()); ++i) head += (i ? " " : "") + q[static_cast<std::size_t>(i)].lower;
    ++counts[head];
  }
  std::map<std::string, double> out;
  for (const auto& [head, n] : counts) out[head] = static_cast<double>(n) / static_cast<double>(splits.strict.size());
  return out;
}

RunStats compute_stats(const LabeledSplits& splits, const std::vector<Instance>& corpus,
                       const std::vector<TeacherProgram>& programs) {
  RunStats s;
  s.strict = static_cast<int>(splits.strict.size());
  s.soft = static_cast<int>(splits.soft.size());
  s.unlabeled = static_cast<int>(splits.unlabeled.size());
  for (const auto& p : programs) s.per_teacher[p.id];
  for (const auto& e : splits.strict) ++s.per_teacher[e.teacher_id].strict;
  for (const auto& e : splits.soft) ++s.per_teacher[e.teacher_id].soft;
  s.question_heads = question_head_histogram(splits, corpus);
  return s;
}

namespace {

ordered_json span_json(const Instance& inst, const std::string& id, const Span& span) {
  const auto chars = inst.char_range(span);
  ordered_json j;
  j["instance_id"] = id;
  j["answer_text"] = inst.answer_text(span);
  j["char_start"] = chars.start;
  j["char_end"] = chars.end;
  return j;
}

void write_lines(const std::filesystem::path& path, const std::vector<ordered_json>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) throw PipelineError("write failed: " + path.string());
}

std::vector<ordered_json> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("cannot read " + path.string());
  std::vector<ordered_json> rows;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      rows.push_back(ordered_json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw PipelineError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace

void export_splits(const LabeledSplits& splits, const RunStats& stats, const std::vector<Instance>& corpus,
                   const std::string& dir) {
  const auto index = index_corpus(corpus);
  std::filesystem::path root(dir);
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw PipelineError("cannot create " + dir + ": " + ec.message());

  std::vector<ordered_json> strict, soft, unlabeled;
  for (const auto& e : splits.strict) {
    auto j = span_json(find_instance(index, e.instance_id), e.instance_id, e.span);
    j["teacher_id"] = e.teacher_id;
    strict.push_back(std::move(j));
  }
  for (const auto& e : splits.soft) {
    auto j = span_json(find_instance(index, e.instance_id), e.instance_id, e.span);
    j["teacher_id"] = e.teacher_id;
    j["z"] = round6(e.z);
    soft.push_back(std::move(j));
  }
  for (const auto& id : splits.unlabeled) unlabeled.push_back(ordered_json{{"instance_id", id}});
  write_lines(root / "strict.jsonl", strict);
  write_lines(root / "soft.jsonl", soft);
  write_lines(root / "unlabeled.jsonl", unlabeled);

  std::ofstream out(root / "stats.json", std::ios::binary);
  if (!out) throw PipelineError("cannot write " + (root / "stats.json").string());
  out << stats_json(stats) << '\n';
}

std::string stats_json(const RunStats& stats) {
  ordered_json st;
  st["strict"] = stats.strict;
  st["soft"] = stats.soft;
  st["unlabeled"] = stats.unlabeled;
  st["per_teacher"] = ordered_json::object();
  for (const auto& [id, c] : stats.per_teacher) st["per_teacher"][id] = {{"strict", c.strict}, {"soft", c.soft}};
  st["question_heads"] = ordered_json::object();
  for (const auto& [head, f] : stats.question_heads) st["question_heads"][head] = round6(f);
  return st.dump(2);
}

RunStats label_and_export(const std::vector<TeacherProgram>& programs, const std::vector<Instance>& corpus,
                          const LabelConfig& config, const std::string& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto splits = label_corpus(programs, corpus, config);
  auto stats = compute_stats(splits, corpus, programs);
  export_splits(splits, stats, corpus, dir);
  stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

std::optional<Span> span_from_chars(const Instance& instance, int char_start, int char_end) {
  const auto& toks = instance.context.tokens();
  auto first = std::find_if(toks.begin(), toks.end(), [&](const Token& t) { return t.char_start == char_start; });
  auto last = std::find_if(toks.begin(), toks.end(), [&](const Token& t) { return t.char_end == char_end; });
  if (first == toks.end() || last == toks.end() || last < first) return std::nullopt;
  return Span{static_cast<int>(first - toks.begin()), static_cast<int>(last - toks.begin())};
}

LabeledSplits import_splits(const std::string& dir, const std::vector<Instance>& corpus) {
  const auto index = index_corpus(corpus);
  const std::filesystem::path root(dir);
  auto span_of = [&](const ordered_json& j) {
    const auto& id = j.at("instance_id").get_ref<const std::string&>();
    auto s = span_from_chars(find_instance(index, id), j.at("char_start").get<int>(), j.at("char_end").get<int>());
    if (!s) throw PipelineError("offsets of " + id + " do not align with tokens");
    return *s;
  };
  LabeledSplits out;
  try {
    for (const auto& j : read_lines(root / "strict.jsonl")) {
      out.strict.push_back({j.at("instance_id").get<std::string>(), span_of(j), j.at("teacher_id").get<std::string>()});
    }
    for (const auto& j : read_lines(root / "soft.jsonl")) {
      out.soft.push_back({j.at("instance_id").get<std::string>(), span_of(j), j.at("z").get<double>(),
                          j.at("teacher_id").get<std::string>()});
    }
    for (const auto& j : read_lines(root / "unlabeled.jsonl")) {
      out.unlabeled.push_back(j.at("instance_id").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw PipelineError(std::string("malformed split file: ") + e.what());
  }
  return out;
}

}  // namespace nmt
