#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "json.hpp"
#include "nmt/pipeline.hpp"
#include "synthetic.hpp"

using namespace nmt;
using nmt::testing::fixtures;
using nmt::testing::synthetic;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("nmt_pipeline_" + name);
  std::filesystem::remove_all(p);
  return p;
}

const SoftEntry* soft_for(const LabeledSplits& s, const std::string& id) {
  for (const auto& e : s.soft) {
    if (e.instance_id == id) return &e;
  }
  return nullptr;
}

const StrictEntry* strict_for(const LabeledSplits& s, const std::string& id) {
  for (const auto& e : s.strict) {
    if (e.instance_id == id) return &e;
  }
  return nullptr;
}

bool contains(const std::vector<std::string>& v, const std::string& id) {
  return std::find(v.begin(), v.end(), id) != v.end();
}

// Split laws against the scanned part of the corpus.
void expect_partition(const LabeledSplits& s, const std::vector<Instance>& corpus,
                      const std::vector<TeacherProgram>& teachers, double t) {
  std::set<std::string> refs;
  for (const auto& p : teachers) refs.insert(p.reference.id);
  std::set<std::string> strict_ids, unlabeled_ids(s.unlabeled.begin(), s.unlabeled.end()), scanned;
  for (const auto& e : s.strict) strict_ids.insert(e.instance_id);
  for (const auto& i : corpus) {
    if (!refs.count(i.id)) scanned.insert(i.id);
  }
  EXPECT_EQ(unlabeled_ids.size(), s.unlabeled.size());
  for (const auto& id : strict_ids) EXPECT_FALSE(unlabeled_ids.count(id)) << id;
  for (const auto& e : s.soft) {
    EXPECT_TRUE(unlabeled_ids.count(e.instance_id)) << e.instance_id;
    EXPECT_GT(e.z, t);
    EXPECT_LT(e.z, 1.0);
  }
  std::set<std::string> all = strict_ids;
  all.insert(unlabeled_ids.begin(), unlabeled_ids.end());
  EXPECT_EQ(all, scanned);
  EXPECT_EQ(strict_ids.size() + unlabeled_ids.size(), scanned.size());
}

}  // namespace

TEST(LabelCorpus, FixtureSplits) {
  const auto& f = fixtures();
  const auto s = label_corpus(f.teachers, f.corpus, {});
  ASSERT_EQ(s.strict.size(), 2u);
  const auto* ind = strict_for(s, "independence");
  ASSERT_TRUE(ind);
  EXPECT_EQ(f.instance("independence").answer_text(ind->span), "24 September 1973");
  const auto* music = strict_for(s, "music");
  ASSERT_TRUE(music);
  EXPECT_EQ(f.instance("music").answer_text(music->span), "1992");

  ASSERT_EQ(s.soft.size(), 2u);
  const auto* braz = soft_for(s, "brazelton");
  ASSERT_TRUE(braz);
  EXPECT_NEAR(braz->z, 0.9375, 1e-12);
  EXPECT_EQ(f.instance("brazelton").answer_text(braz->span), "Monday August 19, 1878");
  const auto* slavs = soft_for(s, "slavs");
  ASSERT_TRUE(slavs);
  EXPECT_NEAR(slavs->z, 0.9722, 5e-3);
  EXPECT_EQ(f.instance("slavs").answer_text(slavs->span), "Byzantine borders");

  // Reference instances stay out of every split.
  for (const auto& t : f.teachers) {
    EXPECT_FALSE(strict_for(s, t.reference.id));
    EXPECT_FALSE(contains(s.unlabeled, t.reference.id));
  }
  expect_partition(s, f.corpus, f.teachers, 0.6);
}

TEST(LabelCorpus, HighThresholdDropsBrazeltonFromSoftOnly) {
  const auto& f = fixtures();
  LabelConfig cfg;
  cfg.search.threshold = 0.99;
  const auto s = label_corpus(f.teachers, f.corpus, cfg);
  EXPECT_FALSE(soft_for(s, "brazelton"));
  EXPECT_TRUE(contains(s.unlabeled, "brazelton"));
  EXPECT_TRUE(s.soft.empty());
  EXPECT_EQ(s.strict.size(), 2u);
}

TEST(LabelCorpus, NoTeachersLeavesEverythingUnlabeled) {
  const auto& f = fixtures();
  const auto s = label_corpus({}, f.corpus, {});
  EXPECT_TRUE(s.strict.empty());
  EXPECT_TRUE(s.soft.empty());
  ASSERT_EQ(s.unlabeled.size(), f.corpus.size());
  for (std::size_t i = 0; i < f.corpus.size(); ++i) EXPECT_EQ(s.unlabeled[i], f.corpus[i].id);
}

TEST(LabelCorpus, StrictOnlyHasNoSoftSplit) {
  const auto& f = fixtures();
  LabelConfig cfg;
  cfg.strict_only = true;
  const auto s = label_corpus(f.teachers, f.corpus, cfg);
  EXPECT_TRUE(s.soft.empty());
  EXPECT_EQ(s.strict.size(), 2u);
  EXPECT_TRUE(contains(s.unlabeled, "brazelton"));
}

TEST(LabelCorpus, RejectsUnvalidatedTeacher) {
  auto teachers = fixtures().teachers;
  teachers[1].validated = false;
  EXPECT_THROW(label_corpus(teachers, fixtures().corpus, {}), PipelineError);
}

TEST(LabelCorpus, ThreadCountDoesNotChangeResult) {
  const auto& syn = synthetic();
  std::vector<Instance> part(syn.corpus.begin(), syn.corpus.begin() + 120);
  LabelConfig one, many;
  one.threads = 1;
  many.threads = 4;
  EXPECT_EQ(label_corpus(syn.teachers, part, one), label_corpus(syn.teachers, part, many));
}

TEST(LabelCorpus, RandomizedSplitLaws) {
  const auto& syn = synthetic();
  const double thresholds[] = {0.0, 0.5, 0.6, 0.75, 0.9, 0.99};
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<Instance> corpus = syn.corpus;
    std::shuffle(corpus.begin(), corpus.end(), rng);
    corpus.resize(40);
    std::vector<TeacherProgram> teachers;
    for (const auto& t : syn.teachers) {
      if (rng() % 2) teachers.push_back(t);
    }
    const double lo = thresholds[rng() % 6];
    const double hi = std::min(0.99, lo + 0.2);
    LabelConfig cl, ch;
    cl.search.threshold = lo;
    ch.search.threshold = hi;
    const auto sl = label_corpus(teachers, corpus, cl);
    const auto sh = label_corpus(teachers, corpus, ch);
    expect_partition(sl, corpus, teachers, lo);
    expect_partition(sh, corpus, teachers, hi);
    // Lowering t only grows S_p; S_a and S_u stay put.
    EXPECT_EQ(sl.strict, sh.strict) << seed;
    EXPECT_EQ(sl.unlabeled, sh.unlabeled) << seed;
    for (const auto& e : sh.soft) {
      EXPECT_NE(std::find(sl.soft.begin(), sl.soft.end(), e), sl.soft.end()) << seed << " " << e.instance_id;
    }
  }
}

TEST(LabelCorpus, AddingATeacherNeverShrinksStrict) {
  const auto& syn = synthetic();
  std::vector<Instance> corpus(syn.corpus.begin(), syn.corpus.begin() + 150);
  std::vector<TeacherProgram> teachers;
  std::set<std::string> previous;
  for (const auto& t : syn.teachers) {
    teachers.push_back(t);
    std::set<std::string> now;
    for (const auto& e : label_corpus(teachers, corpus, {}).strict) now.insert(e.instance_id);
    // The new teacher's reference leaves the scan.
    previous.erase(t.reference.id);
    EXPECT_TRUE(std::includes(now.begin(), now.end(), previous.begin(), previous.end()));
    previous = now;
  }
}

TEST(Export, FilesRoundTripAndAreByteStable) {
  const auto& f = fixtures();
  const auto s = label_corpus(f.teachers, f.corpus, {});
  const auto stats = compute_stats(s, f.corpus, f.teachers);
  const auto a = scratch("a"), b = scratch("b");
  export_splits(s, stats, f.corpus, a.string());
  export_splits(label_corpus(f.teachers, f.corpus, {}), stats, f.corpus, b.string());
  for (const auto& name : kSplitFiles) EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;

  const auto back = import_splits(a.string(), f.corpus);
  EXPECT_EQ(back.strict, s.strict);
  EXPECT_EQ(back.unlabeled, s.unlabeled);
  ASSERT_EQ(back.soft.size(), s.soft.size());
  for (std::size_t i = 0; i < s.soft.size(); ++i) {
    EXPECT_EQ(back.soft[i].instance_id, s.soft[i].instance_id);
    EXPECT_EQ(back.soft[i].span, s.soft[i].span);
    EXPECT_NEAR(back.soft[i].z, s.soft[i].z, 5e-7);
  }
  // Re-exporting the imported splits reproduces the files.
  const auto c = scratch("c");
  export_splits(back, stats, f.corpus, c.string());
  for (const auto& name : kSplitFiles) EXPECT_EQ(slurp(a / name), slurp(c / name)) << name;
}

TEST(Export, OffsetsPointAtTheAnswerText) {
  const auto& f = fixtures();
  const auto dir = scratch("offsets");
  const auto s = label_corpus(f.teachers, f.corpus, {});
  export_splits(s, compute_stats(s, f.corpus, f.teachers), f.corpus, dir.string());
  std::ifstream in(dir / "strict.jsonl");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto& inst = f.instance(j["instance_id"]);
    // Code-point offsets; the fixture contexts are ASCII.
    const auto& ctx = inst.context.source();
    const int a = j["char_start"], b = j["char_end"];
    EXPECT_EQ(ctx.substr(static_cast<std::size_t>(a), static_cast<std::size_t>(b - a)), j["answer_text"]);
    ++rows;
  }
  EXPECT_EQ(rows, 2);
  EXPECT_NE(slurp(dir / "soft.jsonl").find("\"z\":0.9375"), std::string::npos);
  EXPECT_NE(slurp(dir / "soft.jsonl").find("\"z\":0.972222"), std::string::npos);
}

TEST(Export, EmptySplits) {
  const auto dir = scratch("empty");
  export_splits({}, compute_stats({}, {}, {}), {}, dir.string());
  EXPECT_EQ(slurp(dir / "strict.jsonl"), "");
  EXPECT_EQ(slurp(dir / "soft.jsonl"), "");
  EXPECT_EQ(slurp(dir / "unlabeled.jsonl"), "");
  const auto stats = nlohmann::json::parse(slurp(dir / "stats.json"));
  EXPECT_EQ(stats["strict"], 0);
  EXPECT_EQ(stats["soft"], 0);
  EXPECT_EQ(stats["unlabeled"], 0);
  EXPECT_TRUE(stats["question_heads"].empty());
  EXPECT_EQ(import_splits(dir.string(), {}), LabeledSplits{});
}

TEST(Export, Errors) {
  const auto blocker = scratch("blocker");
  std::ofstream(blocker.string()) << "x";
  EXPECT_THROW(export_splits({}, {}, {}, (blocker / "sub").string()), PipelineError);
  EXPECT_THROW(import_splits(scratch("missing").string(), {}), PipelineError);
  const auto bad = scratch("bad");
  std::filesystem::create_directories(bad);
  std::ofstream(bad / "strict.jsonl") << "{\"instance_id\": \"nope\", \"char_start\": 0, \"char_end\": 1, \"teacher_id\": \"t\"}\n";
  std::ofstream(bad / "soft.jsonl") << "";
  std::ofstream(bad / "unlabeled.jsonl") << "";
  EXPECT_THROW(import_splits(bad.string(), fixtures().corpus), PipelineError);
}

TEST(Stats, QuestionHeads) {
  const auto& f = fixtures();
  LabeledSplits one;
  one.strict.push_back({"independence", Span{0, 0}, "t"});
  EXPECT_EQ(question_head_histogram(one, f.corpus), (std::map<std::string, double>{{"when was", 1.0}}));
  EXPECT_TRUE(question_head_histogram({}, f.corpus).empty());

  const auto s = label_corpus(f.teachers, f.corpus, {});
  // Hand count: "When was independence declared?" and "In what year did ...".
  EXPECT_EQ(question_head_histogram(s, f.corpus), (std::map<std::string, double>{{"in what", 0.5}, {"when was", 0.5}}));

  const auto stats = compute_stats(s, f.corpus, f.teachers);
  EXPECT_EQ(stats.strict, 2);
  EXPECT_EQ(stats.soft, 2);
  EXPECT_EQ(stats.unlabeled, 8);
  EXPECT_EQ(stats.per_teacher.size(), f.teachers.size());
  EXPECT_EQ(stats.per_teacher.at(f.teacher_for("funeral").id), (TeacherCounts{1, 1}));
  EXPECT_EQ(stats.per_teacher.at(f.teacher_for("hydrogen").id), (TeacherCounts{0, 0}));
}

TEST(Stats, SyntheticHeadsSumToOne) {
  const auto& syn = synthetic();
  std::vector<Instance> part(syn.corpus.begin(), syn.corpus.begin() + 100);
  const auto s = label_corpus(syn.teachers, part, {});
  double total = 0.0;
  for (const auto& [head, frac] : question_head_histogram(s, part)) total += frac;
  EXPECT_NEAR(total, 1.0, 1e-12);
}
