#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "nmt/supervision.hpp"
#include "synthetic.hpp"

using namespace nmt;
using nmt::testing::data_path;
using nmt::testing::synthetic;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::vector<double> numbers(const std::string& s) {
  std::vector<double> out;
  for (const auto& x : split(s, ',')) out.push_back(std::stod(x));
  return out;
}

// Instances whose answer is always the word right after "on".
std::vector<Instance> on_pattern(int n, std::uint64_t seed) {
  static const std::vector<std::string> days = {"Monday", "Tuesday", "Friday", "Sunday"};
  static const std::vector<std::string> events = {"meeting", "launch", "vote", "race", "auction"};
  static const std::vector<std::string> fillers = {"Nobody expected much .", "It rained all week .",
                                                   "Tickets sold out quickly ."};
  std::mt19937_64 rng(seed);
  std::vector<Instance> out;
  for (int i = 0; i < n; ++i) {
    const auto& ev = events[rng() % events.size()];
    const auto& day = days[rng() % days.size()];
    std::string ctx = fillers[rng() % fillers.size()] + " The " + ev + " took place on ";
    const int start = static_cast<int>(ctx.size());
    ctx += day + " . " + fillers[rng() % fillers.size()];
    out.push_back(make_instance("on-" + std::to_string(seed) + "-" + std::to_string(i), "When did the " + ev + " happen ?",
                                ctx, CharRange{start, start + static_cast<int>(day.size())}));
  }
  return out;
}

LabeledSplits strict_splits(const std::vector<Instance>& corpus) {
  LabeledSplits s;
  for (const auto& i : corpus) s.strict.push_back({i.id, *i.gold, "t"});
  return s;
}

}  // namespace

TEST(BatchWeights, MatchesHighPrecisionOracle) {
  std::ifstream in(data_path("golden/batch_weights.tsv"));
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    const auto cols = split(line, '\t');
    ASSERT_EQ(cols.size(), 3u);
    const auto w = batch_weights(numbers(cols[1]), std::stod(cols[0]));
    const auto expected = numbers(cols[2]);
    ASSERT_EQ(w.size(), expected.size());
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w[i], expected[i], 1e-12) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 10);
  const auto w = batch_weights({1.0, 0.5}, 2.0);
  EXPECT_NEAR(w[0], 0.731059, 1e-5);
  EXPECT_NEAR(w[1], 0.268941, 1e-5);
}

TEST(BatchWeights, Properties) {
  EXPECT_EQ(batch_weights({0.2, 0.4, 0.6, 0.8}, 0.0), (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
  EXPECT_EQ(batch_weights({0.9, 0.9}, 7.0), (std::vector<double>{0.5, 0.5}));
  EXPECT_THROW(batch_weights({}, 1.0), DomainError);
  EXPECT_THROW(batch_weights({0.5, 1.2}, 1.0), DomainError);
  EXPECT_THROW(batch_weights({std::nan("")}, 1.0), DomainError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(1 + rng() % 8);
    for (auto& v : z) v = u(rng);
    const double theta = 20.0 * u(rng);
    const auto w = batch_weights(z, theta);
    double sum = 0.0;
    for (double v : w) {
      EXPECT_GT(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    for (std::size_t i = 0; i < z.size(); ++i) {
      for (std::size_t j = 0; j < z.size(); ++j) {
        if (z[i] > z[j] && theta > 0) EXPECT_GT(w[i], w[j]);
      }
    }
    // Permutation equivariance.
    std::vector<std::size_t> perm(z.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> zp;
    for (auto p : perm) zp.push_back(z[p]);
    const auto wp = batch_weights(zp, theta);
    for (std::size_t k = 0; k < perm.size(); ++k) EXPECT_NEAR(wp[k], w[perm[k]], 1e-15);
    // Vanishing temperature approaches uniform.
    for (double v : batch_weights(z, 1e-12)) EXPECT_NEAR(v, 1.0 / static_cast<double>(z.size()), 1e-11);
  }
}

TEST(Blend, Arithmetic) {
  EXPECT_EQ(blended_loss(1.0, 2.0, 0.5), 2.0);
  EXPECT_EQ(blended_loss(1.5, 9.0, 0.0), 1.5);
  EXPECT_EQ(blended_loss(0.0, 0.0, 0.3), 0.0);
}

TEST(Rotation, OneSoftStepPerWindow) {
  EXPECT_EQ(rotation_schedule(7, 8), BatchKind::Unlabeled);
  EXPECT_EQ(rotation_schedule(8, 8), BatchKind::Soft);
  EXPECT_EQ(rotation_schedule(17, 8), BatchKind::Soft);
  EXPECT_EQ(rotation_schedule(0, 1), BatchKind::Unlabeled);
  EXPECT_EQ(rotation_schedule(1, 1), BatchKind::Soft);
  EXPECT_EQ(rotation_schedule(2, 1), BatchKind::Unlabeled);
  for (int r = 1; r <= 16; ++r) {
    for (long offset = 0; offset < 3L * (r + 1); ++offset) {
      int soft = 0;
      for (long s = offset; s < offset + r + 1; ++s) soft += rotation_schedule(s, r) == BatchKind::Soft;
      EXPECT_EQ(soft, 1) << "r=" << r << " offset=" << offset;
    }
  }
  EXPECT_THROW(rotation_schedule(-1, 8), DomainError);
  EXPECT_THROW(rotation_schedule(0, 0), DomainError);
}

TEST(MrcLoss, UniformWeightsAreTheMean) {
  const auto corpus = on_pattern(5, 1);
  std::vector<Example> batch;
  for (const auto& i : corpus) batch.push_back({&i, *i.gold});
  Student s;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.3);
  for (auto& w : s.w_start) w = g(rng);
  for (auto& w : s.w_end) w = g(rng);

  const auto weighted = mrc_loss(s, batch, batch_weights(std::vector<double>(batch.size(), 0.8), 2.0));
  const auto plain = mrc_loss(s, batch, std::vector<double>(batch.size(), 1.0 / 5.0));
  EXPECT_EQ(weighted.loss, plain.loss);
  EXPECT_EQ(weighted.g_start, plain.g_start);
  EXPECT_EQ(weighted.g_end, plain.g_end);

  double mean = 0.0;
  for (const auto& ex : batch) mean += mrc_loss(s, {ex}, {1.0}).loss / 5.0;
  EXPECT_NEAR(plain.loss, mean, 1e-12);
  EXPECT_EQ(mrc_loss(s, batch, {1, 0, 0, 0, 0}).loss, mrc_loss(s, {batch[0]}, {1.0}).loss);
}

TEST(MrcLoss, GradientMatchesFiniteDifferences) {
  const auto& syn = synthetic();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 0.5);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  double worst = 0.0;
  for (int config = 0; config < 20; ++config) {
    const std::size_t n = 1 + rng() % 4;
    std::vector<Example> batch;
    std::vector<double> weights;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& inst = syn.corpus[rng() % syn.corpus.size()];
      const int a = static_cast<int>(rng() % static_cast<std::uint64_t>(inst.context.size()));
      const int b = std::min(inst.context.size() - 1, a + static_cast<int>(rng() % 3));
      batch.push_back({&inst, Span{a, b}});
      weights.push_back(u(rng));
    }
    double total = 0.0;
    for (double w : weights) total += w;
    for (auto& w : weights) w /= total;

    Student s;
    std::set<int> touched_start, touched_end;
    for (const auto& ex : batch) {
      const auto f = extract_features(*ex.instance);
      for (const auto& fs : f.start) touched_start.insert(fs.begin(), fs.end());
      for (const auto& fe : f.end) touched_end.insert(fe.begin(), fe.end());
    }
    for (int i : touched_start) s.w_start[static_cast<std::size_t>(i)] = g(rng);
    for (int i : touched_end) s.w_end[static_cast<std::size_t>(i)] = g(rng);

    const auto analytic = mrc_loss(s, batch, weights);
    auto check = [&](std::vector<double> Student::*w, const std::vector<double>& grad, const std::set<int>& idx) {
      int probed = 0;
      for (int i : idx) {
        if (probed++ == 12) break;
        const double h = 1e-5;
        Student plus = s, minus = s;
        (plus.*w)[static_cast<std::size_t>(i)] += h;
        (minus.*w)[static_cast<std::size_t>(i)] -= h;
        const double fd = (mrc_loss(plus, batch, weights).loss - mrc_loss(minus, batch, weights).loss) / (2 * h);
        const double a = grad[static_cast<std::size_t>(i)];
        const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-3});
        worst = std::max(worst, rel);
        EXPECT_LT(rel, 1e-4) << "config " << config << " index " << i << " analytic " << a << " fd " << fd;
      }
    };
    check(&Student::w_start, analytic.g_start, touched_start);
    check(&Student::w_end, analytic.g_end, touched_end);
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(MrcLoss, Errors) {
  const auto corpus = on_pattern(2, 2);
  Student s;
  EXPECT_THROW(mrc_loss(s, {{&corpus[0], Span{0, 999}}}, {1.0}), TrainingError);
  EXPECT_THROW(mrc_loss(s, {{&corpus[0], *corpus[0].gold}}, {0.5, 0.5}), TrainingError);
}

TEST(PseudoLabel, UntrainedStudentPicksFirstSpan) {
  const auto corpus = on_pattern(3, 4);
  Student s;
  const auto labels = pseudo_label(s, {&corpus[0], &corpus[1]});
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels[0].target, (Span{0, 0}));
  EXPECT_TRUE(pseudo_label(s, {}).empty());
}

TEST(PseudoLabel, LearnsTheWordAfterOn) {
  const auto train = on_pattern(30, 5);
  TrainConfig cfg;
  cfg.epochs = 8;
  const auto s = train_student(strict_splits(train), train, cfg, TrainMode::SaOnly);
  const auto held = on_pattern(10, 6);
  std::vector<const Instance*> ptrs;
  for (const auto& i : held) ptrs.push_back(&i);
  for (const auto& ex : pseudo_label(s, ptrs)) {
    ASSERT_GT(ex.target.start, 0);
    EXPECT_EQ(ex.instance->context[static_cast<std::size_t>(ex.target.start - 1)].lower, "on") << ex.instance->id;
    EXPECT_EQ(ex.target, *ex.instance->gold);
  }
}

TEST(Train, ZeroEpochsAndDeterminism) {
  const auto train = on_pattern(12, 7);
  const auto splits = strict_splits(train);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto untrained = train_student(splits, train, cfg, TrainMode::Da);
  EXPECT_EQ(untrained.steps, 0);
  EXPECT_TRUE(std::all_of(untrained.w_start.begin(), untrained.w_start.end(), [](double w) { return w == 0.0; }));

  cfg.epochs = 3;
  LabeledSplits mixed = splits;
  mixed.soft.push_back({train[0].id, *train[0].gold, 0.8, "t"});
  mixed.unlabeled = {train[1].id, train[2].id};
  for (auto mode : {TrainMode::SaOnly, TrainMode::Da, TrainMode::DaPlusPl}) {
    const auto a = train_student(mixed, train, cfg, mode);
    const auto b = train_student(mixed, train, cfg, mode);
    EXPECT_EQ(a.w_start, b.w_start);
    EXPECT_EQ(a.w_end, b.w_end);
    EXPECT_GT(a.steps, 0);
  }
  EXPECT_THROW(train_student({}, train, cfg, TrainMode::SaOnly), TrainingError);
}

TEST(Train, SoftBatchesChangeTheStudent) {
  const auto train = on_pattern(12, 8);
  LabeledSplits splits = strict_splits(train);
  for (int i = 0; i < 4; ++i) splits.soft.push_back({train[static_cast<std::size_t>(i)].id, Span{0, 0}, 0.7, "t"});
  TrainConfig cfg;
  cfg.epochs = 2;
  EXPECT_NE(train_student(splits, train, cfg, TrainMode::SaOnly).w_start,
            train_student(splits, train, cfg, TrainMode::Da).w_start);
}

TEST(Train, ConfigAndModelFiles) {
  auto c = train_config_from_json(R"({"theta": 4.0, "beta": 0.1, "rotation": 3})");
  EXPECT_EQ(c.theta, 4.0);
  EXPECT_EQ(c.rotation, 3);
  EXPECT_EQ(c.epochs, TrainConfig{}.epochs);
  EXPECT_EQ(train_config_from_json(train_config_json(c)).beta, 0.1);
  EXPECT_THROW(train_config_from_json("{\"gamma\": 1}"), TrainingError);
  EXPECT_THROW(train_config_from_json("{\"rotation\": 0}"), TrainingError);
  EXPECT_THROW(train_config_from_json("[1]"), TrainingError);
  EXPECT_THROW(train_mode_from_string("pl"), TrainingError);
  EXPECT_EQ(train_mode_from_string("da+pl"), TrainMode::DaPlusPl);

  const auto train = on_pattern(6, 9);
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto s = train_student(strict_splits(train), train, cfg, TrainMode::SaOnly);
  const auto back = student_from_json(student_json(s));
  EXPECT_EQ(back.w_start, s.w_start);
  EXPECT_EQ(back.w_end, s.w_end);
  EXPECT_EQ(back.steps, s.steps);
  EXPECT_THROW(student_from_json("{}"), TrainingError);
}

TEST(Evaluate, OracleFixture) {
  std::ifstream in(data_path("golden/eval_expected.tsv"));
  std::string line;
  std::map<std::string, std::string> preds;
  std::map<std::string, std::vector<std::string>> gold;
  int n = 0;
  while (std::getline(in, line)) {
    const auto cols = split(line, '\t');
    ASSERT_EQ(cols.size(), 4u) << line;
    if (cols[0] == "MEAN") {
      const auto m = evaluate(preds, gold);
      EXPECT_NEAR(m.exact_match, std::stod(cols[2]), 1e-6);
      EXPECT_NEAR(m.f1, std::stod(cols[3]), 1e-6);
      continue;
    }
    const auto golds = split(cols[1], '|');
    const auto id = "case" + std::to_string(n++);
    preds[id] = cols[0];
    gold[id] = golds;
    const auto one = evaluate({{id, cols[0]}}, {{id, golds}});
    EXPECT_NEAR(one.exact_match, std::stod(cols[2]), 1e-6) << line;
    EXPECT_NEAR(one.f1, std::stod(cols[3]), 1e-6) << line;
  }
  EXPECT_EQ(n, 20);
}

TEST(Evaluate, NamedCases) {
  EXPECT_NEAR(f1_score("2 February", "Saturday, 2 February"), 0.8, 1e-12);
  EXPECT_EQ(exact_match("2 February", "Saturday, 2 February"), 0.0);
  EXPECT_EQ(exact_match("The 1995", "1995"), 1.0);
  EXPECT_EQ(normalize_answer("  The  Music, of the Night! "), "music of night");
  const auto m = evaluate({{"q", "x y"}}, {{"q", {"x y"}}});
  EXPECT_EQ(m.exact_match, 100.0);
  EXPECT_EQ(m.f1, 100.0);
  EXPECT_THROW(evaluate({{"q", "x"}}, {}), EvaluationError);
}

TEST(Evaluate, SymmetricInArguments) {
  std::ifstream in(data_path("golden/eval_expected.tsv"));
  std::string line;
  while (std::getline(in, line)) {
    const auto cols = split(line, '\t');
    if (cols[0] == "MEAN") continue;
    for (const auto& g : split(cols[1], '|')) {
      EXPECT_EQ(exact_match(cols[0], g), exact_match(g, cols[0]));
      EXPECT_DOUBLE_EQ(f1_score(cols[0], g), f1_score(g, cols[0]));
    }
  }
}

TEST(Directional, DaAtLeastSaInFourOfFiveSeeds) {
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = nmt::testing::directional_run(seed);
    EXPECT_GT(r.strict, 0u);
    EXPECT_GT(r.soft, 0u);
    wins += r.da.f1 >= r.sa.f1;
  }
  EXPECT_GE(wins, 4);
}
