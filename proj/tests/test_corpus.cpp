#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "nmt/corpus.hpp"

using namespace nmt;

namespace {

std::vector<std::string> texts(const TokenSeq& seq) {
  std::vector<std::string> out;
  for (const auto& t : seq.tokens()) out.push_back(t.text);
  return out;
}

Span find_phrase(const TokenSeq& seq, std::string_view phrase) {
  const auto key = tokenize_lower(phrase);
  auto hits = find_token_matches(seq, key, SentenceRange{0, seq.size()});
  EXPECT_FALSE(hits.empty()) << "phrase not found: " << phrase;
  return hits.empty() ? Span{} : hits.front();
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  auto p = std::filesystem::temp_directory_path() / ("nmt_test_" + name);
  std::ofstream(p) << content;
  return p;
}

}  // namespace

TEST(Tokenize, FuneralSentence) {
  auto seq = tokenize("Her funeral was held on Saturday, 2 February");
  ASSERT_EQ(seq.size(), 9);
  EXPECT_EQ(seq[6].text, ",");
  EXPECT_EQ(seq[6].pos, Pos::PUNCT);
  EXPECT_EQ(seq[1].lower, "funeral");
}

TEST(Tokenize, EmptyAndYear) {
  EXPECT_TRUE(tokenize("").empty());
  auto seq = tokenize("1878");
  ASSERT_EQ(seq.size(), 1);
  EXPECT_EQ(seq[0].pos, Pos::NUM);
  EXPECT_EQ(seq[0].shape, "dddd");
}

TEST(Tokenize, PunctuationAndJoiners) {
  EXPECT_EQ(texts(tokenize("St George's Chapel, Windsor Castle.")),
            (std::vector<std::string>{"St", "George", "'s", "Chapel", ",", "Windsor", "Castle", "."}));
  EXPECT_EQ(texts(tokenize("lying-in-state (1,200 people)")),
            (std::vector<std::string>{"lying-in-state", "(", "1,200", "people", ")"}));
  EXPECT_EQ(texts(tokenize("Where is hydrogen highly soluble?")),
            (std::vector<std::string>{"Where", "is", "hydrogen", "highly", "soluble", "?"}));
}

TEST(Tokenize, RoundTripOnRandomText) {
  std::mt19937 rng(7);
  const std::string alphabet = "ab Z9,.;'\"-()\t\n é€";
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const int n = rng() % 40;
    for (int i = 0; i < n; ++i) {
      // keep multi-byte characters intact
      const auto pick = rng() % 18;
      if (pick == 16) s += "é";
      else if (pick == 17) s += "€";
      else s += alphabet[pick];
    }
    auto seq = tokenize(s);
    EXPECT_EQ(seq.detokenize(), s);
    for (const auto& t : seq.tokens()) EXPECT_LT(t.char_start, t.char_end);
  }
}

TEST(Tokenize, CodePointOffsets) {
  auto seq = tokenize("café 1995");
  ASSERT_EQ(seq.size(), 2);
  EXPECT_EQ(seq[1].char_start, 5);
  EXPECT_EQ(seq[1].byte_start, 6);
}

TEST(Gap, CountingConvention) {
  auto seq = tokenize("Her funeral was held on Saturday");
  EXPECT_EQ(gap(Span{1, 1}, Span{3, 3}), 1);
  auto braz = tokenize("Brazelton was eventually tracked down and killed on Monday August 19, 1878");
  EXPECT_EQ(gap(find_phrase(braz, "Brazelton"), find_phrase(braz, "killed")), 5);
  EXPECT_EQ(gap(Span{2, 2}, Span{3, 4}), 0);
  EXPECT_THROW(gap(Span{3, 3}, Span{1, 1}), OrderError);
  EXPECT_THROW(gap(Span{1, 3}, Span{3, 4}), OrderError);
  (void)seq;
}

TEST(Gap, ShiftInvariant) {
  for (int a = 0; a < 5; ++a) {
    for (int b = a + 1; b < 10; ++b) {
      for (int k = 0; k < 7; ++k) EXPECT_EQ(gap(Span{a, a}, Span{b, b + 1}), gap(Span{a + k, a + k}, Span{b + k, b + k + 1}));
    }
  }
}

TEST(Candidates, Enumeration) {
  auto seq = tokenize("alpha beta gamma");
  auto c = enumerate_candidates(seq, 2);
  EXPECT_EQ(c, (std::vector<Span>{{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}}));
  EXPECT_TRUE(enumerate_candidates(tokenize(""), 3).empty());
}

TEST(Candidates, ContainsBrazeltonDate) {
  auto seq = tokenize("Brazelton was eventually tracked down and killed on Monday August 19, 1878, in a mesquite bosque");
  auto c = enumerate_candidates(seq, 6);
  const auto want = find_phrase(seq, "Monday August 19 , 1878");
  EXPECT_NE(std::find(c.begin(), c.end(), want), c.end());
}

TEST(Candidates, BoundaryFilterAndBound) {
  auto seq = tokenize("The cat, the dog and a bird sat on the mat.");
  const int max_len = 4;
  auto c = enumerate_candidates(seq, max_len);
  EXPECT_LE(static_cast<int>(c.size()), seq.size() * max_len);
  for (const auto& s : c) {
    EXPECT_NE(seq[s.start].pos, Pos::PUNCT);
    EXPECT_NE(seq[s.end].pos, Pos::PUNCT);
    EXPECT_NE(seq[s.end].pos, Pos::DET);
    EXPECT_LE(s.length(), max_len);
  }
  EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
}

TEST(AnswerTypes, WorkedExamples) {
  auto a = tokenize("24 September 1973");
  EXPECT_TRUE(classify_answer_type(a, Span{0, 2}).contains(AnswerType::DATE));
  auto y = tokenize("1992");
  auto ty = classify_answer_type(y, Span{0, 0});
  EXPECT_TRUE(ty.contains(AnswerType::YEAR));
  EXPECT_TRUE(ty.contains(AnswerType::DATE));
  auto g = tokenize("German rule");
  auto tg = classify_answer_type(g, Span{0, 1});
  EXPECT_FALSE(tg.contains(AnswerType::DATE));
  EXPECT_FALSE(tg.contains(AnswerType::NUMBER));
  EXPECT_FALSE(tg.contains(AnswerType::PERCENT));
}

TEST(AnswerTypes, MoreShapes) {
  auto d = tokenize("Monday August 19, 1878");
  EXPECT_TRUE(classify_answer_type(d, Span{0, d.size() - 1}).contains(AnswerType::DATE));
  auto s = tokenize("Saturday, 2 February");
  EXPECT_TRUE(classify_answer_type(s, Span{0, s.size() - 1}).contains(AnswerType::DATE));
  auto p = tokenize("45 %");
  EXPECT_TRUE(classify_answer_type(p, Span{0, 1}).contains(AnswerType::PERCENT));
  auto n = tokenize("1,200");
  EXPECT_TRUE(classify_answer_type(n, Span{0, 0}).contains(AnswerType::NUMBER));
  auto c = tokenize("the 6th century");
  EXPECT_TRUE(classify_answer_type(c, Span{0, 2}).contains(AnswerType::YEAR));
  auto o = tokenize("quickly running");
  EXPECT_EQ(classify_answer_type(o, Span{0, 1}), AnswerTypes{AnswerType::OTHER});
}

TEST(AnswerTypes, YearImpliesDate) {
  const char* samples[] = {"1995", "in 1343", "the 1990s", "the 6th century", "1066 AD", "2 February 1901",
                           "Slavs", "German rule", "45 percent", "three", "Windsor Castle"};
  for (const auto* text : samples) {
    auto seq = tokenize(text);
    for (int i = 0; i < seq.size(); ++i) {
      for (int j = i; j < seq.size(); ++j) {
        auto t = classify_answer_type(seq, Span{i, j});
        if (t.contains(AnswerType::YEAR)) EXPECT_TRUE(t.contains(AnswerType::DATE)) << text;
        if (t.contains(AnswerType::OTHER)) EXPECT_EQ(t.size(), 1u) << text;
      }
    }
  }
}

TEST(Instance, GoldAlignmentAndSnapping) {
  const std::string ctx = "The Film Fest New Haven has been held annually since 1995.";
  const int at = static_cast<int>(ctx.find("1995"));
  auto inst = make_instance("a", "In what year did Film Fest New Haven begin?", ctx, CharRange{at, at + 4});
  ASSERT_TRUE(inst.gold);
  EXPECT_EQ(inst.answer_text(*inst.gold), "1995");
  EXPECT_FALSE(inst.gold_snapped);
  EXPECT_EQ(inst.char_range(*inst.gold), (CharRange{at, at + 4}));

  auto snapped = make_instance("b", "q", ctx, CharRange{at + 1, at + 3});
  ASSERT_TRUE(snapped.gold);
  EXPECT_TRUE(snapped.gold_snapped);
  EXPECT_EQ(snapped.answer_text(*snapped.gold), "1995");

  std::vector<IngestWarning> warnings;
  auto outside = make_instance("c", "q", ctx, CharRange{500, 504}, &warnings);
  EXPECT_FALSE(outside.gold);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Instance, SquadLoading) {
  const std::string squad = R"({"version": "1.1", "data": [{"title": "t", "paragraphs": [{
    "context": "The Film Fest New Haven has been held annually since 1995.",
    "qas": [{"id": "q1", "question": "In what year did Film Fest New Haven begin?",
             "answers": [{"text": "1995", "answer_start": 53}]},
            {"id": "q2", "question": "Mid token?", "answers": [{"text": "95", "answer_start": 55}]},
            {"id": "q3", "question": "Wrong text?", "answers": [{"text": "zzz", "answer_start": 0}]}]}]}]})";
  auto path = temp_file("squad.json", squad);
  std::vector<IngestWarning> warnings;
  auto corpus = load_squad(path.string(), &warnings);
  ASSERT_EQ(corpus.size(), 3u);
  ASSERT_TRUE(corpus[0].gold);
  EXPECT_EQ(corpus[0].answer_text(*corpus[0].gold), "1995");
  ASSERT_TRUE(corpus[1].gold);
  EXPECT_TRUE(corpus[1].gold_snapped);
  EXPECT_EQ(corpus[1].answer_text(*corpus[1].gold), "1995");
  EXPECT_FALSE(corpus[2].gold);
  EXPECT_FALSE(warnings.empty());

  auto bad = temp_file("bad.json", "{\"data\": [1, 2,");
  try {
    load_squad(bad.string());
    FAIL() << "expected IngestError";
  } catch (const IngestError& e) {
    EXPECT_NE(std::string(e.what()).find(bad.string()), std::string::npos);
  }
}

TEST(Instance, JsonlRoundTrip) {
  std::vector<Instance> corpus;
  corpus.push_back(make_instance("x1", "When was independence declared?",
                                 "Independence was declared on 24 September 1973.", CharRange{29, 46}));
  corpus.push_back(make_instance("x2", "Who?", "Nobody knows.", std::nullopt));
  auto path = std::filesystem::temp_directory_path() / "nmt_test_roundtrip.jsonl";
  save_corpus_jsonl(corpus, path.string());
  auto back = load_corpus(path.string());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].id, "x1");
  ASSERT_TRUE(back[0].gold);
  EXPECT_EQ(back[0].answer_text(*back[0].gold), "24 September 1973");
  EXPECT_FALSE(back[1].gold);
  EXPECT_EQ(back[1].context.source(), "Nobody knows.");
}

TEST(Sentences, Splitting) {
  auto seq = tokenize("He left. She stayed! Did they? Yes.");
  auto s = seq.sentences();
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0].begin, 0);
  EXPECT_EQ(s[0].end, 3);
  EXPECT_EQ(s.back().end, seq.size());
  auto abbrev = tokenize("He met Dr. Smith in St. Louis.");
  EXPECT_EQ(abbrev.sentences().size(), 1u);
}

TEST(Pos, CoarseTags) {
  auto seq = tokenize("Her funeral was held on Saturday, 2 February");
  EXPECT_EQ(seq[0].pos, Pos::DET);
  EXPECT_EQ(seq[1].pos, Pos::NOUN);
  EXPECT_EQ(seq[2].pos, Pos::VERB);
  EXPECT_EQ(seq[3].pos, Pos::VERB);
  EXPECT_EQ(seq[4].pos, Pos::ADP);
  EXPECT_EQ(seq[5].pos, Pos::PROPN);
  EXPECT_EQ(seq[7].pos, Pos::NUM);
  auto h = tokenize("Hydrogen is highly soluble in many rare earth metals");
  EXPECT_EQ(h[2].pos, Pos::ADV);
  EXPECT_EQ(h[3].pos, Pos::ADJ);
}
