#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "nmt/semparser.hpp"

using namespace nmt;

namespace {

const Lexicon& lexicon() {
  static const Lexicon lex = load_lexicon(std::string(NMT_TEST_DATA_DIR) + "/lexicon.json");
  return lex;
}

std::string top(std::string_view sentence) {
  auto parses = parse_sentence(sentence, lexicon());
  return parses.empty() ? "<none>" : to_string(parses.front().form);
}

const char* kFuneral =
    "X is \"funeral\". Y is \"held\". In the question X is within 4 words after \"when was\" and Y is directly "
    "after X. \"on\" is directly before the answer. Y is within 2 words before the answer. X is within 3 words "
    "left of Y. The question starts with \"when\", so the answer should be a date.";

}  // namespace

TEST(Category, ParseAndPrint) {
  EXPECT_EQ(Category::parse("(S\\NP)/NP").str(), "(S\\NP)/NP");
  EXPECT_EQ(Category::parse("S\\NP/NP").str(), "(S\\NP)/NP");
  EXPECT_EQ(Category::parse("NP").arity(), 0);
  EXPECT_EQ(Category::parse("(PP/PP)/N").arity(), 2);
  EXPECT_THROW(Category::parse("(S\\NP"), CategoryError);
  EXPECT_THROW(Category::parse("Q/NP"), CategoryError);
  EXPECT_THROW(Category::parse(""), CategoryError);
}

TEST(Semantics, ParseAndArity) {
  auto t = parse_semantics("\\x.@Direct(@Right(x))");
  EXPECT_EQ(lambda_arity(t), 1);
  EXPECT_EQ(lambda_arity(parse_semantics("λn.λp.@LessThan(p, n)")), 2);
  EXPECT_EQ(lambda_arity(parse_semantics("Answer")), 0);
  EXPECT_THROW(parse_semantics("@Is(Answer"), LexiconError);
}

TEST(Lexicon, FixtureEntryIndexedUnderFirstWord) {
  auto lex = lexicon_from_json(
      R"json([{"surface": "directly after", "category": "(NP/NP)", "semantics": "\\x.@Direct(@Right(x))", "priority": 0}])json");
  ASSERT_EQ(lex.size(), 1u);
  EXPECT_EQ(lex.index("directly").size(), 1u);
  EXPECT_TRUE(lex.index("after").empty());
}

TEST(Lexicon, EmptyFileIsValid) {
  auto p = std::filesystem::temp_directory_path() / "nmt_empty_lexicon.json";
  std::ofstream(p) << "";
  EXPECT_TRUE(load_lexicon(p.string()).empty());
}

TEST(Lexicon, MalformedCategoryNamesLine) {
  const std::string text =
      "[\n"
      "  {\"surface\": \"after\", \"category\": \"PP/NP\", \"semantics\": \"\\\\x.@Right(x)\"},\n"
      "  {\"surface\": \"follows\", \"category\": \"(S\\\\NP\", \"semantics\": \"\\\\y.\\\\x.@Is(x, @Right(y))\"}\n"
      "]\n";
  try {
    lexicon_from_json(text, "lex.json");
    FAIL() << "expected LexiconError";
  } catch (const LexiconError& e) {
    EXPECT_NE(std::string(e.what()).find("lex.json:3"), std::string::npos) << e.what();
  }
}

TEST(Lexicon, RejectsDuplicatesAndArityMismatch) {
  EXPECT_THROW(lexicon_from_json(R"json([
    {"surface": "after", "category": "PP/NP", "semantics": "\\x.@Right(x)"},
    {"surface": "after", "category": "PP/NP", "semantics": "\\x.@Left(x)"}])json"),
               LexiconError);
  EXPECT_THROW(lexicon_from_json(R"json([{"surface": "after", "category": "PP/NP", "semantics": "@Right(Answer)"}])json"),
               LexiconError);
}

TEST(Lexicon, ShippedLexiconLoads) { EXPECT_GT(lexicon().size(), 50u); }

TEST(Explanation, SplitsAndTokenizes) {
  auto sentences = split_explanation(kFuneral);
  ASSERT_EQ(sentences.size(), 8u);
  EXPECT_EQ(sentences[6], "The question starts with \"when\"");
  EXPECT_EQ(sentences[7], "the answer should be a date");
  auto toks = tokenize_explanation_sentence("X is within 4 words after \"when was\".");
  ASSERT_EQ(toks.size(), 7u);
  EXPECT_EQ(toks[0].kind, ExplToken::Kind::Var);
  EXPECT_EQ(toks[2].text, "within");
  EXPECT_EQ(toks[3].kind, ExplToken::Kind::Num);
  EXPECT_EQ(toks[3].number, 4);
  EXPECT_EQ(toks[6].kind, ExplToken::Kind::Quote);
  EXPECT_EQ(toks[6].text, "when was");
  // LaTeX-style quotes are normalized.
  auto latex = tokenize_explanation_sentence("``on'' is directly before the answer");
  EXPECT_EQ(latex[0].kind, ExplToken::Kind::Quote);
  EXPECT_EQ(latex[0].text, "on");
}

TEST(Explanation, ExtractVariables) {
  auto defs = extract_variables(kFuneral);
  ASSERT_EQ(defs.size(), 2u);
  EXPECT_EQ(defs[0].name, "X");
  EXPECT_EQ(defs[0].surface, "funeral");
  EXPECT_EQ(defs[1].name, "Y");
  EXPECT_EQ(defs[1].surface, "held");
  EXPECT_TRUE(extract_variables("The answer is directly after \"on\".").empty());
  EXPECT_THROW(extract_variables("X is \"a\". X is \"b\"."), ExplanationError);
}

TEST(Explanation, PeriodInsideQuotesDoesNotSplit) {
  auto e = make_explanation("e", "i", "X is \"St. George\". The answer is directly after X.");
  ASSERT_EQ(e.variable_defs.size(), 1u);
  EXPECT_EQ(e.variable_defs[0].surface, "St. George");
  EXPECT_EQ(e.sentences.size(), 1u);
}

TEST(Parse, GoldenRuleRows) {
  EXPECT_EQ(top("The answer is directly after X."), "@Is(Answer, @Direct(@Right(X)))");
  EXPECT_EQ(top("The answer is within 3 words before Z and within 4 words after Y."),
            "@Is(Answer, @And(@LessThan(@Left(Z), 3), @LessThan(@Right(Y), 4)))");
}

TEST(Parse, OutOfLexicon) {
  EXPECT_TRUE(parse_sentence("Banana purple quantum.", lexicon()).empty());
  EXPECT_TRUE(parse_sentence("", lexicon()).empty());
}

TEST(Parse, FillerWordsAreSkippedAtACost) {
  auto parses = parse_sentence("The answer is probably directly after X.", lexicon());
  ASSERT_FALSE(parses.empty());
  EXPECT_EQ(parses.front().skips, 1);
  EXPECT_EQ(to_string(parses.front().form), "@Is(Answer, @Direct(@Right(X)))");
  EXPECT_TRUE(parse_sentence("The answer is surely probably maybe directly after X.", lexicon()).empty());
}

TEST(Parse, ZeroSkipParsesOutrankSkips) {
  const char* sentences[] = {"The answer is directly after X.", "X is within 3 words left of Y.",
                             "The answer is probably directly after X.", "Y is directly after X and X is after \"a\"."};
  for (const auto* s : sentences) {
    auto parses = parse_sentence(s, lexicon());
    for (std::size_t i = 1; i < parses.size(); ++i) EXPECT_LE(parses[i - 1].skips, parses[i].skips) << s;
  }
}

TEST(Parse, Deterministic) {
  for (int i = 0; i < 3; ++i) {
    auto a = parse_sentence("In the question, Y is directly after X and Z is within 2 words after Y.", lexicon());
    auto b = parse_sentence("In the question, Y is directly after X and Z is within 2 words after Y.", lexicon());
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].form, b[k].form);
  }
}

TEST(Parse, QuestionScopeTakesWholeConjunction) {
  EXPECT_EQ(top("In the question X is within 4 words after \"when was\" and Y is directly after X."),
            "@In(@And(@Is(X, @LessThan(@Right(\"when was\"), 4)), @Is(Y, @Direct(@Right(X)))), Question)");
  EXPECT_EQ(top("X is directly after \"did\" and directly before \"begin\" in the question."),
            "@In(@Is(X, @And(@Direct(@Right(\"did\")), @Direct(@Left(\"begin\")))), Question)");
}

TEST(Parse, ExtraConstructions) {
  EXPECT_EQ(top("\"begin\" is in the question."), "@In(\"begin\", Question)");
  EXPECT_EQ(top("The question starts with \"In what year\""), "@StartsWith(Question, \"In what year\")");
  EXPECT_EQ(top("the answer should be a year"), "@AnswerType(Answer, YEAR)");
  EXPECT_EQ(top("Z is a year."), "@AnswerType(Z, YEAR)");
  EXPECT_EQ(top("The answer directly follows Y."), "@Is(Answer, @Direct(@Right(Y)))");
  EXPECT_EQ(top("X is within 3 words left of Y."), "@Is(X, @LessThan(@Left(Y), 3))");
  EXPECT_EQ(top("\"in\" directly before the answer."), "@Is(\"in\", @Direct(@Left(Answer)))");
  EXPECT_EQ(top("\"is\" is between X and Y."), "@Is(\"is\", @Between(X, Y))");
}

TEST(Parse, FuneralExplanation) {
  auto expl = make_explanation("e1", "funeral", kFuneral);
  EXPECT_EQ(expl.sentences.size(), 6u);
  auto result = parse_explanation(expl, lexicon());
  ASSERT_TRUE(result.ok()) << (result.diagnostics.empty() ? "" : result.diagnostics.front());
  ASSERT_EQ(result.forms.size(), 6u);
  EXPECT_EQ(to_string(result.forms[1]), "@Is(\"on\", @Direct(@Left(Answer)))");
  EXPECT_EQ(to_string(result.forms[4]), "@StartsWith(Question, \"when\")");
  EXPECT_EQ(to_string(result.forms[5]), "@AnswerType(Answer, DATE)");
}

TEST(Parse, ExplanationDiagnostics) {
  auto gibberish = make_explanation("e", "i", "X is \"a\". The answer is directly after X. Banana purple quantum.");
  auto r = parse_explanation(gibberish, lexicon());
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.diagnostics.front().find("Banana purple quantum"), std::string::npos);
  EXPECT_TRUE(r.forms.empty());

  auto empty = make_explanation("e", "i", "X is \"a\".");
  auto r2 = parse_explanation(empty, lexicon());
  ASSERT_FALSE(r2.ok());
  EXPECT_NE(r2.diagnostics.front().find("no constraints"), std::string::npos);

  auto undefined = make_explanation("e", "i", "The answer is directly after W.");
  auto r3 = parse_explanation(undefined, lexicon());
  ASSERT_FALSE(r3.ok());
  EXPECT_NE(r3.diagnostics.front().find("undefined variable W"), std::string::npos);

  auto no_answer = make_explanation("e", "i", "X is \"a\". \"b\" is directly after X.");
  auto r4 = parse_explanation(no_answer, lexicon());
  ASSERT_FALSE(r4.ok());
  EXPECT_NE(r4.diagnostics.front().find("answer"), std::string::npos);
}
