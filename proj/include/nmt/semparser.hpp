#pragma once

// Lexicon-driven CCG chart parser for semi-structured explanations.
//
// Categories are built from the atoms {S, NP, N, PP} with the slashes / and \.
// The chart combines constituents with forward/backward application and
// forward composition; unmatched filler tokens may be skipped at a cost.

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nmt/logical_form.hpp"

namespace nmt {

class Category {
 public:
  enum class Slash { None, Forward, Backward };

  static Category atom(std::string name);
  static Category functor(Category result, Slash slash, Category arg);
  /// Throws CategoryError on malformed input, e.g. "(S\NP".
  static Category parse(std::string_view text);

  bool is_atomic() const { return slash_ == Slash::None; }
  const std::string& atom_name() const { return atom_; }
  Slash slash() const { return slash_; }
  const Category& result() const { return *result_; }
  const Category& arg() const { return *arg_; }
  /// Number of arguments along the result spine.
  int arity() const { return is_atomic() ? 0 : 1 + result_->arity(); }

  std::string str() const;
  friend bool operator==(const Category& a, const Category& b);

 private:
  std::string atom_;
  Slash slash_ = Slash::None;
  std::shared_ptr<const Category> result_;
  std::shared_ptr<const Category> arg_;
};

struct CategoryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Lambda terms over logical-form leaves and predicates. Opaque outside the
// parser; the lexicon stores them pre-parsed.
struct Term;
using TermPtr = std::shared_ptr<const Term>;

TermPtr parse_semantics(std::string_view text);
int lambda_arity(const TermPtr& t);
std::string to_string(const TermPtr& t);

/// Token of an explanation sentence.
struct ExplToken {
  enum class Kind { Word, Quote, Var, Num };
  Kind kind = Kind::Word;
  std::string text;  // lower-cased word, quoted text, variable name, or digits
  int number = 0;

  friend bool operator==(const ExplToken&, const ExplToken&) = default;
};

std::vector<ExplToken> tokenize_explanation_sentence(std::string_view sentence);

/// Splits raw explanation text into sentences at terminal punctuation outside
/// quotes and at the connective ", so".
std::vector<std::string> split_explanation(std::string_view raw);

struct LexiconEntry {
  std::vector<std::string> surface;  // words, or wildcards <num> <var> <quote>
  Category category = Category::atom("S");
  TermPtr semantics;
  int priority = 0;

  std::string surface_text() const;
};

struct LexiconError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Lexicon {
 public:
  /// Throws LexiconError on duplicate (surface, category) or arity mismatch.
  void add(LexiconEntry entry);
  const std::vector<LexiconEntry>& entries() const { return entries_; }
  /// Entry indices keyed by first surface token (a word or a wildcard).
  const std::vector<std::size_t>& index(const std::string& first) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<LexiconEntry> entries_;
  std::unordered_map<std::string, std::vector<std::size_t>> index_;
};

/// JSON list of {surface, category, semantics, priority}; errors name the entry.
Lexicon load_lexicon(const std::string& path);
Lexicon lexicon_from_json(std::string_view json_text, const std::string& origin = "<memory>");

struct VariableDef {
  std::string name;
  std::string surface;
};

struct ExplanationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Collects every <NAME is "QUOTED"> definition (NAME in X Y Z W V).
/// Throws ExplanationError on a duplicate definition.
std::vector<VariableDef> extract_variables(std::string_view raw_text);

struct Explanation {
  std::string id;
  std::string instance_id;
  std::string raw_text;
  std::vector<std::string> sentences;  // rule sentences, definitions removed
  std::vector<VariableDef> variable_defs;

  const VariableDef* find_variable(std::string_view name) const;
};

Explanation make_explanation(std::string id, std::string instance_id, std::string raw_text);

/// JSONL: {id, instance_id, text}.
std::vector<Explanation> load_explanations(const std::string& path);

struct ParseOptions {
  int max_skips = 2;
  int cell_limit = 256;
};

struct RankedParse {
  LogicalForm form;
  int skips = 0;
  int priority = 0;
};

/// All complete parses of category S, best first. Empty when unparsable.
std::vector<RankedParse> parse_sentence(const std::vector<ExplToken>& sentence, const Lexicon& lexicon,
                                        const ParseOptions& options = {});
std::vector<RankedParse> parse_sentence(std::string_view sentence, const Lexicon& lexicon,
                                        const ParseOptions& options = {});

struct SentenceParse {
  std::string text;
  std::vector<RankedParse> parses;
};

struct ExplanationParse {
  std::vector<SentenceParse> sentences;
  std::vector<LogicalForm> forms;  // top parse per sentence, when parsable
  std::vector<std::string> diagnostics;

  bool ok() const { return diagnostics.empty(); }
};

ExplanationParse parse_explanation(const Explanation& expl, const Lexicon& lexicon,
                                   const ParseOptions& options = {});

}  // namespace nmt
