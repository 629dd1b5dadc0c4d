#pragma once

// Text ingestion: tokenization, spans, instances, candidate spans and
// answer-type heuristics shared by every other module.

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nmt {

enum class Pos : std::uint8_t { NOUN, PROPN, VERB, ADJ, ADV, NUM, DET, ADP, PUNCT, OTHER };

std::string_view to_string(Pos pos);

struct Token {
  std::string text;
  std::string lower;
  int char_start = 0;  // code-point offsets into the source text
  int char_end = 0;
  int byte_start = 0;
  int byte_end = 0;
  Pos pos = Pos::OTHER;
  std::string shape;
};

/// Inclusive token range. Spans carry no pointer to their sequence; every
/// operation takes the owning sequence explicitly.
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  bool overlaps(const Span& o) const { return start <= o.end && o.start <= end; }
  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

/// Half-open token range [begin, end) of one sentence.
struct SentenceRange {
  int begin = 0;
  int end = 0;
  bool contains(const Span& s) const { return s.start >= begin && s.end < end; }
};

class TokenSeq {
 public:
  TokenSeq() = default;
  TokenSeq(std::string source, std::vector<Token> tokens);

  const std::string& source() const { return source_; }
  const std::vector<Token>& tokens() const { return tokens_; }
  const Token& operator[](std::size_t i) const { return tokens_[i]; }
  int size() const { return static_cast<int>(tokens_.size()); }
  bool empty() const { return tokens_.empty(); }

  bool valid(const Span& s) const { return 0 <= s.start && s.start <= s.end && s.end < size(); }

  /// Original substring covered by the span (inter-token whitespace kept).
  std::string text(const Span& s) const;
  /// Lower-cased tokens joined by single spaces.
  std::string normalized(const Span& s) const;
  /// Exact reconstruction of the source from tokens and the recorded gaps.
  std::string detokenize() const;

  /// Sentence boundaries (always at least one range for a non-empty seq).
  std::vector<SentenceRange> sentences() const;

 private:
  std::string source_;
  std::vector<Token> tokens_;
};

TokenSeq tokenize(std::string_view text);

/// Tokenizes a short phrase (e.g. a quoted key) and returns the lower-cased
/// token texts.
std::vector<std::string> tokenize_lower(std::string_view text);

struct CharRange {
  int start = 0;  // code points, half-open
  int end = 0;
  friend bool operator==(const CharRange&, const CharRange&) = default;
};

struct Instance {
  std::string id;
  TokenSeq question;
  TokenSeq context;
  std::optional<Span> gold;
  bool gold_snapped = false;  // gold boundaries were widened to whole tokens

  CharRange char_range(const Span& context_span) const;
  std::string answer_text(const Span& context_span) const { return context.text(context_span); }
};

struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IngestWarning {
  std::string instance_id;
  std::string message;
};

/// Builds an Instance and resolves a character-offset answer to tokens.
/// Misaligned offsets are widened to covering tokens and flagged; offsets
/// outside the context leave `gold` empty and append a warning.
Instance make_instance(std::string id, std::string_view question, std::string_view context,
                       std::optional<CharRange> answer, std::vector<IngestWarning>* warnings = nullptr);

std::vector<Instance> load_squad(const std::string& path, std::vector<IngestWarning>* warnings = nullptr);

/// JSONL cache: {id, question, context, gold: {char_start, char_end} | null}.
std::vector<Instance> load_corpus_jsonl(const std::string& path);
void save_corpus_jsonl(const std::vector<Instance>& corpus, const std::string& path);

/// Dispatches on content: SQuAD JSON object or JSONL cache.
std::vector<Instance> load_corpus(const std::string& path);

inline constexpr int kDefaultMaxSpanLen = 10;

/// Spans of length <= max_len inside `range` that neither start nor end on
/// punctuation and do not end on a determiner. Ordered by start, then end.
std::vector<Span> enumerate_candidates(const TokenSeq& seq, int max_len, SentenceRange range);
std::vector<Span> enumerate_candidates(const TokenSeq& seq, int max_len = kDefaultMaxSpanLen);

enum class AnswerType : std::uint8_t { DATE, YEAR, NUMBER, PERCENT, PERSON_LIKE, LOCATION_LIKE, OTHER };

std::string_view to_string(AnswerType t);
std::optional<AnswerType> answer_type_from_string(std::string_view s);

using AnswerTypes = std::set<AnswerType>;

/// Every type the span satisfies. OTHER appears only when nothing else does.
AnswerTypes classify_answer_type(const TokenSeq& seq, const Span& span);

/// True when the two sets share a type other than OTHER.
bool informative_overlap(const AnswerTypes& a, const AnswerTypes& b);

struct OrderError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Tokens strictly between a.end and b.start; `a` must precede `b`.
int gap(const Span& a, const Span& b);

/// Case-folded exact matches of `key` (lower-cased tokens) inside `range`.
std::vector<Span> find_token_matches(const TokenSeq& seq, const std::vector<std::string>& key,
                                     SentenceRange range);

}  // namespace nmt
