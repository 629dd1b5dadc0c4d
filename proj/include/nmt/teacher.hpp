#pragma once

// Teachers: explanations compiled into executable rule trees over the atomic
// modules, plus candidate proposal, beam search and ensembling.

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmt/atoms.hpp"
#include "nmt/corpus.hpp"
#include "nmt/logical_form.hpp"
#include "nmt/semparser.hpp"

namespace nmt {

enum class Scope { Context, Question };

struct RuleRef {
  enum class Kind { Answer, Variable, Literal };
  Kind kind = Kind::Answer;
  std::string name;              // variable name or literal surface
  std::vector<std::string> key;  // lower-cased literal tokens
  Scope scope = Scope::Context;
};

struct RuleNode {
  enum class Kind { And, Or, Compare, Between, TypeIs, StartsWith, Contains, Present };
  Kind kind = Kind::And;
  std::vector<RuleNode> kids;  // And / Or
  // Compare: {later, earlier}; Between: {middle, a, b}; TypeIs / Present: {subject}
  std::vector<RuleRef> refs;
  std::optional<int> d0;  // Compare; empty means order only
  AnswerType type = AnswerType::OTHER;
  std::string literal;  // StartsWith / Contains surface
  std::vector<std::string> key;
};

/// Compact execution tree, e.g. Compare(Distance(Ans,Find(X)),0).
std::string render(const RuleNode& node);

enum class Side { Question, Context, Answer };

struct Slot {
  std::string var;  // empty for the answer slot
  Side side = Side::Answer;
  int parent = -1;  // question slot a context slot must agree with
  Span ref_span;    // occurrence in the reference question or context
  std::string label() const;
};

struct TeacherProgram {
  std::string id;
  Instance reference;
  std::string raw_text;
  std::vector<VariableDef> variable_defs;
  std::vector<LogicalForm> forms;
  std::vector<RuleNode> rules;  // one per rule sentence
  std::vector<Slot> slots;      // fill order: question, context, answer
  std::vector<std::size_t> question_filters;  // rules decidable from the question text alone
  bool validated = false;

  std::vector<std::string> execution_trees() const;
};

struct CompileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// "t-" + 16 hex digits of a content hash over instance id and raw text.
std::string teacher_id(const std::string& instance_id, const std::string& raw_text);

TeacherProgram compile(const Explanation& expl, const std::vector<LogicalForm>& forms, const Instance& reference);

struct Assignment {
  std::map<std::string, Span> question;  // question-side bindings
  std::map<std::string, Span> context;   // context-side bindings
  std::optional<Span> answer;
  std::optional<SentenceRange> sentence;  // context literals are searched here
  double z = 0.0;
};

struct SearchConfig {
  int beam_width = 10;
  double threshold = 0.6;
  bool soft = true;
  int k_fill = 5;
  int max_span_len = kDefaultMaxSpanLen;
  std::shared_ptr<const SimilarityBackend> fill_backend;  // defaults to make_fill_backend()
  std::shared_ptr<const SimilarityBackend> find_backend;  // defaults to make_find_backend()
};

/// Rules whose references are not all bound score 1, so a partial
/// assignment's z bounds every completion from above.
double execute(const TeacherProgram& program, const Instance& instance, const Assignment& assignment, bool soft);

struct SlotProposal {
  std::vector<ScoredSpan> candidates;
  std::vector<std::vector<int>> parents;  // per candidate: admissible parent candidate indices
};

struct Proposal {
  SentenceRange sentence;
  std::vector<SlotProposal> slots;  // parallel to program.slots
};

/// One proposal per context sentence. Empty when the question filters fail.
std::vector<Proposal> propose(const TeacherProgram& program, const Instance& instance, const SearchConfig& config);

/// Candidates per slot label ("X@question", "X@context", "Answer"), merged
/// over sentences.
std::map<std::string, std::vector<ScoredSpan>> candidate_map(const TeacherProgram& program,
                                                             const std::vector<Proposal>& proposals);

/// Beam search inside one proposal. z is the rule score times the scores of
/// the bound candidates (1 for strict candidates).
std::vector<Assignment> search(const TeacherProgram& program, const Instance& instance, const Proposal& proposal,
                               const SearchConfig& config);

/// All complete assignments above the threshold, best first.
std::vector<Assignment> beam_search(const TeacherProgram& program, const Instance& instance,
                                    const SearchConfig& config);

/// Total order on complete assignments: z desc, longer answer, earlier answer.
bool better(const Assignment& a, const Assignment& b);

struct TeacherAnswer {
  Span span;
  double z = 0.0;
  Assignment assignment;
};

std::optional<TeacherAnswer> answer(const TeacherProgram& program, const Instance& instance,
                                    const SearchConfig& config);

SearchConfig strict_config(const SearchConfig& base = {});

/// Strict run on the reference; sets and returns program.validated.
bool validate(TeacherProgram& program, const SearchConfig& config = {});

struct EnsembleAnswer {
  Span span;
  double z = 0.0;
  std::string teacher_id;
};

/// Highest z over validated programs; ties go to the earlier span, then the
/// lower teacher id.
std::optional<EnsembleAnswer> ensemble_answer(const std::vector<TeacherProgram>& programs, const Instance& instance,
                                              const SearchConfig& config);

/// The max-z reduction used by ensemble_answer.
std::optional<EnsembleAnswer> reduce_answers(const std::vector<EnsembleAnswer>& answers);

// ---------------------------------------------------------------------------
// Building and persistence

struct TeacherBuild {
  std::optional<TeacherProgram> program;
  ExplanationParse parse;
  std::vector<std::string> diagnostics;  // parse or compile failures
};

/// Parse, compile and validate one explanation against its reference.
TeacherBuild build_teacher(const Explanation& expl, const Lexicon& lexicon, const Instance& reference,
                           const SearchConfig& config = {});

std::string bundle_json(const TeacherProgram& program);

struct BundleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rebuilds a program from a bundle line; the reference comes from `corpus`.
TeacherProgram program_from_bundle(const std::string& json_line, const std::vector<Instance>& corpus);

/// JSONL, one bundle per line.
void save_teachers(const std::vector<TeacherProgram>& programs, const std::string& path);
std::vector<TeacherProgram> load_teachers(const std::string& path, const std::vector<Instance>& corpus);

}  // namespace nmt
