#include "nmt/teacher.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nmt/beam.hpp"

namespace nmt {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

std::string render_ref(const RuleRef& r) {
  switch (r.kind) {
    case RuleRef::Kind::Answer: return "Ans";
    case RuleRef::Kind::Variable: return (r.scope == Scope::Question ? "Fill(" : "Find(") + r.name + ")";
    case RuleRef::Kind::Literal:
      return r.scope == Scope::Question ? "Find(Question," + quoted(r.name) + ")" : "Find(" + quoted(r.name) + ")";
  }
  return "?";
}

}  // namespace

std::string render(const RuleNode& node) {
  switch (node.kind) {
    case RuleNode::Kind::And:
    case RuleNode::Kind::Or: {
      std::string out = node.kind == RuleNode::Kind::And ? "And(" : "Or(";
      for (std::size_t i = 0; i < node.kids.size(); ++i) out += (i ? "," : "") + render(node.kids[i]);
      return out + ")";
    }
    case RuleNode::Kind::Compare:
      return "Compare(Distance(" + render_ref(node.refs[0]) + "," + render_ref(node.refs[1]) + ")," +
             (node.d0 ? std::to_string(*node.d0) : std::string("inf")) + ")";
    case RuleNode::Kind::Between:
      return "Between(" + render_ref(node.refs[0]) + "," + render_ref(node.refs[1]) + "," + render_ref(node.refs[2]) +
             ")";
    case RuleNode::Kind::TypeIs:
      return "AnswerType(" + render_ref(node.refs[0]) + "," + std::string(to_string(node.type)) + ")";
    case RuleNode::Kind::StartsWith: return "StartsWith(Question," + quoted(node.literal) + ")";
    case RuleNode::Kind::Contains: return "In(" + quoted(node.literal) + ",Question)";
    case RuleNode::Kind::Present: return "In(" + render_ref(node.refs[0]) + ",Question)";
  }
  return "?";
}

std::string Slot::label() const {
  switch (side) {
    case Side::Question: return var + "@question";
    case Side::Context: return var + "@context";
    case Side::Answer: return "Answer";
  }
  return "?";
}

std::vector<std::string> TeacherProgram::execution_trees() const {
  std::vector<std::string> out;
  for (const auto& r : rules) out.push_back(render(r));
  return out;
}

std::string teacher_id(const std::string& instance_id, const std::string& raw_text) {
  const auto h = fnv1a(instance_id + "\n" + raw_text);
  char buf[24];
  std::snprintf(buf, sizeof buf, "t-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Compilation

namespace {

RuleNode combine(RuleNode::Kind kind, std::vector<RuleNode> kids) {
  if (kids.size() == 1) return std::move(kids.front());
  RuleNode n;
  n.kind = kind;
  n.kids = std::move(kids);
  return n;
}

RuleNode compare(RuleRef later, RuleRef earlier, std::optional<int> d0) {
  RuleNode n;
  n.kind = RuleNode::Kind::Compare;
  n.refs = {std::move(later), std::move(earlier)};
  n.d0 = d0;
  return n;
}

class Compiler {
 public:
  explicit Compiler(const Explanation& expl) : expl_(expl) {}

  RuleNode statement(const LogicalForm& lf, Scope scope) {
    if (lf.kind != LogicalForm::Kind::Pred) throw CompileError("expected a statement, got " + to_string(lf));
    if ((lf.is_pred("And") || lf.is_pred("Or")) && lf.args.size() == 2 && is_statement(lf.args[0]) &&
        is_statement(lf.args[1])) {
      const auto kind = lf.is_pred("And") ? RuleNode::Kind::And : RuleNode::Kind::Or;
      return combine(kind, {statement(lf.args[0], scope), statement(lf.args[1], scope)});
    }
    if (lf.is_pred("Is")) {
      expect_args(lf, 2);
      auto [subjects, kind] = refs(lf.args[0], scope);
      std::vector<RuleNode> parts;
      for (const auto& s : subjects) parts.push_back(position(s, lf.args[1], std::nullopt, scope));
      return combine(kind, std::move(parts));
    }
    if (lf.is_pred("In")) {
      expect_args(lf, 2);
      if (lf.args[1].kind != LogicalForm::Kind::Question) {
        throw CompileError("@In expects the question as container: " + to_string(lf));
      }
      const auto& inner = lf.args[0];
      if (inner.kind == LogicalForm::Kind::Pred) return statement(inner, Scope::Question);
      if (inner.kind == LogicalForm::Kind::Literal) {
        RuleNode n;
        n.kind = RuleNode::Kind::Contains;
        n.literal = inner.name;
        n.key = literal_key(inner.name);
        return n;
      }
      if (inner.kind == LogicalForm::Kind::Variable) {
        RuleNode n;
        n.kind = RuleNode::Kind::Present;
        n.refs = {ref(inner, Scope::Question)};
        return n;
      }
      throw CompileError("cannot place " + to_string(inner) + " in the question");
    }
    if (lf.is_pred("StartsWith")) {
      expect_args(lf, 2);
      if (lf.args[0].kind != LogicalForm::Kind::Question || lf.args[1].kind != LogicalForm::Kind::Literal) {
        throw CompileError("@StartsWith expects the question and a quoted prefix: " + to_string(lf));
      }
      RuleNode n;
      n.kind = RuleNode::Kind::StartsWith;
      n.literal = lf.args[1].name;
      n.key = literal_key(lf.args[1].name);
      return n;
    }
    if (lf.is_pred("AnswerType")) {
      expect_args(lf, 2);
      if (lf.args[1].kind != LogicalForm::Kind::Type) throw CompileError("@AnswerType expects a type: " + to_string(lf));
      auto [subjects, kind] = refs(lf.args[0], scope);
      std::vector<RuleNode> parts;
      for (const auto& s : subjects) {
        RuleNode n;
        n.kind = RuleNode::Kind::TypeIs;
        n.refs = {s};
        n.type = lf.args[1].type;
        parts.push_back(std::move(n));
      }
      return combine(kind, std::move(parts));
    }
    throw CompileError("no lowering for predicate @" + lf.name);
  }

 private:
  static bool is_statement(const LogicalForm& lf) {
    return lf.is_pred("Is") || lf.is_pred("In") || lf.is_pred("StartsWith") || lf.is_pred("AnswerType") ||
           ((lf.is_pred("And") || lf.is_pred("Or")) && lf.args.size() == 2 && is_statement(lf.args[0]) &&
            is_statement(lf.args[1]));
  }

  static void expect_args(const LogicalForm& lf, std::size_t n) {
    if (lf.args.size() != n) throw CompileError("@" + lf.name + " takes " + std::to_string(n) + " arguments");
  }

  static std::vector<std::string> literal_key(const std::string& text) {
    auto key = tokenize_lower(text);
    if (key.empty()) throw CompileError("empty quoted phrase");
    return key;
  }

  RuleRef ref(const LogicalForm& lf, Scope scope) const {
    RuleRef r;
    r.scope = scope;
    switch (lf.kind) {
      case LogicalForm::Kind::Answer:
        r.kind = RuleRef::Kind::Answer;
        r.scope = Scope::Context;
        return r;
      case LogicalForm::Kind::Variable:
        if (!expl_.find_variable(lf.name)) throw CompileError("undefined variable " + lf.name);
        r.kind = RuleRef::Kind::Variable;
        r.name = lf.name;
        return r;
      case LogicalForm::Kind::Literal:
        r.kind = RuleRef::Kind::Literal;
        r.name = lf.name;
        r.key = literal_key(lf.name);
        return r;
      default: throw CompileError("expected the answer, a variable or a quoted phrase, got " + to_string(lf));
    }
  }

  // Flattens @And(X, Y) / @Or(X, Y) noun-phrase conjunctions.
  std::pair<std::vector<RuleRef>, RuleNode::Kind> refs(const LogicalForm& lf, Scope scope) const {
    if ((lf.is_pred("And") || lf.is_pred("Or")) && lf.args.size() == 2) {
      const auto kind = lf.is_pred("And") ? RuleNode::Kind::And : RuleNode::Kind::Or;
      std::vector<RuleRef> out;
      for (const auto& a : lf.args) {
        auto [sub, sub_kind] = refs(a, scope);
        if (sub.size() > 1 && sub_kind != kind) throw CompileError("mixed and/or in " + to_string(lf));
        out.insert(out.end(), sub.begin(), sub.end());
      }
      return {out, kind};
    }
    return {{ref(lf, scope)}, RuleNode::Kind::And};
  }

  RuleNode position(const RuleRef& subject, const LogicalForm& p, std::optional<int> d0, Scope scope) {
    if (p.is_pred("Direct")) {
      expect_args(p, 1);
      return position(subject, p.args[0], 0, scope);
    }
    if (p.is_pred("LessThan")) {
      expect_args(p, 2);
      if (p.args[1].kind != LogicalForm::Kind::Number) throw CompileError("@LessThan expects a number");
      return position(subject, p.args[0], p.args[1].number, scope);
    }
    if (p.is_pred("Right") || p.is_pred("Left")) {
      expect_args(p, 1);
      const bool right = p.is_pred("Right");
      auto [objects, kind] = refs(p.args[0], scope);
      std::vector<RuleNode> parts;
      for (const auto& o : objects) parts.push_back(right ? compare(subject, o, d0) : compare(o, subject, d0));
      return combine(kind, std::move(parts));
    }
    if ((p.is_pred("And") || p.is_pred("Or")) && p.args.size() == 2) {
      const auto kind = p.is_pred("And") ? RuleNode::Kind::And : RuleNode::Kind::Or;
      return combine(kind, {position(subject, p.args[0], d0, scope), position(subject, p.args[1], d0, scope)});
    }
    if (p.is_pred("Between")) {
      std::vector<RuleRef> ends;
      if (p.args.size() == 2) {
        ends = {ref(p.args[0], scope), ref(p.args[1], scope)};
      } else if (p.args.size() == 1 && p.args[0].is_pred("And") && p.args[0].args.size() == 2) {
        ends = {ref(p.args[0].args[0], scope), ref(p.args[0].args[1], scope)};
      } else {
        throw CompileError("@Between expects two ends: " + to_string(p));
      }
      RuleNode n;
      n.kind = RuleNode::Kind::Between;
      n.refs = {subject, ends[0], ends[1]};
      return n;
    }
    if (p.kind == LogicalForm::Kind::Pred) throw CompileError("no lowering for predicate @" + p.name);
    throw CompileError("expected a position, got " + to_string(p));
  }

  const Explanation& expl_;
};

template <class F>
void for_each_ref(const RuleNode& n, F&& f) {
  for (const auto& r : n.refs) f(n, r);
  for (const auto& k : n.kids) for_each_ref(k, f);
}

template <class F>
void for_each_ref_mut(RuleNode& n, F&& f) {
  for (auto& r : n.refs) f(n, r);
  for (auto& k : n.kids) for_each_ref_mut(k, f);
}

std::optional<Span> occurrence(const TokenSeq& seq, const std::string& surface, std::optional<SentenceRange> prefer) {
  const auto key = tokenize_lower(surface);
  if (key.empty()) return std::nullopt;
  const auto hits = find_token_matches(seq, key, SentenceRange{0, seq.size()});
  if (hits.empty()) return std::nullopt;
  if (prefer) {
    for (const auto& h : hits) {
      if (prefer->contains(h)) return h;
    }
  }
  return hits.front();
}

bool decidable_from_question(const RuleNode& n) {
  bool ok = true;
  for_each_ref(n, [&](const RuleNode&, const RuleRef& r) {
    if (r.kind != RuleRef::Kind::Literal || r.scope != Scope::Question) ok = false;
  });
  return ok;
}

}  // namespace

TeacherProgram compile(const Explanation& expl, const std::vector<LogicalForm>& forms, const Instance& reference) {
  if (!reference.gold) throw CompileError("reference instance " + reference.id + " has no gold answer");
  TeacherProgram prog;
  prog.id = teacher_id(expl.instance_id, expl.raw_text);
  prog.reference = reference;
  prog.raw_text = expl.raw_text;
  prog.variable_defs = expl.variable_defs;
  prog.forms = forms;

  Compiler compiler(expl);
  for (const auto& f : forms) prog.rules.push_back(compiler.statement(f, Scope::Context));

  // Variables in order of first mention, with the scopes they are used in.
  std::vector<std::string> order;
  std::set<std::string> in_question, in_context;
  auto note = [&](const RuleRef& r) {
    if (r.kind != RuleRef::Kind::Variable) return;
    if (std::find(order.begin(), order.end(), r.name) == order.end()) order.push_back(r.name);
    (r.scope == Scope::Question ? in_question : in_context).insert(r.name);
  };
  for (const auto& rule : prog.rules) {
    for_each_ref(rule, [&](const RuleNode& n, const RuleRef& r) {
      if (n.kind != RuleNode::Kind::TypeIs) note(r);
    });
  }
  // A type constraint on a variable applies where the variable is otherwise
  // used: the context if any context rule mentions it, else the question.
  for (auto& rule : prog.rules) {
    for_each_ref_mut(rule, [&](const RuleNode& n, RuleRef& r) {
      if (n.kind == RuleNode::Kind::TypeIs && r.kind == RuleRef::Kind::Variable && !in_context.count(r.name) &&
          in_question.count(r.name)) {
        r.scope = Scope::Question;
      }
    });
  }
  for (const auto& rule : prog.rules) {
    for_each_ref(rule, [&](const RuleNode& n, const RuleRef& r) {
      if (n.kind == RuleNode::Kind::TypeIs) note(r);
    });
  }

  const auto gold_sentence = [&]() -> std::optional<SentenceRange> {
    for (const auto& s : reference.context.sentences()) {
      if (s.contains(*reference.gold)) return s;
    }
    return std::nullopt;
  }();

  std::map<std::string, int> question_slot;
  for (const auto& var : order) {
    const auto* def = expl.find_variable(var);
    const auto q = occurrence(reference.question, def->surface, std::nullopt);
    if (in_question.count(var) && !q) {
      throw CompileError("variable " + var + " (\"" + def->surface + "\") does not occur in the reference question");
    }
    if (q) {
      question_slot[var] = static_cast<int>(prog.slots.size());
      prog.slots.push_back(Slot{var, Side::Question, -1, *q});
    }
  }
  for (const auto& var : order) {
    if (!in_context.count(var)) continue;
    const auto* def = expl.find_variable(var);
    const auto c = occurrence(reference.context, def->surface, gold_sentence);
    auto parent = question_slot.find(var);
    if (!c && parent == question_slot.end()) {
      throw CompileError("variable " + var + " (\"" + def->surface +
                         "\") occurs in neither the reference question nor its context");
    }
    prog.slots.push_back(
        Slot{var, Side::Context, parent == question_slot.end() ? -1 : parent->second, c.value_or(Span{0, 0})});
  }
  prog.slots.push_back(Slot{"", Side::Answer, -1, *reference.gold});

  for (std::size_t i = 0; i < prog.rules.size(); ++i) {
    if (decidable_from_question(prog.rules[i])) prog.question_filters.push_back(i);
  }
  return prog;
}

// ---------------------------------------------------------------------------
// Execution

namespace {

struct Evaluator {
  const Instance& inst;
  const Assignment& a;
  bool soft;

  SentenceRange context_range() const { return a.sentence.value_or(SentenceRange{0, inst.context.size()}); }

  // nullopt: not bound yet. An empty list means a literal that does not occur.
  std::optional<std::vector<Span>> resolve(const RuleRef& r, const TokenSeq*& seq) const {
    seq = r.scope == Scope::Question ? &inst.question : &inst.context;
    switch (r.kind) {
      case RuleRef::Kind::Answer:
        seq = &inst.context;
        if (!a.answer) return std::nullopt;
        return std::vector<Span>{*a.answer};
      case RuleRef::Kind::Variable: {
        const auto& m = r.scope == Scope::Question ? a.question : a.context;
        auto it = m.find(r.name);
        if (it == m.end()) return std::nullopt;
        return std::vector<Span>{it->second};
      }
      case RuleRef::Kind::Literal:
        if (r.scope == Scope::Question) return find_token_matches(inst.question, r.key, {0, inst.question.size()});
        return find_token_matches(inst.context, r.key, context_range());
    }
    return std::nullopt;
  }

  double compare_spans(const Span& later, const Span& earlier, std::optional<int> d0) const {
    if (later.start <= earlier.end) return 0.0;
    if (!d0) return 1.0;
    const int d1 = later.start - earlier.end - 1;
    return soft ? compare_soft(*d0, d1) : compare_strict(*d0, d1);
  }

  double eval(const RuleNode& n) const {
    const TokenSeq* seq = nullptr;
    switch (n.kind) {
      case RuleNode::Kind::And:
      case RuleNode::Kind::Or: {
        double z = n.kind == RuleNode::Kind::And ? 1.0 : 0.0;
        for (const auto& k : n.kids) z = n.kind == RuleNode::Kind::And ? logic_and(z, eval(k)) : logic_or(z, eval(k));
        return z;
      }
      case RuleNode::Kind::Compare: {
        auto later = resolve(n.refs[0], seq);
        auto earlier = resolve(n.refs[1], seq);
        if (!later || !earlier) return 1.0;
        double best = 0.0;
        for (const auto& l : *later) {
          for (const auto& e : *earlier) best = std::max(best, compare_spans(l, e, n.d0));
        }
        return best;
      }
      case RuleNode::Kind::Between: {
        auto mid = resolve(n.refs[0], seq);
        auto x = resolve(n.refs[1], seq);
        auto y = resolve(n.refs[2], seq);
        if (!mid || !x || !y) return 1.0;
        for (const auto& m : *mid) {
          for (const auto& p : *x) {
            for (const auto& q : *y) {
              if ((p.end < m.start && m.end < q.start) || (q.end < m.start && m.end < p.start)) return 1.0;
            }
          }
        }
        return 0.0;
      }
      case RuleNode::Kind::TypeIs: {
        auto spans = resolve(n.refs[0], seq);
        if (!spans) return 1.0;
        for (const auto& s : *spans) {
          if (classify_answer_type(*seq, s).count(n.type)) return 1.0;
        }
        return 0.0;
      }
      case RuleNode::Kind::StartsWith: {
        if (static_cast<int>(n.key.size()) > inst.question.size()) return 0.0;
        for (std::size_t i = 0; i < n.key.size(); ++i) {
          if (inst.question[i].lower != n.key[i]) return 0.0;
        }
        return 1.0;
      }
      case RuleNode::Kind::Contains:
        return find_token_matches(inst.question, n.key, {0, inst.question.size()}).empty() ? 0.0 : 1.0;
      case RuleNode::Kind::Present: return 1.0;
    }
    return 0.0;
  }
};

}  // namespace

double execute(const TeacherProgram& program, const Instance& instance, const Assignment& assignment, bool soft) {
  Evaluator ev{instance, assignment, soft};
  double z = 1.0;
  for (const auto& r : program.rules) {
    z = logic_and(z, ev.eval(r));
    if (z == 0.0) break;
  }
  return z;
}

// ---------------------------------------------------------------------------
// Proposal and search

namespace {

const SimilarityBackend& fill_backend(const SearchConfig& c) {
  static const auto fallback = make_fill_backend();
  return c.fill_backend ? *c.fill_backend : *fallback;
}

const SimilarityBackend& find_backend(const SearchConfig& c) {
  static const auto fallback = make_find_backend();
  return c.find_backend ? *c.find_backend : *fallback;
}

std::vector<ScoredSpan> strict_scored(const std::vector<Span>& spans) {
  std::vector<ScoredSpan> out;
  out.reserve(spans.size());
  for (const auto& s : spans) out.push_back({s, 1.0});
  return out;
}

// Types required of the answer by top-level (conjunctive) rules.
void answer_types(const RuleNode& n, std::vector<AnswerType>& out) {
  if (n.kind == RuleNode::Kind::And) {
    for (const auto& k : n.kids) answer_types(k, out);
  } else if (n.kind == RuleNode::Kind::TypeIs && n.refs[0].kind == RuleRef::Kind::Answer) {
    out.push_back(n.type);
  }
}

std::vector<ScoredSpan> filter_types(std::vector<ScoredSpan> spans, const TokenSeq& seq,
                                     const std::vector<AnswerType>& types) {
  if (types.empty()) return spans;
  std::vector<ScoredSpan> out;
  for (auto& s : spans) {
    const auto have = classify_answer_type(seq, s.span);
    if (std::all_of(types.begin(), types.end(), [&](AnswerType t) { return have.count(t) > 0; })) {
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

std::vector<Proposal> propose(const TeacherProgram& program, const Instance& instance, const SearchConfig& config) {
  {
    Assignment none;
    Evaluator ev{instance, none, config.soft};
    for (auto i : program.question_filters) {
      const double s = ev.eval(program.rules[i]);
      if (config.soft ? s <= config.threshold : s < 1.0) return {};
    }
  }
  const auto& ref = program.reference;
  const SentenceRange whole_q{0, instance.question.size()};

  std::vector<std::vector<ScoredSpan>> question_candidates(program.slots.size());
  for (std::size_t i = 0; i < program.slots.size(); ++i) {
    const auto& slot = program.slots[i];
    if (slot.side != Side::Question) continue;
    auto c = strict_scored(fill_strict(ref.question, slot.ref_span, instance.question, whole_q, config.max_span_len));
    if (c.empty() && config.soft) {
      c = fill_soft(ref.question, slot.ref_span, instance.question, fill_backend(config), config.k_fill, whole_q,
                    config.max_span_len);
    }
    if (c.empty()) return {};
    question_candidates[i] = std::move(c);
  }

  std::vector<AnswerType> types;
  for (const auto& r : program.rules) answer_types(r, types);

  std::vector<Proposal> out;
  for (const auto& sentence : instance.context.sentences()) {
    Proposal p{sentence, std::vector<SlotProposal>(program.slots.size())};
    bool viable = true;
    for (std::size_t i = 0; i < program.slots.size() && viable; ++i) {
      const auto& slot = program.slots[i];
      auto& sp = p.slots[i];
      switch (slot.side) {
        case Side::Question: sp.candidates = question_candidates[i]; break;
        case Side::Context:
          if (slot.parent >= 0) {
            const auto& parents = question_candidates[static_cast<std::size_t>(slot.parent)];
            for (std::size_t qi = 0; qi < parents.size(); ++qi) {
              const auto& qspan = parents[qi].span;
              std::vector<std::string> key;
              for (int t = qspan.start; t <= qspan.end; ++t) key.push_back(instance.question[t].lower);
              auto found = strict_scored(find_token_matches(instance.context, key, sentence));
              if (found.empty() && config.soft) {
                found = find_soft(instance.question, qspan, instance.context, find_backend(config), sentence,
                                  config.k_fill, config.max_span_len);
              }
              for (const auto& f : found) {
                auto it = std::find_if(sp.candidates.begin(), sp.candidates.end(),
                                       [&](const ScoredSpan& s) { return s.span == f.span; });
                if (it == sp.candidates.end()) {
                  sp.candidates.push_back(f);
                  sp.parents.push_back({static_cast<int>(qi)});
                } else {
                  auto& links = sp.parents[static_cast<std::size_t>(it - sp.candidates.begin())];
                  links.push_back(static_cast<int>(qi));
                  it->score = std::max(it->score, f.score);
                }
              }
            }
          } else {
            sp.candidates = strict_scored(
                fill_strict(ref.context, slot.ref_span, instance.context, sentence, config.max_span_len));
            if (sp.candidates.empty() && config.soft) {
              sp.candidates = fill_soft(ref.context, slot.ref_span, instance.context, fill_backend(config),
                                        config.k_fill, sentence, config.max_span_len);
            }
          }
          break;
        case Side::Answer:
          sp.candidates = filter_types(
              strict_scored(fill_strict(ref.context, slot.ref_span, instance.context, sentence, config.max_span_len)),
              instance.context, types);
          if (sp.candidates.empty() && config.soft) {
            sp.candidates = filter_types(fill_soft(ref.context, slot.ref_span, instance.context, fill_backend(config),
                                                   config.k_fill, sentence, config.max_span_len),
                                         instance.context, types);
          }
          break;
      }
      viable = !sp.candidates.empty();
    }
    if (viable) out.push_back(std::move(p));
  }
  return out;
}

std::map<std::string, std::vector<ScoredSpan>> candidate_map(const TeacherProgram& program,
                                                             const std::vector<Proposal>& proposals) {
  std::map<std::string, std::vector<ScoredSpan>> out;
  for (std::size_t i = 0; i < program.slots.size(); ++i) {
    auto& list = out[program.slots[i].label()];
    for (const auto& p : proposals) {
      for (const auto& c : p.slots[i].candidates) {
        if (std::none_of(list.begin(), list.end(), [&](const ScoredSpan& s) { return s.span == c.span; })) {
          list.push_back(c);
        }
      }
    }
  }
  return out;
}

namespace {

Assignment materialize(const TeacherProgram& program, const Proposal& proposal, const std::vector<int>& values) {
  Assignment a;
  a.sentence = proposal.sentence;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto& slot = program.slots[k];
    const auto& span = proposal.slots[k].candidates[static_cast<std::size_t>(values[k])].span;
    switch (slot.side) {
      case Side::Question: a.question[slot.var] = span; break;
      case Side::Context: a.context[slot.var] = span; break;
      case Side::Answer: a.answer = span; break;
    }
  }
  return a;
}

}  // namespace

bool better(const Assignment& a, const Assignment& b) {
  if (a.z != b.z) return a.z > b.z;
  const int la = a.answer ? a.answer->length() : 0;
  const int lb = b.answer ? b.answer->length() : 0;
  if (la != lb) return la > lb;
  if (a.answer && b.answer && a.answer->start != b.answer->start) return a.answer->start < b.answer->start;
  if (a.question != b.question) return a.question < b.question;
  return a.context < b.context;
}

std::vector<Assignment> search(const TeacherProgram& program, const Instance& instance, const Proposal& proposal,
                               const SearchConfig& config) {
  const auto n = program.slots.size();
  auto candidates = [&](const std::vector<int>& values, std::size_t slot) {
    std::vector<int> out;
    const auto& sp = proposal.slots[slot];
    const int parent = program.slots[slot].parent;
    for (std::size_t i = 0; i < sp.candidates.size(); ++i) {
      if (parent >= 0) {
        const auto& links = sp.parents[i];
        if (std::find(links.begin(), links.end(), values[static_cast<std::size_t>(parent)]) == links.end()) continue;
      }
      out.push_back(static_cast<int>(i));
    }
    return out;
  };
  // Fallback candidates carry their similarity into z; strict ones carry 1.
  auto score = [&](const std::vector<int>& values) {
    double z = execute(program, instance, materialize(program, proposal, values), config.soft);
    for (std::size_t k = 0; k < values.size(); ++k) {
      z *= proposal.slots[k].candidates[static_cast<std::size_t>(values[k])].score;
    }
    return z;
  };
  auto before = [&](const PartialState<int>& a, const PartialState<int>& b) {
    if (a.values.size() == n && b.values.size() == n) {
      const auto& sa = proposal.slots[n - 1].candidates[static_cast<std::size_t>(a.values.back())].span;
      const auto& sb = proposal.slots[n - 1].candidates[static_cast<std::size_t>(b.values.back())].span;
      if (sa.length() != sb.length()) return sa.length() > sb.length();
      if (sa.start != sb.start) return sa.start < sb.start;
    }
    return a.values < b.values;
  };
  const auto states = beam_search<int>(n, candidates, score, before, static_cast<std::size_t>(config.beam_width),
                                       config.threshold);
  std::vector<Assignment> out;
  for (const auto& s : states) {
    if (s.values.size() != n) continue;
    auto a = materialize(program, proposal, s.values);
    a.z = s.z;
    out.push_back(std::move(a));
  }
  std::stable_sort(out.begin(), out.end(), better);
  return out;
}

std::vector<Assignment> beam_search(const TeacherProgram& program, const Instance& instance,
                                    const SearchConfig& config) {
  std::vector<Assignment> out;
  for (const auto& p : propose(program, instance, config)) {
    auto found = search(program, instance, p, config);
    out.insert(out.end(), std::make_move_iterator(found.begin()), std::make_move_iterator(found.end()));
  }
  std::stable_sort(out.begin(), out.end(), better);
  return out;
}

std::optional<TeacherAnswer> answer(const TeacherProgram& program, const Instance& instance,
                                    const SearchConfig& config) {
  auto all = beam_search(program, instance, config);
  if (all.empty() || all.front().z <= config.threshold || !all.front().answer) return std::nullopt;
  return TeacherAnswer{*all.front().answer, all.front().z, all.front()};
}

SearchConfig strict_config(const SearchConfig& base) {
  auto c = base;
  c.soft = false;
  return c;
}

bool validate(TeacherProgram& program, const SearchConfig& config) {
  const auto a = answer(program, program.reference, strict_config(config));
  program.validated = a && program.reference.gold && a->span == *program.reference.gold && a->z == 1.0;
  return program.validated;
}

std::optional<EnsembleAnswer> ensemble_answer(const std::vector<TeacherProgram>& programs, const Instance& instance,
                                              const SearchConfig& config) {
  std::vector<EnsembleAnswer> answers;
  for (const auto& p : programs) {
    if (!p.validated) continue;
    if (auto a = answer(p, instance, config)) answers.push_back({a->span, a->z, p.id});
  }
  return reduce_answers(answers);
}

std::optional<EnsembleAnswer> reduce_answers(const std::vector<EnsembleAnswer>& answers) {
  std::optional<EnsembleAnswer> best;
  for (const auto& e : answers) {
    if (!best || e.z > best->z ||
        (e.z == best->z && (e.span.start < best->span.start ||
                            (e.span.start == best->span.start && e.teacher_id < best->teacher_id)))) {
      best = e;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Building and persistence

TeacherBuild build_teacher(const Explanation& expl, const Lexicon& lexicon, const Instance& reference,
                           const SearchConfig& config) {
  TeacherBuild b;
  b.parse = parse_explanation(expl, lexicon);
  if (!b.parse.ok()) {
    b.diagnostics = b.parse.diagnostics;
    return b;
  }
  try {
    auto prog = compile(expl, b.parse.forms, reference);
    validate(prog, config);
    b.program = std::move(prog);
  } catch (const CompileError& e) {
    b.diagnostics.push_back(std::string("compile error: ") + e.what());
  }
  return b;
}

std::string bundle_json(const TeacherProgram& program) {
  ordered_json j;
  j["id"] = program.id;
  j["instance_id"] = program.reference.id;
  j["raw_text"] = program.raw_text;
  ordered_json defs = ordered_json::object();
  for (const auto& d : program.variable_defs) defs[d.name] = d.surface;
  j["variable_defs"] = defs;
  ordered_json forms = ordered_json::array();
  for (const auto& f : program.forms) forms.push_back(to_string(f));
  j["logical_forms"] = forms;
  j["validated"] = program.validated;
  return j.dump();
}

TeacherProgram program_from_bundle(const std::string& json_line, const std::vector<Instance>& corpus) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_line);
  } catch (const std::exception& e) {
    throw BundleError(std::string("malformed teacher bundle: ") + e.what());
  }
  for (const char* field : {"id", "instance_id", "raw_text", "logical_forms"}) {
    if (!j.contains(field)) throw BundleError(std::string("teacher bundle lacks \"") + field + "\"");
  }
  const auto instance_id = j["instance_id"].get<std::string>();
  auto ref = std::find_if(corpus.begin(), corpus.end(), [&](const Instance& i) { return i.id == instance_id; });
  if (ref == corpus.end()) throw BundleError("teacher bundle references unknown instance " + instance_id);
  auto expl = make_explanation(j["id"].get<std::string>(), instance_id, j["raw_text"].get<std::string>());
  std::vector<LogicalForm> forms;
  try {
    for (const auto& f : j["logical_forms"]) forms.push_back(parse_logical_form(f.get<std::string>()));
  } catch (const LfSyntaxError& e) {
    throw BundleError(std::string("teacher bundle has a malformed logical form: ") + e.what());
  }
  TeacherProgram prog;
  try {
    prog = compile(expl, forms, *ref);
  } catch (const CompileError& e) {
    throw BundleError(std::string("teacher bundle does not compile: ") + e.what());
  }
  if (prog.id != j["id"].get<std::string>()) throw BundleError("teacher bundle id does not match its content");
  validate(prog);
  return prog;
}

void save_teachers(const std::vector<TeacherProgram>& programs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot write");
  for (const auto& p : programs) out << bundle_json(p) << '\n';
}

std::vector<TeacherProgram> load_teachers(const std::string& path, const std::vector<Instance>& corpus) {
  std::ifstream in(path);
  if (!in) throw BundleError(path + ": cannot open");
  std::vector<TeacherProgram> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(program_from_bundle(line, corpus));
    } catch (const BundleError& e) {
      throw BundleError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace nmt
