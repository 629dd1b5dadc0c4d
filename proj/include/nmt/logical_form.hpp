#pragma once

// Predicate-argument trees produced by the semantic parser, e.g.
//   @Is(Answer, @Direct(@Right(X)))

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nmt/corpus.hpp"

namespace nmt {

struct LogicalForm {
  enum class Kind { Pred, Answer, Question, Variable, Literal, Number, Type };

  Kind kind = Kind::Pred;
  std::string name;  // predicate name without '@', variable name, or literal text
  int number = 0;
  AnswerType type = AnswerType::OTHER;
  std::vector<LogicalForm> args;

  static LogicalForm pred(std::string name, std::vector<LogicalForm> args);
  static LogicalForm answer();
  static LogicalForm question();
  static LogicalForm variable(std::string name);
  static LogicalForm literal(std::string text);
  static LogicalForm num(int n);
  static LogicalForm type_name(AnswerType t);

  bool is_pred(std::string_view p) const { return kind == Kind::Pred && name == p; }
  int depth() const;

  friend bool operator==(const LogicalForm&, const LogicalForm&) = default;
};

/// Predicates the compiler knows how to lower.
const std::vector<std::string>& known_predicates();

std::string to_string(const LogicalForm& lf);

struct LfSyntaxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Inverse of to_string.
LogicalForm parse_logical_form(std::string_view text);

/// Every Variable leaf name in the tree, in pre-order, with repeats.
std::vector<std::string> variables_in(const LogicalForm& lf);

}  // namespace nmt
