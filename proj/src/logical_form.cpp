#include "nmt/logical_form.hpp"

#include <algorithm>
#include <cctype>

namespace nmt {

LogicalForm LogicalForm::pred(std::string name, std::vector<LogicalForm> args) {
  LogicalForm lf;
  lf.kind = Kind::Pred;
  lf.name = std::move(name);
  lf.args = std::move(args);
  return lf;
}

LogicalForm LogicalForm::answer() {
  LogicalForm lf;
  lf.kind = Kind::Answer;
  return lf;
}

LogicalForm LogicalForm::question() {
  LogicalForm lf;
  lf.kind = Kind::Question;
  return lf;
}

LogicalForm LogicalForm::variable(std::string name) {
  LogicalForm lf;
  lf.kind = Kind::Variable;
  lf.name = std::move(name);
  return lf;
}

LogicalForm LogicalForm::literal(std::string text) {
  LogicalForm lf;
  lf.kind = Kind::Literal;
  lf.name = std::move(text);
  return lf;
}

LogicalForm LogicalForm::num(int n) {
  LogicalForm lf;
  lf.kind = Kind::Number;
  lf.number = n;
  return lf;
}

LogicalForm LogicalForm::type_name(AnswerType t) {
  LogicalForm lf;
  lf.kind = Kind::Type;
  lf.type = t;
  return lf;
}

int LogicalForm::depth() const {
  int d = 0;
  for (const auto& a : args) d = std::max(d, a.depth());
  return d + 1;
}

const std::vector<std::string>& known_predicates() {
  static const std::vector<std::string> preds = {
      "Is", "Direct", "Left", "Right", "LessThan", "And", "Or", "StartsWith", "In", "AnswerType", "Between"};
  return preds;
}

std::string to_string(const LogicalForm& lf) {
  switch (lf.kind) {
    case LogicalForm::Kind::Answer: return "Answer";
    case LogicalForm::Kind::Question: return "Question";
    case LogicalForm::Kind::Variable: return lf.name;
    case LogicalForm::Kind::Number: return std::to_string(lf.number);
    case LogicalForm::Kind::Type: return std::string(to_string(lf.type));
    case LogicalForm::Kind::Literal: {
      std::string out = "\"";
      for (char c : lf.name) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
      }
      out.push_back('"');
      return out;
    }
    case LogicalForm::Kind::Pred: {
      std::string out = "@" + lf.name + "(";
      for (std::size_t i = 0; i < lf.args.size(); ++i) {
        if (i) out += ", ";
        out += to_string(lf.args[i]);
      }
      out += ")";
      return out;
    }
  }
  return {};
}

namespace {

class LfReader {
 public:
  explicit LfReader(std::string_view text) : text_(text) {}

  LogicalForm read_all() {
    auto lf = read();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
    return lf;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw LfSyntaxError("logical form: " + why + " at offset " + std::to_string(pos_) + " in '" +
                        std::string(text_) + "'");
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string ident() {
    skip_ws();
    const auto start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    if (start == pos_) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  LogicalForm read() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end");
    const char c = text_[pos_];
    if (c == '@') {
      ++pos_;
      auto name = ident();
      if (!eat('(')) fail("expected '('");
      std::vector<LogicalForm> args;
      if (!eat(')')) {
        do {
          args.push_back(read());
        } while (eat(','));
        if (!eat(')')) fail("expected ')'");
      }
      return LogicalForm::pred(std::move(name), std::move(args));
    }
    if (c == '"') {
      ++pos_;
      std::string out;
      while (pos_ < text_.size() && text_[pos_] != '"') {
        if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
        out.push_back(text_[pos_++]);
      }
      if (pos_ >= text_.size()) fail("unterminated literal");
      ++pos_;
      return LogicalForm::literal(std::move(out));
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
      const auto start = pos_++;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      return LogicalForm::num(std::stoi(std::string(text_.substr(start, pos_ - start))));
    }
    auto name = ident();
    if (name == "Answer") return LogicalForm::answer();
    if (name == "Question") return LogicalForm::question();
    if (auto t = answer_type_from_string(name)) return LogicalForm::type_name(*t);
    return LogicalForm::variable(std::move(name));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void collect_vars(const LogicalForm& lf, std::vector<std::string>& out) {
  if (lf.kind == LogicalForm::Kind::Variable) out.push_back(lf.name);
  for (const auto& a : lf.args) collect_vars(a, out);
}

}  // namespace

LogicalForm parse_logical_form(std::string_view text) { return LfReader(text).read_all(); }

std::vector<std::string> variables_in(const LogicalForm& lf) {
  std::vector<std::string> out;
  collect_vars(lf, out);
  return out;
}

}  // namespace nmt
