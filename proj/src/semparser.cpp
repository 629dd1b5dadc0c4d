#include "nmt/semparser.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace nmt {

// ---------------------------------------------------------------------------
// Categories

Category Category::atom(std::string name) {
  Category c;
  c.atom_ = std::move(name);
  return c;
}

Category Category::functor(Category result, Slash slash, Category arg) {
  Category c;
  c.slash_ = slash;
  c.result_ = std::make_shared<const Category>(std::move(result));
  c.arg_ = std::make_shared<const Category>(std::move(arg));
  return c;
}

bool operator==(const Category& a, const Category& b) {
  if (a.slash_ != b.slash_) return false;
  if (a.is_atomic()) return a.atom_ == b.atom_;
  return *a.result_ == *b.result_ && *a.arg_ == *b.arg_;
}

std::string Category::str() const {
  if (is_atomic()) return atom_;
  auto wrap = [](const Category& c) { return c.is_atomic() ? c.str() : "(" + c.str() + ")"; };
  return wrap(*result_) + (slash_ == Slash::Forward ? "/" : "\\") + wrap(*arg_);
}

namespace {

class CategoryReader {
 public:
  explicit CategoryReader(std::string_view text) : text_(text) {}

  Category read_all() {
    auto c = read_cat();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return c;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw CategoryError("malformed category '" + std::string(text_) + "': " + why);
  }
  void skip_ws() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }
  Category read_cat() {
    auto left = read_primary();
    for (;;) {
      skip_ws();
      if (pos_ >= text_.size() || (text_[pos_] != '/' && text_[pos_] != '\\')) return left;
      const auto slash = text_[pos_++] == '/' ? Category::Slash::Forward : Category::Slash::Backward;
      left = Category::functor(std::move(left), slash, read_primary());
    }
  }
  Category read_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end");
    if (text_[pos_] == '(') {
      ++pos_;
      auto c = read_cat();
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("unbalanced parentheses");
      ++pos_;
      return c;
    }
    for (std::string_view a : {"NP", "PP", "S", "N"}) {
      if (text_.substr(pos_, a.size()) == a) {
        pos_ += a.size();
        return Category::atom(std::string(a));
      }
    }
    fail("unknown atom");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Category Category::parse(std::string_view text) { return CategoryReader(text).read_all(); }

// ---------------------------------------------------------------------------
// Lambda terms

struct Term {
  enum class Kind { Lam, App, Var, Pred, Leaf, Slot };
  Kind kind = Kind::Leaf;
  std::string name;
  std::vector<TermPtr> kids;
  LogicalForm leaf;
  int slot = 0;
};

namespace {

TermPtr make_lam(std::string param, TermPtr body) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::Lam;
  t->name = std::move(param);
  t->kids = {std::move(body)};
  return t;
}

TermPtr make_app(TermPtr fn, TermPtr arg) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::App;
  t->kids = {std::move(fn), std::move(arg)};
  return t;
}

TermPtr make_var(std::string name) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::Var;
  t->name = std::move(name);
  return t;
}

TermPtr make_pred(std::string name, std::vector<TermPtr> args) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::Pred;
  t->name = std::move(name);
  t->kids = std::move(args);
  return t;
}

TermPtr make_leaf(LogicalForm lf) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::Leaf;
  t->leaf = std::move(lf);
  return t;
}

TermPtr make_slot(int k) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::Slot;
  t->slot = k;
  return t;
}

class SemanticsReader {
 public:
  explicit SemanticsReader(std::string_view text) : text_(text) {}

  TermPtr read_all() {
    auto t = read_term();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw LexiconError("semantics '" + std::string(text_) + "': " + why + " at offset " + std::to_string(pos_));
  }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool eat(std::string_view s) {
    skip_ws();
    if (text_.substr(pos_, s.size()) == s) {
      pos_ += s.size();
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

  TermPtr read_term() {
    if (eat("\\") || eat("\xCE\xBB")) {  // '\' or 'λ'
      auto param = ident();
      if (!eat(".")) fail("expected '.' after lambda parameter");
      return make_lam(std::move(param), read_term());
    }
    return read_primary();
  }

  TermPtr read_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto t = read_term();
      if (!eat(")")) fail("expected ')'");
      return t;
    }
    if (c == '@') {
      ++pos_;
      auto name = ident();
      if (!eat("(")) fail("expected '('");
      std::vector<TermPtr> args;
      if (!eat(")")) {
        do {
          args.push_back(read_term());
        } while (eat(","));
        if (!eat(")")) fail("expected ')'");
      }
      return make_pred(std::move(name), std::move(args));
    }
    if (c == '$') {
      ++pos_;
      const auto start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (start == pos_) fail("expected slot number after '$'");
      return make_slot(std::stoi(std::string(text_.substr(start, pos_ - start))));
    }
    if (c == '"') {
      ++pos_;
      const auto start = pos_;
      while (pos_ < text_.size() && text_[pos_] != '"') ++pos_;
      if (pos_ >= text_.size()) fail("unterminated literal");
      auto lit = std::string(text_.substr(start, pos_ - start));
      ++pos_;
      return make_leaf(LogicalForm::literal(std::move(lit)));
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      const auto start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      return make_leaf(LogicalForm::num(std::stoi(std::string(text_.substr(start, pos_ - start)))));
    }
    auto name = ident();
    if (name == "Answer") return make_leaf(LogicalForm::answer());
    if (name == "Question") return make_leaf(LogicalForm::question());
    if (auto t = answer_type_from_string(name)) return make_leaf(LogicalForm::type_name(*t));
    if (name.size() == 1 && std::isupper(static_cast<unsigned char>(name[0]))) {
      return make_leaf(LogicalForm::variable(name));
    }
    TermPtr t = make_var(std::move(name));
    while (eat("(")) {  // application: f(x)
      t = make_app(t, read_term());
      if (!eat(")")) fail("expected ')'");
    }
    return t;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

TermPtr subst(const TermPtr& t, const std::string& name, const TermPtr& value) {
  switch (t->kind) {
    case Term::Kind::Var:
      return t->name == name ? value : t;
    case Term::Kind::Lam:
      if (t->name == name) return t;
      return make_lam(t->name, subst(t->kids[0], name, value));
    case Term::Kind::App:
      return make_app(subst(t->kids[0], name, value), subst(t->kids[1], name, value));
    case Term::Kind::Pred: {
      std::vector<TermPtr> kids;
      kids.reserve(t->kids.size());
      for (const auto& k : t->kids) kids.push_back(subst(k, name, value));
      return make_pred(t->name, std::move(kids));
    }
    default:
      return t;
  }
}

TermPtr normalize(const TermPtr& t) {
  switch (t->kind) {
    case Term::Kind::App: {
      auto fn = normalize(t->kids[0]);
      auto arg = normalize(t->kids[1]);
      if (fn->kind == Term::Kind::Lam) return normalize(subst(fn->kids[0], fn->name, arg));
      return make_app(std::move(fn), std::move(arg));
    }
    case Term::Kind::Lam:
      return make_lam(t->name, normalize(t->kids[0]));
    case Term::Kind::Pred: {
      std::vector<TermPtr> kids;
      for (const auto& k : t->kids) kids.push_back(normalize(k));
      return make_pred(t->name, std::move(kids));
    }
    default:
      return t;
  }
}

/// Renames binders to fresh names and fills wildcard slots.
TermPtr instantiate(const TermPtr& t, const std::vector<TermPtr>& slots, int& counter,
                    std::map<std::string, std::string>& renames) {
  switch (t->kind) {
    case Term::Kind::Slot:
      if (t->slot < 1 || t->slot > static_cast<int>(slots.size())) {
        throw LexiconError("semantics slot $" + std::to_string(t->slot) + " has no matching wildcard");
      }
      return slots[t->slot - 1];
    case Term::Kind::Var: {
      auto it = renames.find(t->name);
      return it == renames.end() ? t : make_var(it->second);
    }
    case Term::Kind::Lam: {
      const auto fresh = "v" + std::to_string(counter++);
      auto saved = renames;
      renames[t->name] = fresh;
      auto body = instantiate(t->kids[0], slots, counter, renames);
      renames = std::move(saved);
      return make_lam(fresh, std::move(body));
    }
    case Term::Kind::App:
      return make_app(instantiate(t->kids[0], slots, counter, renames),
                      instantiate(t->kids[1], slots, counter, renames));
    case Term::Kind::Pred: {
      std::vector<TermPtr> kids;
      for (const auto& k : t->kids) kids.push_back(instantiate(k, slots, counter, renames));
      return make_pred(t->name, std::move(kids));
    }
    case Term::Kind::Leaf:
      return t;
  }
  return t;
}

void print_term(const TermPtr& t, std::string& out, std::map<std::string, std::string>& names, int& counter) {
  switch (t->kind) {
    case Term::Kind::Lam: {
      const auto canon = "x" + std::to_string(counter++);
      auto saved = names;
      names[t->name] = canon;
      out += "\\" + canon + ".";
      print_term(t->kids[0], out, names, counter);
      names = std::move(saved);
      return;
    }
    case Term::Kind::App:
      out += "(";
      print_term(t->kids[0], out, names, counter);
      out += " ";
      print_term(t->kids[1], out, names, counter);
      out += ")";
      return;
    case Term::Kind::Var: {
      auto it = names.find(t->name);
      out += it == names.end() ? t->name : it->second;
      return;
    }
    case Term::Kind::Pred:
      out += "@" + t->name + "(";
      for (std::size_t i = 0; i < t->kids.size(); ++i) {
        if (i) out += ", ";
        print_term(t->kids[i], out, names, counter);
      }
      out += ")";
      return;
    case Term::Kind::Leaf:
      out += to_string(t->leaf);
      return;
    case Term::Kind::Slot:
      out += "$" + std::to_string(t->slot);
      return;
  }
}

std::optional<LogicalForm> to_logical_form(const TermPtr& t) {
  switch (t->kind) {
    case Term::Kind::Leaf:
      return t->leaf;
    case Term::Kind::Pred: {
      std::vector<LogicalForm> args;
      for (const auto& k : t->kids) {
        auto a = to_logical_form(k);
        if (!a) return std::nullopt;
        args.push_back(std::move(*a));
      }
      return LogicalForm::pred(t->name, std::move(args));
    }
    default:
      return std::nullopt;
  }
}

// "between X and Y" parses as @Between(@And(X, Y)); flatten to @Between(X, Y).
LogicalForm tidy(LogicalForm lf) {
  for (auto& a : lf.args) a = tidy(std::move(a));
  if (lf.is_pred("Between") && lf.args.size() == 1 && lf.args[0].is_pred("And")) {
    auto inner = std::move(lf.args[0].args);
    lf.args = std::move(inner);
  }
  return lf;
}

bool mentions(const LogicalForm& lf, LogicalForm::Kind kind) {
  if (lf.kind == kind) return true;
  return std::any_of(lf.args.begin(), lf.args.end(), [kind](const LogicalForm& a) { return mentions(a, kind); });
}

// Sum of depths of question-scoping nodes; smaller means wider scope.
int scope_depth(const LogicalForm& lf, int depth = 1) {
  int total = 0;
  if (lf.is_pred("In") && lf.args.size() == 2 && lf.args[0].kind == LogicalForm::Kind::Pred &&
      lf.args[1].kind == LogicalForm::Kind::Question) {
    total += depth;
  }
  for (const auto& a : lf.args) total += scope_depth(a, depth + 1);
  return total;
}

}  // namespace

TermPtr parse_semantics(std::string_view text) { return SemanticsReader(text).read_all(); }

int lambda_arity(const TermPtr& t) { return t->kind == Term::Kind::Lam ? 1 + lambda_arity(t->kids[0]) : 0; }

std::string to_string(const TermPtr& t) {
  std::string out;
  std::map<std::string, std::string> names;
  int counter = 0;
  print_term(t, out, names, counter);
  return out;
}

// ---------------------------------------------------------------------------
// Explanation text

namespace {

std::string normalize_quotes(std::string_view raw) {
  std::string s(raw);
  auto replace_all = [&s](std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all("\xE2\x80\x9C", "\"");  // “
  replace_all("\xE2\x80\x9D", "\"");  // ”
  replace_all("``", "\"");
  replace_all("''", "\"");
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

const std::map<std::string, int>& number_words() {
  static const std::map<std::string, int> words = {
      {"zero", 0}, {"one", 1}, {"two", 2}, {"three", 3}, {"four", 4}, {"five", 5},
      {"six", 6},  {"seven", 7}, {"eight", 8}, {"nine", 9}, {"ten", 10}};
  return words;
}

bool is_variable_name(std::string_view w) {
  return w.size() == 1 && std::string_view("XYZWV").find(w[0]) != std::string_view::npos;
}

}  // namespace

std::vector<ExplToken> tokenize_explanation_sentence(std::string_view sentence) {
  const std::string s = normalize_quotes(sentence);
  std::vector<ExplToken> out;
  std::size_t i = 0;
  auto flush_word = [&out](std::string word) {
    // Strip edge punctuation; internal apostrophes and hyphens stay.
    while (!word.empty() && std::ispunct(static_cast<unsigned char>(word.back()))) word.pop_back();
    std::size_t b = 0;
    while (b < word.size() && std::ispunct(static_cast<unsigned char>(word[b]))) ++b;
    word = word.substr(b);
    if (word.empty()) return;
    ExplToken t;
    if (is_variable_name(word)) {
      t.kind = ExplToken::Kind::Var;
      t.text = word;
    } else if (std::all_of(word.begin(), word.end(), [](unsigned char c) { return std::isdigit(c); })) {
      t.kind = ExplToken::Kind::Num;
      t.text = word;
      t.number = std::stoi(word);
    } else if (auto it = number_words().find(lower(word)); it != number_words().end()) {
      t.kind = ExplToken::Kind::Num;
      t.text = std::to_string(it->second);
      t.number = it->second;
    } else {
      t.kind = ExplToken::Kind::Word;
      t.text = lower(word);
    }
    out.push_back(std::move(t));
  };

  std::string word;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '"') {
      flush_word(std::move(word));
      word.clear();
      const auto close = s.find('"', i + 1);
      const auto end = close == std::string::npos ? s.size() : close;
      ExplToken t;
      t.kind = ExplToken::Kind::Quote;
      t.text = trim(std::string_view(s).substr(i + 1, end - i - 1));
      out.push_back(std::move(t));
      i = end + 1;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == ';' || c == ':') {
      flush_word(std::move(word));
      word.clear();
    } else {
      word.push_back(c);
    }
    ++i;
  }
  flush_word(std::move(word));
  return out;
}

std::vector<std::string> split_explanation(std::string_view raw) {
  const std::string s = normalize_quotes(raw);
  std::vector<std::string> coarse;
  std::string current;
  bool in_quote = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '"') in_quote = !in_quote;
    if (!in_quote && (c == '.' || c == '!' || c == '?' || c == ';' || c == '\n')) {
      coarse.push_back(current);
      current.clear();
      continue;
    }
    current.push_back(c);
  }
  coarse.push_back(current);

  std::vector<std::string> out;
  for (const auto& sent : coarse) {
    // Split on ", so " outside quotes.
    std::string piece;
    bool q = false;
    for (std::size_t i = 0; i < sent.size(); ++i) {
      if (sent[i] == '"') q = !q;
      if (!q && sent[i] == ',' && lower(sent.substr(i, 5)) == ", so ") {
        if (auto t = trim(piece); !t.empty()) out.push_back(t);
        piece.clear();
        i += 4;
        continue;
      }
      piece.push_back(sent[i]);
    }
    if (auto t = trim(piece); !t.empty()) out.push_back(t);
  }
  return out;
}

namespace {

std::optional<VariableDef> as_definition(std::string_view sentence) {
  const auto toks = tokenize_explanation_sentence(sentence);
  if (toks.size() == 3 && toks[0].kind == ExplToken::Kind::Var && toks[1].kind == ExplToken::Kind::Word &&
      toks[1].text == "is" && toks[2].kind == ExplToken::Kind::Quote && !toks[2].text.empty()) {
    return VariableDef{toks[0].text, toks[2].text};
  }
  return std::nullopt;
}

}  // namespace

std::vector<VariableDef> extract_variables(std::string_view raw_text) {
  std::vector<VariableDef> defs;
  for (const auto& sentence : split_explanation(raw_text)) {
    auto def = as_definition(sentence);
    if (!def) continue;
    for (const auto& d : defs) {
      if (d.name == def->name) {
        throw ExplanationError("variable " + def->name + " defined twice (\"" + d.surface + "\" and \"" +
                               def->surface + "\")");
      }
    }
    defs.push_back(std::move(*def));
  }
  return defs;
}

const VariableDef* Explanation::find_variable(std::string_view name) const {
  for (const auto& d : variable_defs) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

Explanation make_explanation(std::string id, std::string instance_id, std::string raw_text) {
  Explanation e;
  e.id = std::move(id);
  e.instance_id = std::move(instance_id);
  e.variable_defs = extract_variables(raw_text);
  for (auto& sentence : split_explanation(raw_text)) {
    if (!as_definition(sentence)) e.sentences.push_back(std::move(sentence));
  }
  e.raw_text = std::move(raw_text);
  return e;
}

std::vector<Explanation> load_explanations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ExplanationError(path + ": cannot open file");
  std::vector<Explanation> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back(make_explanation(j.at("id").get<std::string>(), j.at("instance_id").get<std::string>(),
                                     j.at("text").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw ExplanationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexicon

std::string LexiconEntry::surface_text() const {
  std::string out;
  for (std::size_t i = 0; i < surface.size(); ++i) {
    if (i) out += ' ';
    out += surface[i];
  }
  return out;
}

void Lexicon::add(LexiconEntry entry) {
  if (entry.surface.empty()) throw LexiconError("entry with empty surface");
  if (!entry.semantics) throw LexiconError("entry '" + entry.surface_text() + "' has no semantics");
  for (const auto& e : entries_) {
    if (e.surface == entry.surface && e.category == entry.category) {
      throw LexiconError("duplicate entry '" + entry.surface_text() + "' with category " + entry.category.str());
    }
  }
  if (lambda_arity(entry.semantics) != entry.category.arity()) {
    throw LexiconError("entry '" + entry.surface_text() + "': semantics arity " +
                       std::to_string(lambda_arity(entry.semantics)) + " does not match category " +
                       entry.category.str());
  }
  index_[entry.surface.front()].push_back(entries_.size());
  entries_.push_back(std::move(entry));
}

const std::vector<std::size_t>& Lexicon::index(const std::string& first) const {
  static const std::vector<std::size_t> none;
  auto it = index_.find(first);
  return it == index_.end() ? none : it->second;
}

Lexicon lexicon_from_json(std::string_view json_text, const std::string& origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw LexiconError(origin + ": malformed JSON: " + e.what());
  }
  if (!doc.is_array()) throw LexiconError(origin + ": expected a JSON list of entries");

  // Line of the k-th entry, located via its "surface" key.
  std::vector<int> entry_lines;
  {
    int line = 1;
    const std::string key = "\"surface\"";
    for (std::size_t i = 0; i < json_text.size(); ++i) {
      if (json_text[i] == '\n') ++line;
      if (json_text.compare(i, key.size(), key) == 0) entry_lines.push_back(line);
    }
  }

  Lexicon lex;
  for (std::size_t k = 0; k < doc.size(); ++k) {
    const auto& j = doc[k];
    const std::string where = origin + ":" + std::to_string(k < entry_lines.size() ? entry_lines[k] : 0);
    try {
      LexiconEntry e;
      std::istringstream words(j.at("surface").get<std::string>());
      for (std::string w; words >> w;) e.surface.push_back(w.front() == '<' ? w : lower(w));
      e.category = Category::parse(j.at("category").get<std::string>());
      e.semantics = parse_semantics(j.at("semantics").get<std::string>());
      e.priority = j.value("priority", 0);
      lex.add(std::move(e));
    } catch (const CategoryError& e) {
      throw LexiconError(where + ": " + e.what());
    } catch (const LexiconError& e) {
      throw LexiconError(where + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw LexiconError(where + ": " + e.what());
    }
  }
  return lex;
}

Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LexiconError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto text = ss.str();
  if (trim(text).empty()) return {};
  return lexicon_from_json(text, path);
}

// ---------------------------------------------------------------------------
// Chart parsing

namespace {

struct Item {
  Category cat;
  TermPtr sem;
  int skips = 0;
  int priority = 0;
  std::string key;
};

bool better(const Item& a, const Item& b) {
  if (a.skips != b.skips) return a.skips < b.skips;
  return a.priority > b.priority;
}

class Cell {
 public:
  void offer(Item item) {
    item.key = item.cat.str() + "|" + to_string(item.sem);
    auto it = by_key_.find(item.key);
    if (it == by_key_.end()) {
      by_key_.emplace(item.key, items_.size());
      items_.push_back(std::move(item));
    } else if (better(item, items_[it->second])) {
      items_[it->second] = std::move(item);
    }
  }
  void prune(int limit) {
    if (static_cast<int>(items_.size()) <= limit) return;
    std::stable_sort(items_.begin(), items_.end(), better);
    items_.resize(limit);
    by_key_.clear();
    for (std::size_t i = 0; i < items_.size(); ++i) by_key_.emplace(items_[i].key, i);
  }
  const std::vector<Item>& items() const { return items_; }

 private:
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> by_key_;
};

std::string index_key(const ExplToken& t) {
  switch (t.kind) {
    case ExplToken::Kind::Quote: return "<quote>";
    case ExplToken::Kind::Var: return "<var>";
    case ExplToken::Kind::Num: return "<num>";
    case ExplToken::Kind::Word: return t.text;
  }
  return t.text;
}

bool token_matches(const std::string& pattern, const ExplToken& t) {
  if (pattern == "<quote>") return t.kind == ExplToken::Kind::Quote;
  if (pattern == "<var>") return t.kind == ExplToken::Kind::Var;
  if (pattern == "<num>") return t.kind == ExplToken::Kind::Num;
  return t.kind == ExplToken::Kind::Word && t.text == pattern;
}

TermPtr wildcard_value(const ExplToken& t) {
  switch (t.kind) {
    case ExplToken::Kind::Quote: return make_leaf(LogicalForm::literal(t.text));
    case ExplToken::Kind::Var: return make_leaf(LogicalForm::variable(t.text));
    case ExplToken::Kind::Num: return make_leaf(LogicalForm::num(t.number));
    case ExplToken::Kind::Word: return make_leaf(LogicalForm::literal(t.text));
  }
  return nullptr;
}

struct LexicalMatch {
  int start;
  int end;  // exclusive
  std::size_t entry;
  std::vector<TermPtr> slots;
};

std::vector<LexicalMatch> lexical_matches(const std::vector<ExplToken>& toks, const Lexicon& lex) {
  std::vector<LexicalMatch> out;
  const int n = static_cast<int>(toks.size());
  for (int i = 0; i < n; ++i) {
    for (auto idx : lex.index(index_key(toks[i]))) {
      const auto& e = lex.entries()[idx];
      const int len = static_cast<int>(e.surface.size());
      if (i + len > n) continue;
      bool ok = true;
      std::vector<TermPtr> slots;
      for (int k = 0; k < len && ok; ++k) {
        ok = token_matches(e.surface[k], toks[i + k]);
        if (ok && e.surface[k].front() == '<') slots.push_back(wildcard_value(toks[i + k]));
      }
      if (ok) out.push_back({i, i + len, idx, std::move(slots)});
    }
  }
  return out;
}

std::optional<Item> combine(const Item& a, const Item& b, int& fresh) {
  using Slash = Category::Slash;
  // Forward application: X/Y  Y  =>  X
  if (a.cat.slash() == Slash::Forward && a.cat.arg() == b.cat) {
    return Item{a.cat.result(), normalize(make_app(a.sem, b.sem)), a.skips + b.skips, a.priority + b.priority, {}};
  }
  // Backward application: Y  X\Y  =>  X
  if (b.cat.slash() == Slash::Backward && b.cat.arg() == a.cat) {
    return Item{b.cat.result(), normalize(make_app(b.sem, a.sem)), a.skips + b.skips, a.priority + b.priority, {}};
  }
  // Forward composition: X/Y  Y/Z  =>  X/Z
  if (a.cat.slash() == Slash::Forward && b.cat.slash() == Slash::Forward && a.cat.arg() == b.cat.result()) {
    const auto z = "c" + std::to_string(fresh++);
    auto sem = make_lam(z, make_app(a.sem, make_app(b.sem, make_var(z))));
    return Item{Category::functor(a.cat.result(), Slash::Forward, b.cat.arg()), normalize(sem),
                a.skips + b.skips, a.priority + b.priority, {}};
  }
  return std::nullopt;
}

}  // namespace

std::vector<RankedParse> parse_sentence(const std::vector<ExplToken>& toks, const Lexicon& lexicon,
                                        const ParseOptions& options) {
  const int n = static_cast<int>(toks.size());
  if (n == 0 || lexicon.empty()) return {};

  const auto matches = lexical_matches(toks, lexicon);
  std::vector<bool> covered(n, false);
  for (const auto& m : matches) {
    for (int i = m.start; i < m.end; ++i) covered[i] = true;
  }

  // chart[i][j] spans tokens [i, j)
  std::vector<std::vector<Cell>> chart(n + 1, std::vector<Cell>(n + 1));
  int fresh = 0;
  for (const auto& m : matches) {
    const auto& e = lexicon.entries()[m.entry];
    std::map<std::string, std::string> renames;
    auto sem = instantiate(e.semantics, m.slots, fresh, renames);
    chart[m.start][m.end].offer(Item{e.category, normalize(sem), 0, e.priority, {}});
  }

  for (int len = 1; len <= n; ++len) {
    for (int i = 0; i + len <= n; ++i) {
      const int j = i + len;
      auto& cell = chart[i][j];
      for (int k = i + 1; k < j; ++k) {
        for (const auto& a : chart[i][k].items()) {
          for (const auto& b : chart[k][j].items()) {
            if (a.skips + b.skips > options.max_skips) continue;
            if (auto c = combine(a, b, fresh)) cell.offer(std::move(*c));
          }
        }
      }
      // Skip an unmatched filler token at either edge.
      if (len > 1 && !covered[i]) {
        for (const auto& it : chart[i + 1][j].items()) {
          if (it.skips < options.max_skips) cell.offer(Item{it.cat, it.sem, it.skips + 1, it.priority, {}});
        }
      }
      if (len > 1 && !covered[j - 1]) {
        for (const auto& it : chart[i][j - 1].items()) {
          if (it.skips < options.max_skips) cell.offer(Item{it.cat, it.sem, it.skips + 1, it.priority, {}});
        }
      }
      cell.prune(options.cell_limit);
    }
  }

  struct Scored {
    RankedParse parse;
    int scope;
    std::string text;
  };
  std::vector<Scored> scored;
  std::set<std::string> seen;
  const auto s_cat = Category::atom("S");
  for (const auto& it : chart[0][n].items()) {
    if (!(it.cat == s_cat)) continue;
    auto lf = to_logical_form(it.sem);
    if (!lf) continue;
    auto form = tidy(std::move(*lf));
    auto text = to_string(form);
    const int scope = scope_depth(form);
    scored.push_back({RankedParse{std::move(form), it.skips, it.priority}, scope, std::move(text)});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.parse.skips != b.parse.skips) return a.parse.skips < b.parse.skips;
    if (a.parse.priority != b.parse.priority) return a.parse.priority > b.parse.priority;
    if (a.scope != b.scope) return a.scope < b.scope;
    return a.text < b.text;
  });
  std::vector<RankedParse> out;
  for (auto& s : scored) {
    if (seen.insert(s.text).second) out.push_back(std::move(s.parse));
  }
  return out;
}

std::vector<RankedParse> parse_sentence(std::string_view sentence, const Lexicon& lexicon,
                                        const ParseOptions& options) {
  return parse_sentence(tokenize_explanation_sentence(sentence), lexicon, options);
}

ExplanationParse parse_explanation(const Explanation& expl, const Lexicon& lexicon, const ParseOptions& options) {
  ExplanationParse out;
  if (expl.sentences.empty()) {
    out.diagnostics.push_back("explanation has no rule sentences (no constraints)");
    return out;
  }
  bool mentions_answer = false;
  for (const auto& sentence : expl.sentences) {
    SentenceParse sp{sentence, parse_sentence(sentence, lexicon, options)};
    if (sp.parses.empty()) {
      out.diagnostics.push_back("unparsable sentence: \"" + sentence + "\"");
    } else {
      const auto& top = sp.parses.front().form;
      for (const auto& v : variables_in(top)) {
        if (!expl.find_variable(v)) {
          out.diagnostics.push_back("undefined variable " + v + " in sentence: \"" + sentence + "\"");
        }
      }
      if (mentions(top, LogicalForm::Kind::Answer)) mentions_answer = true;
      out.forms.push_back(top);
    }
    out.sentences.push_back(std::move(sp));
  }
  if (out.ok() && !mentions_answer) out.diagnostics.push_back("no rule constrains the answer");
  if (!out.ok()) out.forms.clear();
  return out;
}

}  // namespace nmt
