#include "nmt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace nmt {

using json = nlohmann::json;

std::string_view to_string(Pos pos) {
  switch (pos) {
    case Pos::NOUN: return "NOUN";
    case Pos::PROPN: return "PROPN";
    case Pos::VERB: return "VERB";
    case Pos::ADJ: return "ADJ";
    case Pos::ADV: return "ADV";
    case Pos::NUM: return "NUM";
    case Pos::DET: return "DET";
    case Pos::ADP: return "ADP";
    case Pos::PUNCT: return "PUNCT";
    case Pos::OTHER: return "OTHER";
  }
  return "OTHER";
}

namespace {

// ---------------------------------------------------------------------------
// UTF-8 scanning

struct CodePoint {
  char32_t value;
  int byte_start;
  int byte_len;
};

std::vector<CodePoint> decode_utf8(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  int i = 0;
  const int n = static_cast<int>(s.size());
  while (i < n) {
    auto c = static_cast<unsigned char>(s[i]);
    int len = 1;
    char32_t v = c;
    if (c >= 0xF0) {
      len = 4;
      v = c & 0x07;
    } else if (c >= 0xE0) {
      len = 3;
      v = c & 0x0F;
    } else if (c >= 0xC0) {
      len = 2;
      v = c & 0x1F;
    }
    if (i + len > n) len = 1;  // truncated sequence: treat the byte as-is
    for (int k = 1; k < len; ++k) v = (v << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back({v, i, len});
    i += len;
  }
  return out;
}

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' ||
         c == 0xA0 || (c >= 0x2000 && c <= 0x200B) || c == 0x3000 || c == 0x202F;
}

bool is_punct(char32_t c) {
  if (c < 0x80) return std::ispunct(static_cast<int>(c)) != 0;
  switch (c) {
    case 0x2018: case 0x2019: case 0x201C: case 0x201D: case 0x2013: case 0x2014:
    case 0x2026: case 0x00AB: case 0x00BB: case 0x00BF: case 0x00A1: case 0x00B7:
    case 0x2022: case 0x2032: case 0x2033:
      return true;
    default:
      return false;
  }
}

bool is_alnum(char32_t c) { return !is_space(c) && !is_punct(c); }
bool is_apostrophe(char32_t c) { return c == U'\'' || c == 0x2019; }

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> set = {
      "st", "mr", "mrs", "ms", "dr", "jr", "sr", "vs", "etc", "no", "co", "inc", "ltd",
      "gen", "gov", "sen", "rep", "prof", "mt", "ft", "u.s", "u.k", "e.g", "i.e", "a.m", "p.m"};
  return set;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

// ---------------------------------------------------------------------------
// Coarse POS tagging

const std::unordered_set<std::string> kDet = {
    "the", "a", "an", "this", "that", "these", "those", "his", "her", "its", "their",
    "our", "my", "your", "whose", "what", "which", "some", "any", "each", "every", "no",
    "many", "several", "few", "all", "both", "another", "either", "neither", "such", "much"};
const std::unordered_set<std::string> kAdp = {
    "in", "on", "at", "by", "for", "with", "from", "to", "of", "about", "against",
    "between", "into", "through", "during", "before", "after", "above", "below", "under",
    "over", "since", "until", "around", "among", "within", "without", "near", "across",
    "behind", "beyond", "per", "via", "upon", "toward", "towards", "like", "as", "onto",
    "off", "throughout", "amid", "despite", "except", "inside", "outside", "unlike"};
const std::unordered_set<std::string> kOther = {
    "and", "or", "but", "nor", "so", "yet", "if", "because", "while", "although", "though",
    "than", "whether", "unless", "i", "you", "he", "she", "it", "we", "they", "me", "him",
    "us", "them", "who", "whom", "myself", "yourself", "himself", "herself", "itself",
    "ourselves", "themselves", "there", "something", "someone", "anyone", "everyone",
    "nothing", "'s", "’s", "not"};
const std::unordered_set<std::string> kAdv = {
    "when", "where", "why", "how", "very", "also", "eventually", "highly", "directly",
    "annually", "afterwards", "only", "just", "often", "never", "always", "still",
    "already", "then", "now", "soon", "later", "here", "ago", "again", "too", "even",
    "rather", "almost", "nearly", "down", "up", "out", "away", "back"};
const std::unordered_set<std::string> kVerb = {
    "is", "was", "are", "were", "be", "been", "being", "am", "has", "have", "had", "do",
    "does", "did", "will", "would", "can", "could", "should", "may", "might", "must",
    "shall", "held", "hold", "holds", "begin", "begins", "began", "begun", "rebel",
    "rebels", "bound", "found", "build", "built", "make", "made", "take", "took", "taken",
    "give", "gave", "given", "become", "became", "born", "die", "win", "won", "lose",
    "lost", "write", "wrote", "written", "lead", "led", "know", "known", "run", "ran",
    "see", "saw", "seen", "go", "went", "gone", "come", "came", "get", "got", "say",
    "said", "tell", "told", "think", "thought", "bring", "brought", "buy", "bought",
    "sell", "sold", "meet", "met", "pay", "paid", "stand", "stood", "keep", "kept",
    "hear", "heard", "feel", "felt", "fight", "fought", "teach", "taught", "catch",
    "caught", "rise", "rose", "fall", "fell", "grow", "grew", "draw", "drew", "fly",
    "flew", "break", "broke", "speak", "spoke", "spoken", "choose", "chose", "sit", "sat",
    "sing", "sang", "throw", "threw", "wear", "wore", "hang", "hung", "shut", "spread",
    "beat", "hit", "let", "read", "put", "cut", "start", "starts", "end", "ends",
    "open", "opens", "close", "closes", "contain", "contains", "include", "includes",
    "own", "owns", "appear", "appears", "live", "lives", "play", "plays", "use", "uses"};
const std::unordered_set<std::string> kAdj = {
    "great", "new", "old", "large", "small", "high", "low", "secret", "rare", "good",
    "bad", "big", "long", "short", "early", "late", "major", "minor", "main", "first",
    "last", "next", "other", "same", "different", "whole", "certain", "free", "full",
    "important", "public", "private", "local", "military", "national", "international",
    "northern", "southern", "eastern", "western", "royal", "ancient", "modern", "soluble",
    "available", "able", "possible", "famous", "popular", "red", "blue", "green", "black",
    "white", "young", "strong", "rich", "poor", "wide", "deep"};
const std::unordered_set<std::string> kNumberWords = {
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen",
    "eighteen", "nineteen", "twenty", "thirty", "forty", "fifty", "sixty", "seventy",
    "eighty", "ninety", "hundred", "thousand", "million", "billion", "dozen"};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool starts_upper(std::string_view s) {
  return !s.empty() && static_cast<unsigned char>(s[0]) < 0x80 && std::isupper(static_cast<unsigned char>(s[0]));
}

bool starts_digit(std::string_view s) {
  return !s.empty() && std::isdigit(static_cast<unsigned char>(s[0]));
}

Pos lexical_pos(const std::string& lower) {
  if (kDet.contains(lower)) return Pos::DET;
  if (kAdp.contains(lower)) return Pos::ADP;
  if (kOther.contains(lower)) return Pos::OTHER;
  if (kAdv.contains(lower)) return Pos::ADV;
  if (kVerb.contains(lower)) return Pos::VERB;
  if (kAdj.contains(lower)) return Pos::ADJ;
  if (kNumberWords.contains(lower)) return Pos::NUM;
  return Pos::NOUN;  // sentinel: "no lexicon entry"
}

bool in_lexicon(const std::string& lower) {
  return kDet.contains(lower) || kAdp.contains(lower) || kOther.contains(lower) ||
         kAdv.contains(lower) || kVerb.contains(lower) || kAdj.contains(lower) ||
         kNumberWords.contains(lower);
}

Pos suffix_pos(const std::string& lower) {
  if (ends_with(lower, "ly")) return Pos::ADV;
  if (ends_with(lower, "ed")) return Pos::VERB;
  if (ends_with(lower, "ing") && lower.size() > 4) return Pos::VERB;
  if (ends_with(lower, "ize") || ends_with(lower, "ise") || ends_with(lower, "ify")) return Pos::VERB;
  for (std::string_view suf : {"ous", "ful", "ive", "able", "ible", "ical", "less", "ish", "ic"}) {
    if (ends_with(lower, suf)) return Pos::ADJ;
  }
  return Pos::NOUN;
}

std::string make_shape(std::string_view text) {
  std::string out;
  char prev = 0;
  int run = 0;
  for (unsigned char c : text) {
    char m;
    if (c >= 0x80) m = 'x';
    else if (std::isupper(c)) m = 'X';
    else if (std::islower(c)) m = 'x';
    else if (std::isdigit(c)) m = 'd';
    else m = static_cast<char>(c);
    if (m == prev) {
      if (++run > 4) continue;
    } else {
      run = 1;
      prev = m;
    }
    out.push_back(m);
  }
  return out;
}

void tag(std::vector<Token>& toks) {
  std::vector<bool> gerund_candidate(toks.size(), false);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    auto& t = toks[i];
    const auto& lower = t.lower;
    const auto cps = decode_utf8(t.text);
    if (t.text == "%") {
      t.pos = Pos::NOUN;
    } else if (t.text == "$") {
      t.pos = Pos::OTHER;
    } else if (cps.size() == 1 && is_punct(cps[0].value)) {
      t.pos = Pos::PUNCT;
    } else if (starts_digit(t.text)) {
      t.pos = Pos::NUM;
    } else if (in_lexicon(lower)) {
      t.pos = lexical_pos(lower);
    } else if (starts_upper(t.text)) {
      t.pos = Pos::PROPN;
    } else {
      t.pos = suffix_pos(lower);
      gerund_candidate[i] = t.pos == Pos::VERB && ends_with(lower, "ing");
    }
  }
  // Gerunds acting as nouns: "packet switching characterized", "hunting regulated".
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (!gerund_candidate[i]) continue;
    const bool nominal_left = i > 0 && (toks[i - 1].pos == Pos::DET || toks[i - 1].pos == Pos::ADJ ||
                                        toks[i - 1].pos == Pos::NOUN || toks[i - 1].pos == Pos::PROPN);
    const bool verb_right = i + 1 < toks.size() && toks[i + 1].pos == Pos::VERB;
    if (nominal_left || verb_right) toks[i].pos = Pos::NOUN;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// TokenSeq

TokenSeq::TokenSeq(std::string source, std::vector<Token> tokens)
    : source_(std::move(source)), tokens_(std::move(tokens)) {}

std::string TokenSeq::text(const Span& s) const {
  if (!valid(s)) throw std::out_of_range("span outside token sequence");
  const int b = tokens_[s.start].byte_start;
  const int e = tokens_[s.end].byte_end;
  return source_.substr(b, e - b);
}

std::string TokenSeq::normalized(const Span& s) const {
  std::string out;
  for (int i = s.start; i <= s.end; ++i) {
    if (i > s.start) out.push_back(' ');
    out += tokens_[i].lower;
  }
  return out;
}

std::string TokenSeq::detokenize() const {
  std::string out;
  int cursor = 0;
  for (const auto& t : tokens_) {
    out.append(source_, cursor, t.byte_start - cursor);
    out += t.text;
    cursor = t.byte_end;
  }
  out.append(source_, cursor, std::string::npos);
  return out;
}

std::vector<SentenceRange> TokenSeq::sentences() const {
  std::vector<SentenceRange> out;
  const int n = size();
  int begin = 0;
  for (int i = 0; i < n; ++i) {
    const auto& t = tokens_[i];
    const bool terminal = t.pos == Pos::PUNCT && (t.text == "." || t.text == "!" || t.text == "?");
    if (!terminal) continue;
    int end = i + 1;
    // Closing quotes and brackets stay with the sentence they close.
    while (end < n && tokens_[end].pos == Pos::PUNCT &&
           (tokens_[end].text == "\"" || tokens_[end].text == ")" || tokens_[end].text == "”" ||
            tokens_[end].text == "'")) {
      ++end;
    }
    if (end < n) {
      out.push_back({begin, end});
      begin = end;
      i = end - 1;
    }
  }
  if (begin < n) out.push_back({begin, n});
  return out;
}

// ---------------------------------------------------------------------------
// Tokenization

TokenSeq tokenize(std::string_view text) {
  const auto cps = decode_utf8(text);
  std::vector<Token> toks;
  const int n = static_cast<int>(cps.size());

  auto emit = [&](int from, int to) {  // code point indices, half-open
    if (from >= to) return;
    Token t;
    t.char_start = from;
    t.char_end = to;
    t.byte_start = cps[from].byte_start;
    t.byte_end = cps[to - 1].byte_start + cps[to - 1].byte_len;
    t.text = std::string(text.substr(t.byte_start, t.byte_end - t.byte_start));
    t.lower = ascii_lower(t.text);
    t.shape = make_shape(t.text);
    toks.push_back(std::move(t));
  };

  int i = 0;
  while (i < n) {
    if (is_space(cps[i].value)) {
      ++i;
      continue;
    }
    int chunk_end = i;
    while (chunk_end < n && !is_space(cps[chunk_end].value)) ++chunk_end;

    int word_start = -1;
    for (int k = i; k < chunk_end; ++k) {
      const char32_t c = cps[k].value;
      if (!is_punct(c)) {
        if (word_start < 0) word_start = k;
        continue;
      }
      const bool prev_alnum = k > i && is_alnum(cps[k - 1].value);
      const bool next_alnum = k + 1 < chunk_end && is_alnum(cps[k + 1].value);
      // Possessive clitic: split "Victoria's" into "Victoria" + "'s".
      if (is_apostrophe(c) && prev_alnum && k + 1 < chunk_end &&
          (cps[k + 1].value == U's' || cps[k + 1].value == U'S') &&
          (k + 2 == chunk_end || is_punct(cps[k + 2].value))) {
        if (word_start >= 0) emit(word_start, k);
        emit(k, k + 2);
        word_start = -1;
        k += 1;
        continue;
      }
      const bool joiner = c == U'-' || is_apostrophe(c) || c == U'.' || c == U',' || c == U'/' || c == U'&';
      if (joiner && prev_alnum && next_alnum && word_start >= 0) {
        // "1,000" and "3.5" only join digits; hyphens and apostrophes join anything.
        if (c != U',' || (std::isdigit(static_cast<int>(cps[k - 1].value & 0x7F)) &&
                          std::isdigit(static_cast<int>(cps[k + 1].value & 0x7F)))) {
          continue;
        }
      }
      if (c == U'.' && word_start >= 0) {
        const std::string word = ascii_lower(
            text.substr(cps[word_start].byte_start, cps[k].byte_start - cps[word_start].byte_start));
        const bool initial = k - word_start == 1 && c < 0x80 && std::isupper(static_cast<int>(cps[word_start].value & 0x7F));
        if (abbreviations().contains(word) || (initial && k + 1 < chunk_end)) {
          emit(word_start, k + 1);
          word_start = -1;
          continue;
        }
      }
      if (word_start >= 0) emit(word_start, k);
      word_start = -1;
      emit(k, k + 1);
    }
    if (word_start >= 0) emit(word_start, chunk_end);
    i = chunk_end;
  }
  tag(toks);
  return TokenSeq(std::string(text), std::move(toks));
}

std::vector<std::string> tokenize_lower(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& t : tokenize(text).tokens()) out.push_back(t.lower);
  return out;
}

// ---------------------------------------------------------------------------
// Instances and ingestion

CharRange Instance::char_range(const Span& s) const {
  if (!context.valid(s)) throw std::out_of_range("span outside context");
  return {context[s.start].char_start, context[s.end].char_end};
}

Instance make_instance(std::string id, std::string_view question, std::string_view context,
                       std::optional<CharRange> answer, std::vector<IngestWarning>* warnings) {
  Instance inst;
  inst.id = std::move(id);
  inst.question = tokenize(question);
  inst.context = tokenize(context);
  if (!answer) return inst;

  auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back({inst.id, std::move(msg)});
  };
  const auto& toks = inst.context.tokens();
  if (answer->start < 0 || answer->end <= answer->start) {
    warn("empty or negative answer range");
    return inst;
  }
  int first = -1;
  int last = -1;
  for (int i = 0; i < static_cast<int>(toks.size()); ++i) {
    if (toks[i].char_end > answer->start && toks[i].char_start < answer->end) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) {
    warn("answer offset does not overlap any context token");
    return inst;
  }
  inst.gold = Span{first, last};
  inst.gold_snapped = toks[first].char_start != answer->start || toks[last].char_end != answer->end;
  if (inst.gold_snapped) warn("answer boundaries snapped outward to token boundaries");
  return inst;
}

namespace {

int codepoint_length(std::string_view s) { return static_cast<int>(decode_utf8(s).size()); }

std::string codepoint_substr(std::string_view s, int start, int len) {
  const auto cps = decode_utf8(s);
  if (start < 0 || start > static_cast<int>(cps.size())) return {};
  const int end = std::min<int>(start + len, static_cast<int>(cps.size()));
  if (start == end) return {};
  const int b = cps[start].byte_start;
  const int e = cps[end - 1].byte_start + cps[end - 1].byte_len;
  return std::string(s.substr(b, e - b));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Instance> squad_from_json(const json& doc, const std::string& path,
                                      std::vector<IngestWarning>* warnings) {
  std::vector<Instance> out;
  if (!doc.is_object() || !doc.contains("data") || !doc["data"].is_array()) {
    throw IngestError(path + ": expected an object with a \"data\" array");
  }
  for (const auto& article : doc["data"]) {
    for (const auto& para : article.value("paragraphs", json::array())) {
      const std::string context = para.at("context").get<std::string>();
      for (const auto& qa : para.value("qas", json::array())) {
        const std::string id = qa.at("id").get<std::string>();
        const std::string question = qa.at("question").get<std::string>();
        std::optional<CharRange> answer;
        const auto answers = qa.value("answers", json::array());
        if (!answers.empty()) {
          const std::string text = answers[0].at("text").get<std::string>();
          const int start = answers[0].at("answer_start").get<int>();
          const int len = codepoint_length(text);
          if (codepoint_substr(context, start, len) == text) {
            answer = CharRange{start, start + len};
          } else if (warnings) {
            warnings->push_back({id, "answer text does not occur at answer_start; gold omitted"});
          }
        }
        out.push_back(make_instance(id, question, context, answer, warnings));
      }
    }
  }
  return out;
}

}  // namespace

std::vector<Instance> load_squad(const std::string& path, std::vector<IngestWarning>* warnings) {
  const std::string raw = read_file(path);
  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw IngestError(path + ": malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  try {
    return squad_from_json(doc, path, warnings);
  } catch (const json::exception& e) {
    throw IngestError(path + ": " + e.what());
  }
}

std::vector<Instance> load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError(path + ": cannot open file");
  std::vector<Instance> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      std::optional<CharRange> gold;
      if (j.contains("gold") && !j["gold"].is_null()) {
        gold = CharRange{j["gold"].at("char_start").get<int>(), j["gold"].at("char_end").get<int>()};
      }
      out.push_back(make_instance(j.at("id").get<std::string>(), j.at("question").get<std::string>(),
                                  j.at("context").get<std::string>(), gold));
    } catch (const json::exception& e) {
      throw IngestError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_corpus_jsonl(const std::vector<Instance>& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError(path + ": cannot write file");
  for (const auto& inst : corpus) {
    nlohmann::ordered_json j;
    j["id"] = inst.id;
    j["question"] = inst.question.source();
    j["context"] = inst.context.source();
    if (inst.gold) {
      const auto r = inst.char_range(*inst.gold);
      j["gold"] = {{"char_start", r.start}, {"char_end", r.end}};
    } else {
      j["gold"] = nullptr;
    }
    out << j.dump() << '\n';
  }
}

std::vector<Instance> load_corpus(const std::string& path) {
  if (ends_with(path, ".jsonl")) return load_corpus_jsonl(path);
  const std::string raw = read_file(path);
  const auto first = raw.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  // A SQuAD file is a single JSON document; anything else is treated as JSONL.
  json doc = json::parse(raw, nullptr, false);
  if (!doc.is_discarded() && doc.is_object() && doc.contains("data")) return squad_from_json(doc, path, nullptr);
  return load_corpus_jsonl(path);
}

// ---------------------------------------------------------------------------
// Candidates

std::vector<Span> enumerate_candidates(const TokenSeq& seq, int max_len, SentenceRange range) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  std::vector<Span> out;
  range.begin = std::max(range.begin, 0);
  range.end = std::min(range.end, seq.size());
  for (int s = range.begin; s < range.end; ++s) {
    if (seq[s].pos == Pos::PUNCT) continue;
    const int last = std::min(range.end - 1, s + max_len - 1);
    for (int e = s; e <= last; ++e) {
      const Pos p = seq[e].pos;
      if (p == Pos::PUNCT || p == Pos::DET) continue;
      out.push_back({s, e});
    }
  }
  return out;
}

std::vector<Span> enumerate_candidates(const TokenSeq& seq, int max_len) {
  return enumerate_candidates(seq, max_len, SentenceRange{0, seq.size()});
}

// ---------------------------------------------------------------------------
// Answer types

std::string_view to_string(AnswerType t) {
  switch (t) {
    case AnswerType::DATE: return "DATE";
    case AnswerType::YEAR: return "YEAR";
    case AnswerType::NUMBER: return "NUMBER";
    case AnswerType::PERCENT: return "PERCENT";
    case AnswerType::PERSON_LIKE: return "PERSON_LIKE";
    case AnswerType::LOCATION_LIKE: return "LOCATION_LIKE";
    case AnswerType::OTHER: return "OTHER";
  }
  return "OTHER";
}

std::optional<AnswerType> answer_type_from_string(std::string_view s) {
  for (auto t : {AnswerType::DATE, AnswerType::YEAR, AnswerType::NUMBER, AnswerType::PERCENT,
                 AnswerType::PERSON_LIKE, AnswerType::LOCATION_LIKE, AnswerType::OTHER}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

namespace {

const std::unordered_set<std::string> kMonths = {
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december", "jan", "feb", "mar", "apr", "jun", "jul", "aug",
    "sep", "sept", "oct", "nov", "dec"};
const std::unordered_set<std::string> kWeekdays = {
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"};
const std::unordered_set<std::string> kOrdinalWords = {
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth",
    "tenth", "eleventh", "twelfth", "thirteenth", "fourteenth", "fifteenth", "sixteenth",
    "seventeenth", "eighteenth", "nineteenth", "twentieth", "twenty-first"};
const std::unordered_set<std::string> kScaleWords = {"hundred", "thousand", "million", "billion", "trillion"};
const std::unordered_set<std::string> kNameConnectors = {"of", "the", "de", "von", "van", "and", "'s", "-", "la", "le", "du"};
const std::unordered_set<std::string> kLocationCues = {
    "city", "river", "castle", "chapel", "county", "kingdom", "republic", "street", "lake",
    "sea", "ocean", "island", "islands", "mountains", "mountain", "valley", "province",
    "state", "bay", "park", "square", "bridge", "cathedral", "church", "palace", "hall"};
const std::unordered_set<std::string> kPersonCues = {
    "mr", "mr.", "mrs", "mrs.", "dr", "dr.", "queen", "king", "prince", "princess", "saint",
    "st.", "sir", "lord", "lady", "president", "pope", "emperor", "general"};

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

bool is_year_token(std::string_view s) {
  if (s.size() != 4 || !all_digits(s)) return false;
  const int v = std::stoi(std::string(s));
  return v >= 1000 && v <= 2100;
}

bool is_decade_token(std::string_view s) {
  return s.size() == 5 && all_digits(s.substr(0, 4)) && s[4] == 's';
}

bool is_ordinal(std::string_view s) {
  if (kOrdinalWords.contains(std::string(s))) return true;
  if (s.size() < 3) return false;
  const auto suffix = s.substr(s.size() - 2);
  return all_digits(s.substr(0, s.size() - 2)) &&
         (suffix == "st" || suffix == "nd" || suffix == "rd" || suffix == "th");
}

bool is_day_number(std::string_view s) {
  std::string_view digits = s;
  if (is_ordinal(s) && all_digits(s.substr(0, s.size() - 2))) digits = s.substr(0, s.size() - 2);
  if (!all_digits(digits) || digits.size() > 2) return false;
  const int v = std::stoi(std::string(digits));
  return v >= 1 && v <= 31;
}

bool is_numeric_token(const Token& t) {
  if (t.pos == Pos::NUM && !is_ordinal(t.lower)) return true;
  return kScaleWords.contains(t.lower);
}

bool is_capitalized_word(const Token& t) {
  return starts_upper(t.text) && t.pos != Pos::PUNCT && !kMonths.contains(t.lower) &&
         !kWeekdays.contains(t.lower) && (t.pos == Pos::PROPN || t.pos == Pos::NOUN);
}

}  // namespace

AnswerTypes classify_answer_type(const TokenSeq& seq, const Span& span) {
  AnswerTypes out;
  if (!seq.valid(span)) return {AnswerType::OTHER};
  int s = span.start;
  const int e = span.end;
  if (s < e && seq[s].lower == "the") ++s;  // "the 6th century", "the Music of the Night"

  std::vector<const Token*> toks;
  for (int i = s; i <= e; ++i) toks.push_back(&seq[i]);
  const std::size_t n = toks.size();

  // YEAR
  bool year = false;
  if (n == 1 && (is_year_token(toks[0]->lower) || is_decade_token(toks[0]->lower))) year = true;
  if (n == 2 && is_ordinal(toks[0]->lower) &&
      (toks[1]->lower == "century" || toks[1]->lower == "centuries" || toks[1]->lower == "millennium")) {
    year = true;
  }
  if (n == 2 && is_year_token(toks[0]->lower) &&
      (toks[1]->lower == "ad" || toks[1]->lower == "bc" || toks[1]->lower == "bce" || toks[1]->lower == "ce")) {
    year = true;
  }

  // DATE
  bool date = year;
  if (!date) {
    bool all_dateish = true;
    bool anchor = false;
    for (const auto* t : toks) {
      const auto& w = t->lower;
      if (kMonths.contains(w) || kWeekdays.contains(w)) {
        // "may" is also a modal verb; require capitalization for ambiguous month names.
        if ((w == "may" || w == "march") && !starts_upper(t->text)) {
          all_dateish = false;
          break;
        }
        anchor = true;
      } else if (is_year_token(w) || is_day_number(w) || w == "," || w == "of" || w == "the") {
      } else {
        all_dateish = false;
        break;
      }
    }
    date = all_dateish && anchor;
  }
  if (year) out.insert(AnswerType::YEAR);
  if (date) out.insert(AnswerType::DATE);

  // PERCENT / NUMBER
  bool numeric = n > 0 && std::all_of(toks.begin(), toks.end(), [](const Token* t) { return is_numeric_token(*t); });
  if (numeric && !kScaleWords.contains(toks[0]->lower)) out.insert(AnswerType::NUMBER);
  if (n >= 2 && is_numeric_token(*toks[0])) {
    const auto& last = toks.back()->lower;
    bool head_numeric = std::all_of(toks.begin(), toks.end() - 1, [](const Token* t) { return is_numeric_token(*t); });
    if (head_numeric && (last == "%" || last == "percent")) out.insert(AnswerType::PERCENT);
  }
  if (n >= 3 && toks[n - 2]->lower == "per" && toks[n - 1]->lower == "cent") out.insert(AnswerType::PERCENT);

  // Capitalized names
  if (!date && n > 0 && is_capitalized_word(*toks.front()) && is_capitalized_word(*toks.back())) {
    bool name = true;
    bool location_cue = false;
    bool person_cue = false;
    for (const auto* t : toks) {
      if (kLocationCues.contains(t->lower)) location_cue = true;
      if (kPersonCues.contains(t->lower)) person_cue = true;
      if (is_capitalized_word(*t)) continue;
      if (kNameConnectors.contains(t->lower)) continue;
      name = false;
      break;
    }
    if (name) {
      if (!location_cue) out.insert(AnswerType::PERSON_LIKE);
      if (!person_cue) out.insert(AnswerType::LOCATION_LIKE);
      if (location_cue && person_cue) out.insert(AnswerType::LOCATION_LIKE);
    }
  }
  if (out.empty()) out.insert(AnswerType::OTHER);
  return out;
}

bool informative_overlap(const AnswerTypes& a, const AnswerTypes& b) {
  for (auto t : a) {
    if (t != AnswerType::OTHER && b.contains(t)) return true;
  }
  return false;
}

int gap(const Span& a, const Span& b) {
  if (a.end >= b.start) throw OrderError("gap: first span must end before the second starts");
  return b.start - a.end - 1;
}

std::vector<Span> find_token_matches(const TokenSeq& seq, const std::vector<std::string>& key,
                                     SentenceRange range) {
  std::vector<Span> out;
  const int k = static_cast<int>(key.size());
  if (k == 0) return out;
  range.end = std::min(range.end, seq.size());
  for (int s = std::max(range.begin, 0); s + k <= range.end; ++s) {
    bool ok = true;
    for (int j = 0; j < k && ok; ++j) ok = seq[s + j].lower == key[j];
    if (ok) out.push_back({s, s + k - 1});
  }
  return out;
}

}  // namespace nmt
