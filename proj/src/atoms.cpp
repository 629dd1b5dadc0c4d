#include "nmt/atoms.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

namespace nmt {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Compare / Logic

double compare_soft(int d0, int d1) {
  if (d1 <= d0) return 1.0;
  const double x = static_cast<double>(d1 - d0) / (std::abs(d0) + 1.0);
  return std::max(1.0 - 0.25 * x * x, 0.0);
}

int compare_strict(int d0, int d1) { return d1 <= d0 ? 1 : 0; }

namespace {

void check_probability(double p, const char* op) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError(std::string(op) + ": argument " + std::to_string(p) + " outside [0, 1]");
  }
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

double to_unit_score(double sim) { return std::clamp((sim + 1.0) / 2.0, 0.0, 1.0); }

}  // namespace

double logic_and(double p1, double p2) {
  check_probability(p1, "AND");
  check_probability(p2, "AND");
  return std::max(p1 + p2 - 1.0, 0.0);
}

double logic_or(double p1, double p2) {
  check_probability(p1, "OR");
  check_probability(p2, "OR");
  return std::min(p1 + p2, 1.0);
}

// ---------------------------------------------------------------------------
// Backends

std::vector<double> SimilarityBackend::similarities(const Vec& ref, const std::vector<Vec>& candidates) const {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(similarity(c, ref));
  return out;
}

std::vector<Vec> ExactMatchBackend::embed_spans(const TokenSeq& seq, const std::vector<Span>& spans) const {
  std::vector<Vec> out;
  out.reserve(spans.size());
  for (const auto& sp : spans) {
    const auto h = fnv1a(seq.normalized(sp));
    Vec v(64);
    for (int i = 0; i < 64; ++i) v[i] = (h >> i) & 1U ? 1.0 : -1.0;
    out.push_back(std::move(v));
  }
  return out;
}

double ExactMatchBackend::similarity(const Vec& candidate, const Vec& ref) const {
  return candidate == ref ? 1.0 : -1.0;
}

LexicalEncoder::LexicalEncoder(int dim, double context_weight) : dim_(dim), context_weight_(context_weight) {
  if (dim < 8) throw std::invalid_argument("lexical encoder dimension must be >= 8");
}

std::vector<Vec> LexicalEncoder::encode(const TokenSeq& seq) const {
  std::vector<Vec> out;
  out.reserve(seq.size());
  auto add = [this](Vec& v, std::string_view feature, double weight) {
    const auto h = fnv1a(feature);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[h % static_cast<std::uint64_t>(dim_)] += sign * weight;
  };
  for (int i = 0; i < seq.size(); ++i) {
    const auto& t = seq[i];
    Vec v(dim_, 0.0);
    add(v, "u:" + t.lower, 1.0);
    const std::string padded = "<" + t.lower + ">";
    if (padded.size() >= 3) {
      const auto n = padded.size() - 2;
      const double w = 1.0 / std::sqrt(static_cast<double>(n));
      for (std::size_t k = 0; k < n; ++k) add(v, "c:" + padded.substr(k, 3), w);
    }
    add(v, "p:" + std::string(to_string(t.pos)), 0.5);
    add(v, "s:" + t.shape, 0.5);
    if (context_weight_ > 0.0) {
      const auto left = i > 0 ? std::string(to_string(seq[i - 1].pos)) : std::string("BOS");
      const auto right = i + 1 < seq.size() ? std::string(to_string(seq[i + 1].pos)) : std::string("EOS");
      add(v, "lp:" + left, context_weight_);
      add(v, "rp:" + right, context_weight_);
      if (i > 0) add(v, "lw:" + seq[i - 1].lower, context_weight_);
      if (i + 1 < seq.size()) add(v, "rw:" + seq[i + 1].lower, context_weight_);
    }
    const double n = norm(v);
    if (n > 0) {
      for (auto& x : v) x /= n;
    }
    out.push_back(std::move(v));
  }
  return out;
}

ExternalVectorEncoder ExternalVectorEncoder::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw VectorFileError(path + ": cannot open file");
  ExternalVectorEncoder enc;
  std::size_t n = 0;
  std::string header;
  if (!std::getline(in, header)) throw VectorFileError(path + ": missing header");
  {
    std::istringstream hs(header);
    if (!(hs >> enc.dim_ >> n) || enc.dim_ <= 0) throw VectorFileError(path + ":1: header must be \"d n\"");
  }
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    Vec v(enc.dim_);
    for (int i = 0; i < enc.dim_; ++i) {
      if (!(ls >> v[i])) throw VectorFileError(path + ":" + std::to_string(lineno) + ": expected " +
                                               std::to_string(enc.dim_) + " values");
    }
    for (auto& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    enc.table_.emplace(std::move(token), std::move(v));
  }
  if (enc.table_.size() != n) {
    throw VectorFileError(path + ": header declares " + std::to_string(n) + " vectors, found " +
                          std::to_string(enc.table_.size()));
  }
  return enc;
}

std::vector<Vec> ExternalVectorEncoder::encode(const TokenSeq& seq) const {
  std::vector<Vec> out;
  out.reserve(seq.size());
  for (const auto& t : seq.tokens()) {
    auto it = table_.find(t.lower);
    out.push_back(it == table_.end() ? Vec(dim_, 0.0) : it->second);
  }
  return out;
}

BilinearParams BilinearParams::identity(int d) {
  BilinearParams p;
  p.d = d;
  p.A.assign(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) p.A[static_cast<std::size_t>(i) * d + i] = 1.0;
  return p;
}

bool BilinearParams::finite() const {
  return std::isfinite(b) && std::all_of(A.begin(), A.end(), [](double x) { return std::isfinite(x); });
}

PooledBackend::PooledBackend(std::shared_ptr<const TokenEncoder> encoder, Pooling pooling, bool bilinear)
    : encoder_(std::move(encoder)),
      pooling_(pooling),
      bilinear_(bilinear),
      params_(BilinearParams::identity(encoder_->dim())),
      attention_(encoder_->dim(), 0.0) {}

std::string PooledBackend::name() const {
  return encoder_->name() + (pooling_ == Pooling::Mean ? "+mean" : "+attentive") +
         (bilinear_ ? "+bilinear" : "+cosine");
}

void PooledBackend::set_params(BilinearParams p) {
  if (p.d != dim() || p.A.size() != static_cast<std::size_t>(p.d) * p.d) {
    throw std::invalid_argument("bilinear parameters do not match backend dimension");
  }
  params_ = std::move(p);
}

void PooledBackend::set_attention(Vec a) {
  if (static_cast<int>(a.size()) != dim()) throw std::invalid_argument("attention vector has wrong dimension");
  attention_ = std::move(a);
}

Vec PooledBackend::pool(const std::vector<Vec>& tokens, const Span& span, std::vector<double>* weights) const {
  const int d = dim();
  const int n = span.length();
  std::vector<double> alpha(n, 1.0 / n);
  if (pooling_ == Pooling::Attentive) {
    double mx = -1e300;
    for (int i = 0; i < n; ++i) {
      alpha[i] = dot(attention_, tokens[span.start + i]);
      mx = std::max(mx, alpha[i]);
    }
    double total = 0.0;
    for (auto& a : alpha) total += (a = std::exp(a - mx));
    for (auto& a : alpha) a /= total;
  }
  Vec e(d, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto& h = tokens[span.start + i];
    for (int j = 0; j < d; ++j) e[j] += alpha[i] * h[j];
  }
  if (weights) *weights = std::move(alpha);
  return e;
}

std::vector<Vec> PooledBackend::embed_spans(const TokenSeq& seq, const std::vector<Span>& spans) const {
  const auto tokens = encoder_->encode(seq);
  std::vector<Vec> out;
  out.reserve(spans.size());
  for (const auto& sp : spans) out.push_back(pool(tokens, sp));
  return out;
}

double PooledBackend::similarity(const Vec& candidate, const Vec& ref) const {
  return similarities(ref, {candidate}).front();
}

std::vector<double> PooledBackend::similarities(const Vec& ref, const std::vector<Vec>& candidates) const {
  std::vector<double> out;
  out.reserve(candidates.size());
  if (bilinear_) {
    // sim(e) = tanh(e . (A ref) + b)
    const int d = dim();
    Vec v(d, 0.0);
    for (int i = 0; i < d; ++i) {
      const double* row = &params_.A[static_cast<std::size_t>(i) * d];
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += row[j] * ref[j];
      v[i] = s;
    }
    for (const auto& c : candidates) out.push_back(std::tanh(dot(c, v) + params_.b));
    return out;
  }
  const double nr = norm(ref);
  for (const auto& c : candidates) {
    const double nc = norm(c);
    out.push_back(nr > 0 && nc > 0 ? std::clamp(dot(c, ref) / (nr * nc), -1.0, 1.0) : 0.0);
  }
  return out;
}

std::shared_ptr<PooledBackend> make_fill_backend(int dim) {
  return std::make_shared<PooledBackend>(std::make_shared<LexicalEncoder>(dim, 0.5), Pooling::Attentive, true);
}

std::shared_ptr<PooledBackend> make_find_backend(int dim) {
  return std::make_shared<PooledBackend>(std::make_shared<LexicalEncoder>(dim, 0.0), Pooling::Mean, false);
}

// ---------------------------------------------------------------------------
// Fill / Find

namespace {

char pos_code(const Token& t) {
  if (t.lower == "of") return 'f';
  if (t.lower == "'s" || t.lower == "'") return 'g';
  switch (t.pos) {
    case Pos::NOUN: return 'N';
    case Pos::PROPN: return 'P';
    case Pos::VERB: return 'V';
    case Pos::ADJ: return 'A';
    case Pos::ADV: return 'R';
    case Pos::NUM: return 'M';
    case Pos::DET: return 'D';
    case Pos::ADP: return 'I';
    case Pos::PUNCT: return ',';
    case Pos::OTHER: return 'x';
  }
  return 'x';
}

std::string pos_string(const TokenSeq& seq, const Span& sp) {
  std::string out;
  for (int i = sp.start; i <= sp.end; ++i) out.push_back(pos_code(seq[i]));
  return out;
}

enum class PhraseClass { None, NounPhrase, VerbPhrase, AdjPhrase, Numeric };

PhraseClass phrase_class(const std::string& codes) {
  static const std::regex np("D?[ANPMg]*[NPM](fD?[ANPMg]*[NPM])*");
  static const std::regex vp("R?V+[IR]?");
  static const std::regex adjp("R*A+");
  static const std::regex num("M(,?M)*");
  if (std::regex_match(codes, num)) return PhraseClass::Numeric;
  if (std::regex_match(codes, np)) return PhraseClass::NounPhrase;
  if (std::regex_match(codes, vp)) return PhraseClass::VerbPhrase;
  if (std::regex_match(codes, adjp)) return PhraseClass::AdjPhrase;
  return PhraseClass::None;
}

SentenceRange whole(const TokenSeq& s) { return SentenceRange{0, s.size()}; }

std::vector<ScoredSpan> rank(const TokenSeq& s_ref, const Span& p_ref, const TokenSeq& s,
                             const SimilarityBackend& backend, const std::vector<Span>& candidates, int k) {
  if (candidates.empty()) return {};
  const auto ref = backend.embed(s_ref, p_ref);
  const auto embedded = backend.embed_spans(s, candidates);
  const auto sims = backend.similarities(ref, embedded);
  std::vector<ScoredSpan> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back({candidates[i], to_unit_score(sims[i])});
  std::stable_sort(out.begin(), out.end(), [](const ScoredSpan& a, const ScoredSpan& b) { return a.score > b.score; });
  if (k > 0 && static_cast<int>(out.size()) > k) out.resize(k);
  return out;
}

}  // namespace

std::vector<Span> fill_strict(const TokenSeq& s_ref, const Span& p_ref, const TokenSeq& s, SentenceRange range,
                              int max_len) {
  const auto ref_codes = pos_string(s_ref, p_ref);
  const auto ref_class = phrase_class(ref_codes);
  const auto ref_types = classify_answer_type(s_ref, p_ref);
  std::vector<Span> out;
  for (const auto& c : enumerate_candidates(s, std::max(max_len, p_ref.length()), range)) {
    const auto codes = pos_string(s, c);
    if (codes == ref_codes || (ref_class != PhraseClass::None && phrase_class(codes) == ref_class) ||
        informative_overlap(ref_types, classify_answer_type(s, c))) {
      out.push_back(c);
    }
  }
  return out;
}

std::vector<Span> fill_strict(const TokenSeq& s_ref, const Span& p_ref, const TokenSeq& s) {
  return fill_strict(s_ref, p_ref, s, whole(s));
}

std::vector<ScoredSpan> fill_soft(const TokenSeq& s_ref, const Span& p_ref, const TokenSeq& s,
                                  const SimilarityBackend& backend, int k, SentenceRange range, int max_len) {
  if (k < 1) throw std::invalid_argument("fill_soft: k must be >= 1");
  return rank(s_ref, p_ref, s, backend, enumerate_candidates(s, max_len, range), k);
}

std::vector<ScoredSpan> fill_soft(const TokenSeq& s_ref, const Span& p_ref, const TokenSeq& s,
                                  const SimilarityBackend& backend, int k) {
  return fill_soft(s_ref, p_ref, s, backend, k, whole(s));
}

std::string stem(std::string_view word) {
  std::string w(word);
  for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  auto strip = [&w](std::string_view suffix, std::size_t min_left) {
    if (w.size() >= suffix.size() + min_left && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0) {
      w.resize(w.size() - suffix.size());
      return true;
    }
    return false;
  };
  strip("ly", 3) || strip("ing", 3) || strip("ion", 3) || strip("ed", 3) || strip("es", 3) || strip("s", 3);
  if (w.size() > 3 && w.back() == 'e') w.pop_back();
  if (w.size() > 3 && w.back() == 'y') w.back() = 'i';
  return w;
}

std::vector<Span> find_strict(const std::vector<std::string>& key, const TokenSeq& s, SentenceRange range,
                              bool use_stems) {
  if (key.empty()) throw std::invalid_argument("find_strict: empty key");
  if (!use_stems) return find_token_matches(s, key, range);
  std::vector<std::string> stems;
  for (const auto& k : key) stems.push_back(stem(k));
  std::vector<Span> out;
  const int n = static_cast<int>(key.size());
  for (int i = range.begin; i + n <= range.end; ++i) {
    bool ok = true;
    for (int j = 0; j < n && ok; ++j) ok = stem(s[i + j].lower) == stems[j];
    if (ok) out.push_back(Span{i, i + n - 1});
  }
  return out;
}

std::vector<Span> find_strict(const std::vector<std::string>& key, const TokenSeq& s, bool use_stems) {
  return find_strict(key, s, whole(s), use_stems);
}

std::vector<ScoredSpan> find_soft(const TokenSeq& q_ref, const Span& p_ref, const TokenSeq& s,
                                  const SimilarityBackend& backend, SentenceRange range, int k, int max_len) {
  return rank(q_ref, p_ref, s, backend, enumerate_candidates(s, max_len, range), k);
}

std::vector<ScoredSpan> find_soft(const TokenSeq& q_ref, const Span& p_ref, const TokenSeq& s,
                                  const SimilarityBackend& backend, int k) {
  return find_soft(q_ref, p_ref, s, backend, whole(s), k);
}

// ---------------------------------------------------------------------------
// Training

namespace {

// sim(x) = tanh(x^T A r + b)
double bilinear_raw(const BilinearParams& p, const Vec& x, const Vec& r) {
  double s = p.b;
  for (int i = 0; i < p.d; ++i) {
    if (x[i] == 0.0) continue;
    const double* row = &p.A[static_cast<std::size_t>(i) * p.d];
    double acc = 0.0;
    for (int j = 0; j < p.d; ++j) acc += row[j] * r[j];
    s += x[i] * acc;
  }
  return s;
}

// A r and A^T x
Vec mat_vec(const BilinearParams& p, const Vec& r) {
  Vec out(p.d, 0.0);
  for (int i = 0; i < p.d; ++i) {
    const double* row = &p.A[static_cast<std::size_t>(i) * p.d];
    double acc = 0.0;
    for (int j = 0; j < p.d; ++j) acc += row[j] * r[j];
    out[i] = acc;
  }
  return out;
}

Vec mat_t_vec(const BilinearParams& p, const Vec& x) {
  Vec out(p.d, 0.0);
  for (int i = 0; i < p.d; ++i) {
    if (x[i] == 0.0) continue;
    const double* row = &p.A[static_cast<std::size_t>(i) * p.d];
    for (int j = 0; j < p.d; ++j) out[j] += x[i] * row[j];
  }
  return out;
}

// Gradient of an attentive-pooled vector e = sum_i alpha_i h_i with
// alpha = softmax(a . h_i), contracted with g:  sum_i alpha_i h_i (h_i.g) - e (e.g).
void add_attention_grad(const std::vector<Vec>& tokens, const Span& span, const std::vector<double>& alpha,
                        const Vec& e, const Vec& g, Vec& out) {
  const double eg = dot(e, g);
  for (int i = 0; i < span.length(); ++i) {
    const auto& h = tokens[span.start + i];
    const double c = alpha[i] * dot(h, g);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += c * h[j];
  }
  for (std::size_t j = 0; j < out.size(); ++j) out[j] -= eg * e[j];
}

}  // namespace

double margin_loss(const PooledBackend& backend, const Vec& e_ref, const Vec& e_pos, const Vec& e_neg,
                   double margin) {
  return std::max(0.0, margin - backend.similarity(e_pos, e_ref) + backend.similarity(e_neg, e_ref));
}

BilinearGradient margin_loss_gradient(const PooledBackend& backend, const Vec& e_ref, const Vec& e_pos,
                                      const Vec& e_neg, double margin) {
  const auto& p = backend.params();
  BilinearGradient g;
  g.dA.assign(p.A.size(), 0.0);
  const double sp = std::tanh(bilinear_raw(p, e_pos, e_ref));
  const double sn = std::tanh(bilinear_raw(p, e_neg, e_ref));
  if (margin - sp + sn <= 0.0) return g;
  const double cp = -(1.0 - sp * sp);
  const double cn = 1.0 - sn * sn;
  for (int i = 0; i < p.d; ++i) {
    for (int j = 0; j < p.d; ++j) {
      g.dA[static_cast<std::size_t>(i) * p.d + j] = (cp * e_pos[i] + cn * e_neg[i]) * e_ref[j];
    }
  }
  g.db = cp + cn;
  return g;
}

double fill_top1_recall(const PooledBackend& backend, const std::vector<FillPair>& pairs) {
  if (pairs.empty()) return 0.0;
  int hits = 0;
  for (const auto& pr : pairs) {
    auto ranked = fill_soft(pr.s_ref, pr.p_ref, pr.s, backend, 1, SentenceRange{0, pr.s.size()},
                            std::max(kDefaultMaxSpanLen, pr.p_pos.length()));
    if (!ranked.empty() && ranked.front().span == pr.p_pos) ++hits;
  }
  return static_cast<double>(hits) / pairs.size();
}

FillTrainResult train_fill_backend(PooledBackend& backend, const std::vector<FillPair>& pairs,
                                   const FillTrainOptions& options) {
  if (pairs.empty()) throw TrainingError("train_fill_backend: no training pairs");
  if (!backend.bilinear()) throw TrainingError("train_fill_backend: backend has no bilinear parameters");

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto held = static_cast<std::size_t>(std::floor(options.held_out_fraction * pairs.size()));
  if (held >= pairs.size()) held = 0;
  std::vector<FillPair> train, test;
  for (std::size_t i = 0; i < order.size(); ++i) (i < held ? test : train).push_back(pairs[order[i]]);
  const auto& eval_set = test.empty() ? train : test;

  FillTrainResult result;
  result.held_out_top1_before = fill_top1_recall(backend, eval_set);

  auto params = backend.params();
  auto attention = backend.attention();
  const bool attentive = backend.pooling() == Pooling::Attentive && options.train_attention;
  const int d = params.d;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    double epoch_loss = 0.0;
    for (auto ix : idx) {
      const auto& pr = train[ix];
      // Encoders are frozen; only pooling and the bilinear form learn.
      auto candidates = enumerate_candidates(pr.s, std::max(kDefaultMaxSpanLen, pr.p_pos.length()));
      candidates.erase(std::remove(candidates.begin(), candidates.end(), pr.p_pos), candidates.end());
      if (candidates.empty()) continue;

      // Single-token spans pool to the raw token vectors under either pooling.
      std::vector<Vec> h_ref, h_s;
      {
        std::vector<Span> ref_spans, s_spans;
        for (int i = 0; i < pr.s_ref.size(); ++i) ref_spans.push_back(Span{i, i});
        for (int i = 0; i < pr.s.size(); ++i) s_spans.push_back(Span{i, i});
        h_ref = backend.embed_spans(pr.s_ref, ref_spans);
        h_s = backend.embed_spans(pr.s, s_spans);
      }

      for (int n = 0; n < options.neg_per_pos; ++n) {
        const auto& neg = candidates[rng() % candidates.size()];
        std::vector<double> a_ref, a_pos, a_neg;
        const auto e_ref = backend.pool(h_ref, pr.p_ref, &a_ref);
        const auto e_pos = backend.pool(h_s, pr.p_pos, &a_pos);
        const auto e_neg = backend.pool(h_s, neg, &a_neg);
        const double sp = std::tanh(bilinear_raw(params, e_pos, e_ref));
        const double sn = std::tanh(bilinear_raw(params, e_neg, e_ref));
        const double loss = options.margin - sp + sn;
        if (loss <= 0.0) continue;
        epoch_loss += loss;
        const double cp = -(1.0 - sp * sp);
        const double cn = 1.0 - sn * sn;

        if (attentive) {
          // dL/dx for each pooled vector, then through the attention softmax.
          const auto Ar = mat_vec(params, e_ref);
          Vec g_pos(d), g_neg(d);
          for (int j = 0; j < d; ++j) {
            g_pos[j] = cp * Ar[j];
            g_neg[j] = cn * Ar[j];
          }
          Vec w(d, 0.0);
          for (int j = 0; j < d; ++j) w[j] = cp * e_pos[j] + cn * e_neg[j];
          const auto g_ref = mat_t_vec(params, w);
          Vec da(d, 0.0);
          add_attention_grad(h_ref, pr.p_ref, a_ref, e_ref, g_ref, da);
          add_attention_grad(h_s, pr.p_pos, a_pos, e_pos, g_pos, da);
          add_attention_grad(h_s, neg, a_neg, e_neg, g_neg, da);
          for (int j = 0; j < d; ++j) attention[j] -= options.learning_rate * da[j];
        }
        for (int i = 0; i < d; ++i) {
          const double u = cp * e_pos[i] + cn * e_neg[i];
          if (u == 0.0) continue;
          double* row = &params.A[static_cast<std::size_t>(i) * d];
          for (int j = 0; j < d; ++j) row[j] -= options.learning_rate * u * e_ref[j];
        }
        params.b -= options.learning_rate * (cp + cn);
        // pool() reads the live attention vector; A and b stay local until the end.
        backend.set_attention(attention);
      }
    }
    result.epoch_loss.push_back(epoch_loss);
  }

  backend.set_params(params);
  backend.set_attention(attention);
  result.params = params;
  result.attention = attention;
  result.held_out_top1_after = fill_top1_recall(backend, eval_set);
  return result;
}

}  // namespace nmt
