#pragma once

// Atomic modules used by compiled rules: Compare and Logic (strict and soft),
// Fill and Find (strict matching plus similarity-ranked fallbacks), and the
// similarity backends behind the soft versions.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nmt/corpus.hpp"

namespace nmt {

// ---------------------------------------------------------------------------
// Compare / Logic

/// 1 if d1 <= d0, else max(1 - ((d1 - d0) / (|d0| + 1))^2 / 4, 0).
double compare_soft(int d0, int d1);
/// 1 iff d1 <= d0.
int compare_strict(int d0, int d1);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 1469598103934665603ULL);

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Lukasiewicz t-norm / t-conorm. Inputs outside [0, 1] throw DomainError.
double logic_and(double p1, double p2);
double logic_or(double p1, double p2);

// ---------------------------------------------------------------------------
// Similarity backends

using Vec = std::vector<double>;

class SimilarityBackend {
 public:
  virtual ~SimilarityBackend() = default;
  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  /// Embeds every span of `seq` in one pass (encoders see the whole sequence).
  virtual std::vector<Vec> embed_spans(const TokenSeq& seq, const std::vector<Span>& spans) const = 0;
  /// In [-1, 1]; `candidate` is the span being ranked, `ref` the reference.
  virtual double similarity(const Vec& candidate, const Vec& ref) const = 0;
  /// Batch form; backends may precompute work on `ref`.
  virtual std::vector<double> similarities(const Vec& ref, const std::vector<Vec>& candidates) const;

  Vec embed(const TokenSeq& seq, const Span& span) const { return embed_spans(seq, {span}).front(); }
};

/// Indicator backend: similarity is 1 for identical case-folded text, else -1.
class ExactMatchBackend : public SimilarityBackend {
 public:
  std::string name() const override { return "exact"; }
  int dim() const override { return 64; }
  std::vector<Vec> embed_spans(const TokenSeq& seq, const std::vector<Span>& spans) const override;
  double similarity(const Vec& candidate, const Vec& ref) const override;
};

/// Produces one vector per token of a sequence.
class TokenEncoder {
 public:
  virtual ~TokenEncoder() = default;
  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual std::vector<Vec> encode(const TokenSeq& seq) const = 0;
};

/// Hashed character-trigram + unigram + POS/shape features, unit-normalized
/// per token. A non-zero context weight mixes in neighbouring tokens' POS and
/// shape, which lets Fill see a span's role in its sentence.
class LexicalEncoder : public TokenEncoder {
 public:
  explicit LexicalEncoder(int dim = 512, double context_weight = 0.0);
  std::string name() const override { return "lexical"; }
  int dim() const override { return dim_; }
  std::vector<Vec> encode(const TokenSeq& seq) const override;

 private:
  int dim_;
  double context_weight_;
};

struct VectorFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Pre-computed per-token vectors: header "d n", then n lines "token v1 ... vd".
/// Lookup is case-folded; unknown tokens map to the zero vector.
class ExternalVectorEncoder : public TokenEncoder {
 public:
  static ExternalVectorEncoder load(const std::string& path);
  std::string name() const override { return "vectors"; }
  int dim() const override { return dim_; }
  std::vector<Vec> encode(const TokenSeq& seq) const override;
  std::size_t vocabulary_size() const { return table_.size(); }

 private:
  int dim_ = 0;
  std::unordered_map<std::string, Vec> table_;
};

enum class Pooling { Mean, Attentive };

struct BilinearParams {
  int d = 0;
  std::vector<double> A;  // row-major d x d
  double b = 0.0;

  static BilinearParams identity(int d);
  double at(int i, int j) const { return A[static_cast<std::size_t>(i) * d + j]; }
  bool finite() const;
};

/// Pools token vectors over a span, then scores with cosine or with the
/// bilinear form tanh(e A e' + b).
class PooledBackend : public SimilarityBackend {
 public:
  PooledBackend(std::shared_ptr<const TokenEncoder> encoder, Pooling pooling, bool bilinear);

  std::string name() const override;
  int dim() const override { return encoder_->dim(); }
  std::vector<Vec> embed_spans(const TokenSeq& seq, const std::vector<Span>& spans) const override;
  double similarity(const Vec& candidate, const Vec& ref) const override;
  std::vector<double> similarities(const Vec& ref, const std::vector<Vec>& candidates) const override;

  Pooling pooling() const { return pooling_; }
  bool bilinear() const { return bilinear_; }
  const BilinearParams& params() const { return params_; }
  void set_params(BilinearParams p);
  const Vec& attention() const { return attention_; }
  void set_attention(Vec a);

  /// Pooled span vector plus attention weights, for training.
  Vec pool(const std::vector<Vec>& tokens, const Span& span, std::vector<double>* weights = nullptr) const;

 private:
  std::shared_ptr<const TokenEncoder> encoder_;
  Pooling pooling_;
  bool bilinear_;
  BilinearParams params_;
  Vec attention_;
};

/// Fill default: attentive pooling, bilinear similarity, lexical encoder that
/// sees neighbouring tokens.
std::shared_ptr<PooledBackend> make_fill_backend(int dim = 512);
/// Find default: mean pooling, cosine, untrained lexical encoder.
std::shared_ptr<PooledBackend> make_find_backend(int dim = 512);

// ---------------------------------------------------------------------------
// Fill / Find

struct ScoredSpan {
  Span span;
  double score = 0.0;  // in [0, 1]
  friend bool operator==(const ScoredSpan&, const ScoredSpan&) = default;
};

/// Candidate spans of `s` (within `range`) structurally analogous to p_ref in
/// s_ref: same POS sequence, same coarse phrase class, or a shared informative
/// answer type. Over-generates by design.
std::vector<Span> fill_strict(const TokenSeq& s_ref, const Span& p_ref, const TokenSeq& s, SentenceRange range,
                              int max_len = kDefaultMaxSpanLen);
std::vector<Span> fill_strict(const TokenSeq& s_ref, const Span& p_ref, const TokenSeq& s);

/// Top-k candidates of `s` by backend similarity to p_ref, score (sim+1)/2.
/// Ties keep span order.
std::vector<ScoredSpan> fill_soft(const TokenSeq& s_ref, const Span& p_ref, const TokenSeq& s,
                                  const SimilarityBackend& backend, int k, SentenceRange range,
                                  int max_len = kDefaultMaxSpanLen);
std::vector<ScoredSpan> fill_soft(const TokenSeq& s_ref, const Span& p_ref, const TokenSeq& s,
                                  const SimilarityBackend& backend, int k);

/// Crude suffix stripper used by the optional stem-matching mode.
std::string stem(std::string_view word);

/// Case-folded exact occurrences of `key`; with `use_stems` tokens compare by stem.
std::vector<Span> find_strict(const std::vector<std::string>& key, const TokenSeq& s, SentenceRange range,
                              bool use_stems = false);
std::vector<Span> find_strict(const std::vector<std::string>& key, const TokenSeq& s, bool use_stems = false);

/// Candidates of `s` ranked by similarity to p_ref in q_ref; k <= 0 keeps all.
std::vector<ScoredSpan> find_soft(const TokenSeq& q_ref, const Span& p_ref, const TokenSeq& s,
                                  const SimilarityBackend& backend, SentenceRange range, int k = 0,
                                  int max_len = kDefaultMaxSpanLen);
std::vector<ScoredSpan> find_soft(const TokenSeq& q_ref, const Span& p_ref, const TokenSeq& s,
                                  const SimilarityBackend& backend, int k = 0);

// ---------------------------------------------------------------------------
// Fill backend training

struct FillPair {
  TokenSeq s_ref;
  Span p_ref;
  TokenSeq s;
  Span p_pos;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FillTrainOptions {
  int neg_per_pos = 4;
  int epochs = 5;
  std::uint64_t seed = 13;
  double margin = 0.4;
  double learning_rate = 0.05;
  double held_out_fraction = 0.2;
  bool train_attention = true;
};

struct FillTrainResult {
  BilinearParams params;
  Vec attention;
  double held_out_top1_before = 0.0;
  double held_out_top1_after = 0.0;
  std::vector<double> epoch_loss;
};

/// max(0, m - sim(pos) + sim(neg)) summed over a pair and its negatives.
double margin_loss(const PooledBackend& backend, const Vec& e_ref, const Vec& e_pos, const Vec& e_neg, double margin);

/// Analytic gradient of margin_loss with respect to A and b (attention held
/// fixed); used by the trainer and checked against finite differences.
struct BilinearGradient {
  std::vector<double> dA;
  double db = 0.0;
};
BilinearGradient margin_loss_gradient(const PooledBackend& backend, const Vec& e_ref, const Vec& e_pos,
                                      const Vec& e_neg, double margin);

/// Top-1 recall of the positive span among all candidates of each pair's `s`.
double fill_top1_recall(const PooledBackend& backend, const std::vector<FillPair>& pairs);

/// SGD on the margin ranking loss. Updates `backend` in place and returns the
/// final parameters. Deterministic given the seed.
FillTrainResult train_fill_backend(PooledBackend& backend, const std::vector<FillPair>& pairs,
                                   const FillTrainOptions& options = {});

}  // namespace nmt
