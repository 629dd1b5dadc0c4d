#pragma once

// Training from teacher labels: confidence-weighted batches, loss blending,
// the unlabeled/soft rotation, a small linear span extractor and the SQuAD
// EM/F1 evaluator.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nmt/pipeline.hpp"

namespace nmt {

/// Softmax of theta * z. Throws DomainError on an empty list or z outside [0, 1].
std::vector<double> batch_weights(const std::vector<double>& z, double theta);

inline double blended_loss(double l_a, double l_other, double beta) { return l_a + beta * l_other; }

enum class BatchKind { Unlabeled, Soft };

/// r unlabeled steps, then one soft step, repeating.
BatchKind rotation_schedule(long step, int r);

// ---------------------------------------------------------------------------
// Student

inline constexpr int kStudentDim = 1 << 14;

/// Linear start and end scorers over hashed hand features: question-word
/// class crossed with token shape and neighbouring words, overlap with the
/// question, distance to the nearest question word, sentence position.
struct Student {
  std::vector<double> w_start = std::vector<double>(kStudentDim, 0.0);
  std::vector<double> w_end = std::vector<double>(kStudentDim, 0.0);
  int max_span_len = kDefaultMaxSpanLen;
  long steps = 0;
};

/// Sparse features of every context token, for one instance.
struct InstanceFeatures {
  std::vector<std::vector<int>> start;
  std::vector<std::vector<int>> end;
};

InstanceFeatures extract_features(const Instance& instance);

struct Example {
  const Instance* instance = nullptr;
  Span target;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> g_start;
  std::vector<double> g_end;
};

/// Weighted negative log-likelihood of the target start and end under
/// softmax over context tokens. Throws TrainingError when a target lies
/// outside its context or weights do not match the batch.
LossGrad mrc_loss(const Student& student, const std::vector<Example>& batch, const std::vector<double>& weights);

/// Best span with start <= end and length <= max_span_len; ties go to the
/// earliest start, then the shortest span.
Span predict(const Student& student, const Instance& instance);

std::vector<Example> pseudo_label(const Student& student, const std::vector<const Instance*>& batch);

enum class TrainMode { SaOnly, Da, DaPlusPl };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
  double theta = 2.0;
  double beta = 0.3;
  int rotation = 8;
  int batch_a = 8;
  int batch_p = 8;
  int batch_u = 8;
  int epochs = 5;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  std::uint64_t seed = 13;
};

TrainConfig train_config_from_json(const std::string& text);
std::string train_config_json(const TrainConfig& config);

/// One epoch is one pass over S_a in seeded order. Throws TrainingError when
/// S_a is empty.
Student train_student(const LabeledSplits& splits, const std::vector<Instance>& corpus, const TrainConfig& config,
                      TrainMode mode);

std::string student_json(const Student& student);
Student student_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Evaluation

struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Lower-case, drop punctuation and articles, collapse whitespace.
std::string normalize_answer(const std::string& s);
double exact_match(const std::string& prediction, const std::string& gold);
double f1_score(const std::string& prediction, const std::string& gold);

struct Metrics {
  double exact_match = 0.0;  // percent
  double f1 = 0.0;
};

/// Macro average over predictions, each scored against its best gold.
Metrics evaluate(const std::map<std::string, std::string>& predictions,
                 const std::map<std::string, std::vector<std::string>>& gold);

std::map<std::string, std::string> predict_all(const Student& student, const std::vector<const Instance*>& instances);

}  // namespace nmt
