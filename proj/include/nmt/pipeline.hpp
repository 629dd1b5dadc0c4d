#pragma once

// Corpus labeling with an ensemble of teachers: strict (S_a), soft (S_p) and
// unlabeled (S_u) splits, their JSONL artifacts and run statistics.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmt/teacher.hpp"

namespace nmt {

struct StrictEntry {
  std::string instance_id;
  Span span;
  std::string teacher_id;
  friend bool operator==(const StrictEntry&, const StrictEntry&) = default;
};

struct SoftEntry {
  std::string instance_id;
  Span span;
  double z = 0.0;
  std::string teacher_id;
  friend bool operator==(const SoftEntry&, const SoftEntry&) = default;
};

struct LabeledSplits {
  std::vector<StrictEntry> strict;
  std::vector<SoftEntry> soft;  // every soft id is also in `unlabeled`
  std::vector<std::string> unlabeled;
  friend bool operator==(const LabeledSplits&, const LabeledSplits&) = default;
};

struct LabelConfig {
  SearchConfig search;
  bool strict_only = false;  // run strict semantics; S_p stays empty
  int threads = 0;           // 0: hardware concurrency
};

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Labels every corpus instance that is not the reference of one of the
/// programs. Output order follows the corpus. Throws if a program is not
/// validated.
LabeledSplits label_corpus(const std::vector<TeacherProgram>& programs, const std::vector<Instance>& corpus,
                           const LabelConfig& config);

struct TeacherCounts {
  int strict = 0;
  int soft = 0;
  friend bool operator==(const TeacherCounts&, const TeacherCounts&) = default;
};

struct RunStats {
  int strict = 0;
  int soft = 0;
  int unlabeled = 0;
  std::map<std::string, TeacherCounts> per_teacher;  // every labeling teacher, zero rows included
  std::map<std::string, double> question_heads;
  double wall_seconds = 0.0;  // not exported: artifacts must be byte-stable
};

/// Lower-cased first-two-token histogram over S_a questions.
std::map<std::string, double> question_head_histogram(const LabeledSplits& splits,
                                                      const std::vector<Instance>& corpus);

RunStats compute_stats(const LabeledSplits& splits, const std::vector<Instance>& corpus,
                       const std::vector<TeacherProgram>& programs);

/// Writes strict.jsonl, soft.jsonl, unlabeled.jsonl and stats.json into `dir`
/// (created if missing).
void export_splits(const LabeledSplits& splits, const RunStats& stats, const std::vector<Instance>& corpus,
                   const std::string& dir);

/// The stats.json document.
std::string stats_json(const RunStats& stats);

/// Labels, computes stats and exports in one go; shared by the CLI and the
/// service so both write identical artifacts. Fills wall_seconds.
RunStats label_and_export(const std::vector<TeacherProgram>& programs, const std::vector<Instance>& corpus,
                          const LabelConfig& config, const std::string& dir);

/// Reads the three JSONL files back; offsets are mapped to tokens of `corpus`.
LabeledSplits import_splits(const std::string& dir, const std::vector<Instance>& corpus);

/// Context token span whose characters are exactly [char_start, char_end).
std::optional<Span> span_from_chars(const Instance& instance, int char_start, int char_end);

inline const std::vector<std::string> kSplitFiles = {"strict.jsonl", "soft.jsonl", "unlabeled.jsonl", "stats.json"};

}  // namespace nmt
