#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmt/teacher.hpp"

namespace nmt::testing {

inline std::string data_path(const std::string& rel) { return std::string(NMT_TEST_DATA_DIR) + "/" + rel; }

struct Fixtures {
  std::vector<Instance> corpus;
  Lexicon lexicon;
  std::vector<Explanation> explanations;
  std::vector<TeacherProgram> teachers;

  const Instance& instance(const std::string& id) const {
    auto it = std::find_if(corpus.begin(), corpus.end(), [&](const Instance& i) { return i.id == id; });
    if (it == corpus.end()) throw std::runtime_error("no fixture instance " + id);
    return *it;
  }

  const TeacherProgram& teacher_for(const std::string& instance_id) const {
    auto it = std::find_if(teachers.begin(), teachers.end(),
                           [&](const TeacherProgram& p) { return p.reference.id == instance_id; });
    if (it == teachers.end()) throw std::runtime_error("no fixture teacher for " + instance_id);
    return *it;
  }
};

inline const Fixtures& fixtures() {
  static const Fixtures f = [] {
    Fixtures x;
    x.corpus = load_corpus(data_path("fixtures/corpus.jsonl"));
    x.lexicon = load_lexicon(data_path("lexicon.json"));
    x.explanations = load_explanations(data_path("fixtures/explanations.jsonl"));
    for (const auto& e : x.explanations) {
      auto built = build_teacher(e, x.lexicon, x.instance(e.instance_id));
      if (!built.program) throw std::runtime_error("fixture explanation " + e.id + " does not build");
      x.teachers.push_back(std::move(*built.program));
    }
    return x;
  }();
  return f;
}

}  // namespace nmt::testing
