#pragma once

// Progressive-filling beam search over a fixed sequence of slots. Each level
// extends every surviving partial state with every candidate for the next
// slot, rescores, drops states at or below the threshold and keeps the best
// `width`.

#include <algorithm>
#include <cstddef>
#include <vector>

namespace nmt {

template <class Value>
struct PartialState {
  std::vector<Value> values;  // one per filled slot, in slot order
  double z = 1.0;
};

/// `candidates(values, slot)` lists the admissible values for `slot` given the
/// slots filled so far; `score(values)` returns z of a partial assignment;
/// `before(a, b)` orders states of equal z. Returns complete states, best
/// first. States with z <= threshold are pruned at every level.
template <class Value, class CandidateFn, class ScoreFn, class Before>
std::vector<PartialState<Value>> beam_search(std::size_t slots, CandidateFn&& candidates, ScoreFn&& score,
                                             Before&& before, std::size_t width, double threshold) {
  std::vector<PartialState<Value>> current(1);
  current.front().z = score(current.front().values);
  if (current.front().z <= threshold) return {};
  auto order = [&](const PartialState<Value>& a, const PartialState<Value>& b) {
    if (a.z != b.z) return a.z > b.z;
    return before(a, b);
  };
  for (std::size_t slot = 0; slot < slots; ++slot) {
    std::vector<PartialState<Value>> next;
    for (const auto& state : current) {
      for (const auto& v : candidates(state.values, slot)) {
        PartialState<Value> s{state.values, 0.0};
        s.values.push_back(v);
        s.z = score(s.values);
        if (s.z > threshold) next.push_back(std::move(s));
      }
    }
    std::stable_sort(next.begin(), next.end(), order);
    if (next.size() > width) next.resize(width);
    current = std::move(next);
    if (current.empty()) break;
  }
  return current;
}

}  // namespace nmt
