#include "nmt/supervision.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "nmt/atoms.hpp"

namespace nmt {

std::vector<double> batch_weights(const std::vector<double>& z, double theta) {
  if (z.empty()) throw DomainError("batch_weights: empty batch");
  for (double v : z) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("batch_weights: confidence " + std::to_string(v) + " outside [0, 1]");
  }
  // Shift by the max so large theta cannot overflow.
  const double top = theta * *std::max_element(z.begin(), z.end());
  const double bottom = theta * *std::min_element(z.begin(), z.end());
  const double shift = theta >= 0 ? top : bottom;
  std::vector<double> w(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += (w[i] = std::exp(theta * z[i] - shift));
  for (auto& v : w) v /= sum;
  return w;
}

BatchKind rotation_schedule(long step, int r) {
  if (step < 0 || r < 1) throw DomainError("rotation_schedule: need step >= 0 and r >= 1");
  return step % (r + 1) < r ? BatchKind::Unlabeled : BatchKind::Soft;
}

// ---------------------------------------------------------------------------
// Features

namespace {

const std::set<std::string> kMonths = {"january", "february", "march",     "april",   "may",      "june",
                                       "july",    "august",   "september", "october", "november", "december"};

const std::set<std::string> kFunctionWords = {"the", "a",    "an",   "of",   "in",    "on",   "at",  "to",
                                              "was", "is",   "are",  "were", "did",   "does", "do",  "what",
                                              "when", "who", "where", "how", "which", "why",  "many", "year"};

std::string question_class(const TokenSeq& q) {
  auto at = [&](int i) { return i < q.size() ? q[static_cast<std::size_t>(i)].lower : std::string(); };
  if (at(0) == "how" && at(1) == "many") return "howmany";
  if ((at(0) == "in" && at(1) == "what" && at(2) == "year") || (at(0) == "what" && at(1) == "year")) return "year";
  static const std::set<std::string> wh = {"when", "who", "where", "what", "which", "why", "how"};
  return wh.count(at(0)) ? at(0) : "other";
}

std::string shape(const Token& t) {
  if (t.pos == Pos::PUNCT) return "punct";
  if (!t.text.empty() && std::all_of(t.text.begin(), t.text.end(), [](unsigned char c) { return std::isdigit(c); })) {
    if (t.text.size() == 4 && t.text >= "1000" && t.text <= "2100") return "yr";
    return "num";
  }
  if (kMonths.count(t.lower)) return "month";
  if (std::isupper(static_cast<unsigned char>(t.text[0]))) return "cap";
  return "low";
}

int feature_index(const std::string& f) { return static_cast<int>(fnv1a(f) % static_cast<std::uint64_t>(kStudentDim)); }

}  // namespace

InstanceFeatures extract_features(const Instance& instance) {
  const auto& ctx = instance.context;
  const std::string wh = question_class(instance.question);
  std::set<std::string> qwords;
  for (const auto& t : instance.question.tokens()) {
    if (t.pos != Pos::PUNCT && !kFunctionWords.count(t.lower)) qwords.insert(t.lower);
  }

  InstanceFeatures out;
  out.start.resize(static_cast<std::size_t>(ctx.size()));
  out.end.resize(static_cast<std::size_t>(ctx.size()));
  for (const auto& sent : ctx.sentences()) {
    auto word = [&](int i) {
      if (i < sent.begin) return std::string("<s>");
      if (i >= sent.end) return std::string("</s>");
      return ctx[static_cast<std::size_t>(i)].lower;
    };
    auto shape_at = [&](int i) {
      if (i < sent.begin || i >= sent.end) return std::string("edge");
      return shape(ctx[static_cast<std::size_t>(i)]);
    };
    int last_qword = -1;
    for (int i = sent.begin; i < sent.end; ++i) {
      const auto& tok = ctx[static_cast<std::size_t>(i)];
      const std::string sh = shape(tok);
      const std::string pos(to_string(tok.pos));
      const bool in_q = qwords.count(tok.lower) > 0;
      const std::string anchor = last_qword < 0 ? "none" : std::to_string(std::min(i - last_qword - 1, 5));

      std::vector<std::string> s = {
          "S|" + wh + "|" + sh,
          "S|" + wh + "|" + pos,
          "S|" + wh + "|prev=" + word(i - 1),
          "S|" + wh + "|prev2=" + word(i - 2),
          "S|" + shape_at(i - 1) + ">" + sh,
          "S|" + wh + "|anchor=" + anchor,
          std::string("S|inq=") + (in_q ? "1" : "0"),
      };
      std::vector<std::string> e = {
          "E|" + wh + "|" + sh,
          "E|" + wh + "|" + pos,
          "E|" + wh + "|next=" + word(i + 1),
          "E|" + sh + ">" + shape_at(i + 1),
          "E|" + wh + "|anchor=" + anchor,
          std::string("E|inq=") + (in_q ? "1" : "0"),
      };
      for (const auto& f : s) out.start[static_cast<std::size_t>(i)].push_back(feature_index(f));
      for (const auto& f : e) out.end[static_cast<std::size_t>(i)].push_back(feature_index(f));
      if (in_q) last_qword = i;
    }
  }
  return out;
}

namespace {

std::vector<double> scores(const std::vector<double>& w, const std::vector<std::vector<int>>& feats) {
  std::vector<double> s(feats.size(), 0.0);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (int f : feats[i]) s[i] += w[static_cast<std::size_t>(f)];
  }
  return s;
}

// -log softmax(s)[gold]; accumulates weight * d/ds into g through feats.
double nll(const std::vector<double>& s, int gold, const std::vector<std::vector<int>>& feats, double weight,
           std::vector<double>& g) {
  const double top = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (double v : s) z += std::exp(v - top);
  const double log_z = top + std::log(z);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = std::exp(s[i] - log_z) - (static_cast<int>(i) == gold ? 1.0 : 0.0);
    if (d == 0.0) continue;
    for (int f : feats[i]) g[static_cast<std::size_t>(f)] += weight * d;
  }
  return log_z - s[static_cast<std::size_t>(gold)];
}

}  // namespace

LossGrad mrc_loss(const Student& student, const std::vector<Example>& batch, const std::vector<double>& weights) {
  if (weights.size() != batch.size()) throw TrainingError("mrc_loss: weights do not match batch size");
  LossGrad out;
  out.g_start.assign(kStudentDim, 0.0);
  out.g_end.assign(kStudentDim, 0.0);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& ex = batch[k];
    if (!ex.instance->context.valid(ex.target)) {
      throw TrainingError("target span outside the context of " + ex.instance->id);
    }
    const auto feats = extract_features(*ex.instance);
    const double ls = nll(scores(student.w_start, feats.start), ex.target.start, feats.start, weights[k], out.g_start);
    const double le = nll(scores(student.w_end, feats.end), ex.target.end, feats.end, weights[k], out.g_end);
    out.loss += weights[k] * (ls + le);
  }
  return out;
}

Span predict(const Student& student, const Instance& instance) {
  const auto feats = extract_features(instance);
  const auto s = scores(student.w_start, feats.start);
  const auto e = scores(student.w_end, feats.end);
  Span best{0, 0};
  double best_score = -INFINITY;
  const int n = instance.context.size();
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < std::min(n, i + student.max_span_len); ++j) {
      const double v = s[static_cast<std::size_t>(i)] + e[static_cast<std::size_t>(j)];
      if (v > best_score) {
        best_score = v;
        best = {i, j};
      }
    }
  }
  return best;
}

std::vector<Example> pseudo_label(const Student& student, const std::vector<const Instance*>& batch) {
  std::vector<Example> out;
  for (const auto* inst : batch) {
    if (inst->context.empty()) continue;
    out.push_back({inst, predict(student, *inst)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::SaOnly: return "sa";
    case TrainMode::Da: return "da";
    case TrainMode::DaPlusPl: return "da+pl";
  }
  return "sa";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "sa") return TrainMode::SaOnly;
  if (s == "da") return TrainMode::Da;
  if (s == "da+pl") return TrainMode::DaPlusPl;
  throw TrainingError("unknown training mode '" + s + "' (expected sa, da or da+pl)");
}

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw TrainingError(std::string("bad training config: ") + e.what());
  }
  if (!j.is_object()) throw TrainingError("training config must be a JSON object");
  static const std::set<std::string> known = {"theta", "beta",   "rotation",      "batch_a", "batch_p",
                                              "batch_u", "epochs", "learning_rate", "l2",      "seed"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw TrainingError("unknown training config key '" + k + "'");
  }
  try {
    c.theta = j.value("theta", c.theta);
    c.beta = j.value("beta", c.beta);
    c.rotation = j.value("rotation", c.rotation);
    c.batch_a = j.value("batch_a", c.batch_a);
    c.batch_p = j.value("batch_p", c.batch_p);
    c.batch_u = j.value("batch_u", c.batch_u);
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.l2 = j.value("l2", c.l2);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw TrainingError(std::string("bad training config: ") + e.what());
  }
  if (c.beta < 0 || c.rotation < 1 || c.batch_a < 1 || c.batch_p < 1 || c.batch_u < 1 || c.epochs < 0) {
    throw TrainingError("training config out of range");
  }
  return c;
}

std::string train_config_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["theta"] = c.theta;
  j["beta"] = c.beta;
  j["rotation"] = c.rotation;
  j["batch_a"] = c.batch_a;
  j["batch_p"] = c.batch_p;
  j["batch_u"] = c.batch_u;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["l2"] = c.l2;
  j["seed"] = c.seed;
  return j.dump(2);
}

namespace {

// Endless seeded stream over a list, reshuffled on every pass.
template <class T>
class Cycler {
 public:
  Cycler(std::vector<T> items, std::mt19937_64& rng) : items_(std::move(items)), rng_(rng) {}
  bool empty() const { return items_.empty(); }
  std::vector<T> take(int n) {
    std::vector<T> out;
    for (int i = 0; i < n && !items_.empty(); ++i) {
      if (pos_ == 0) std::shuffle(items_.begin(), items_.end(), rng_);
      out.push_back(items_[pos_]);
      pos_ = (pos_ + 1) % items_.size();
    }
    return out;
  }

 private:
  std::vector<T> items_;
  std::mt19937_64& rng_;
  std::size_t pos_ = 0;
};

void add_scaled(std::vector<double>& into, const std::vector<double>& g, double scale) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += scale * g[i];
}

}  // namespace

Student train_student(const LabeledSplits& splits, const std::vector<Instance>& corpus, const TrainConfig& config,
                      TrainMode mode) {
  if (splits.strict.empty()) throw TrainingError("S_a is empty");
  std::unordered_map<std::string, const Instance*> index;
  for (const auto& inst : corpus) index.emplace(inst.id, &inst);
  auto lookup = [&](const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) throw TrainingError("split refers to unknown instance " + id);
    return it->second;
  };

  std::vector<Example> strict;
  for (const auto& e : splits.strict) strict.push_back({lookup(e.instance_id), e.span});
  std::vector<std::pair<Example, double>> soft;
  for (const auto& e : splits.soft) soft.push_back({{lookup(e.instance_id), e.span}, e.z});
  std::vector<const Instance*> unlabeled;
  for (const auto& id : splits.unlabeled) unlabeled.push_back(lookup(id));

  std::mt19937_64 rng(config.seed);
  Cycler<std::pair<Example, double>> soft_stream(soft, rng);
  Cycler<const Instance*> unlabeled_stream(unlabeled, rng);

  Student student;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(strict.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_a), ++step) {
      std::vector<Example> batch;
      for (std::size_t k = b; k < std::min(order.size(), b + static_cast<std::size_t>(config.batch_a)); ++k) {
        batch.push_back(strict[order[k]]);
      }
      auto total = mrc_loss(student, batch, std::vector<double>(batch.size(), 1.0 / static_cast<double>(batch.size())));

      const bool soft_step = mode == TrainMode::Da ||
                             (mode == TrainMode::DaPlusPl && rotation_schedule(step, config.rotation) == BatchKind::Soft);
      if (mode != TrainMode::SaOnly && soft_step && !soft_stream.empty()) {
        std::vector<Example> pb;
        std::vector<double> z;
        for (auto& [ex, conf] : soft_stream.take(config.batch_p)) {
          pb.push_back(ex);
          z.push_back(conf);
        }
        const auto lp = mrc_loss(student, pb, batch_weights(z, config.theta));
        total.loss = blended_loss(total.loss, lp.loss, config.beta);
        add_scaled(total.g_start, lp.g_start, config.beta);
        add_scaled(total.g_end, lp.g_end, config.beta);
      } else if (mode == TrainMode::DaPlusPl && !soft_step && epoch > 0 && !unlabeled_stream.empty()) {
        // Pseudo labels start once the student has seen every strict example.
        auto ub = pseudo_label(student, unlabeled_stream.take(config.batch_u));
        if (!ub.empty()) {
          const auto lu = mrc_loss(student, ub, std::vector<double>(ub.size(), 1.0 / static_cast<double>(ub.size())));
          total.loss = blended_loss(total.loss, lu.loss, config.beta);
          add_scaled(total.g_start, lu.g_start, config.beta);
          add_scaled(total.g_end, lu.g_end, config.beta);
        }
      }
      for (std::size_t i = 0; i < student.w_start.size(); ++i) {
        student.w_start[i] -= config.learning_rate * (total.g_start[i] + config.l2 * student.w_start[i]);
        student.w_end[i] -= config.learning_rate * (total.g_end[i] + config.l2 * student.w_end[i]);
      }
      ++student.steps;
    }
  }
  return student;
}

std::string student_json(const Student& student) {
  nlohmann::ordered_json j;
  j["dim"] = kStudentDim;
  j["max_span_len"] = student.max_span_len;
  j["steps"] = student.steps;
  auto sparse = [](const std::vector<double>& w) {
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] != 0.0) arr.push_back({i, w[i]});
    }
    return arr;
  };
  j["w_start"] = sparse(student.w_start);
  j["w_end"] = sparse(student.w_end);
  return j.dump();
}

Student student_from_json(const std::string& text) {
  Student s;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("dim").get<int>() != kStudentDim) throw TrainingError("model dimension mismatch");
    s.max_span_len = j.at("max_span_len").get<int>();
    s.steps = j.at("steps").get<long>();
    auto fill = [](const nlohmann::json& arr, std::vector<double>& w) {
      for (const auto& kv : arr) {
        const auto i = kv.at(0).get<std::size_t>();
        if (i >= w.size()) throw TrainingError("model weight index out of range");
        w[i] = kv.at(1).get<double>();
      }
    };
    fill(j.at("w_start"), s.w_start);
    fill(j.at("w_end"), s.w_end);
  } catch (const nlohmann::json::exception& e) {
    throw TrainingError(std::string("bad model file: ") + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Evaluation

std::string normalize_answer(const std::string& s) {
  std::string text;
  for (unsigned char c : s) {
    if (std::ispunct(c)) continue;
    text += static_cast<char>(std::tolower(c));
  }
  static const std::regex articles("\\b(a|an|the)\\b");
  text = std::regex_replace(text, articles, " ");
  std::istringstream in(text);
  std::string word, out;
  while (in >> word) out += (out.empty() ? "" : " ") + word;
  return out;
}

double exact_match(const std::string& prediction, const std::string& gold) {
  return normalize_answer(prediction) == normalize_answer(gold) ? 1.0 : 0.0;
}

double f1_score(const std::string& prediction, const std::string& gold) {
  auto words = [](const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(normalize_answer(s));
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
  };
  const auto p = words(prediction);
  const auto g = words(gold);
  std::map<std::string, int> bag;
  for (const auto& w : g) ++bag[w];
  int same = 0;
  for (const auto& w : p) {
    auto it = bag.find(w);
    if (it != bag.end() && it->second > 0) {
      --it->second;
      ++same;
    }
  }
  if (same == 0) return 0.0;
  const double precision = static_cast<double>(same) / static_cast<double>(p.size());
  const double recall = static_cast<double>(same) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

Metrics evaluate(const std::map<std::string, std::string>& predictions,
                 const std::map<std::string, std::vector<std::string>>& gold) {
  Metrics m;
  if (predictions.empty()) return m;
  for (const auto& [id, pred] : predictions) {
    auto it = gold.find(id);
    if (it == gold.end() || it->second.empty()) throw EvaluationError("no gold answer for " + id);
    double em = 0.0, f1 = 0.0;
    for (const auto& g : it->second) {
      em = std::max(em, exact_match(pred, g));
      f1 = std::max(f1, f1_score(pred, g));
    }
    m.exact_match += em;
    m.f1 += f1;
  }
  const double n = static_cast<double>(predictions.size());
  m.exact_match = 100.0 * m.exact_match / n;
  m.f1 = 100.0 * m.f1 / n;
  return m;
}

std::map<std::string, std::string> predict_all(const Student& student, const std::vector<const Instance*>& instances) {
  std::map<std::string, std::string> out;
  for (const auto* inst : instances) {
    out[inst->id] = inst->context.empty() ? std::string() : inst->answer_text(predict(student, *inst));
  }
  return out;
}

}  // namespace nmt
