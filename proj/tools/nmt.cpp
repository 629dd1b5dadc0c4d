// nmt: command-line front end for compiling teachers, labeling a corpus,
// training and evaluating the student, and serving the HTTP API.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nmt/pipeline.hpp"
#include "nmt/service.hpp"
#include "nmt/supervision.hpp"

using namespace nmt;
using json = nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// A teachers file holds either compiled bundles (raw_text) or explanations
// ({id, instance_id, text}) that are built here against the lexicon.
std::vector<TeacherProgram> load_teacher_file(const std::string& path, const std::vector<Instance>& corpus,
                                              const std::string& lexicon_path, bool verbose) {
  std::istringstream in(slurp(path));
  std::string first;
  while (std::getline(in, first) && first.find_first_not_of(" \t\r") == std::string::npos) {
  }
  if (first.empty()) return {};
  if (json::parse(first).contains("raw_text")) return load_teachers(path, corpus);
  if (lexicon_path.empty()) throw std::runtime_error(path + " holds explanations; pass --lexicon to build them");
  const auto lexicon = load_lexicon(lexicon_path);
  std::vector<TeacherProgram> out;
  for (const auto& e : load_explanations(path)) {
    auto ref = std::find_if(corpus.begin(), corpus.end(), [&](const Instance& i) { return i.id == e.instance_id; });
    if (ref == corpus.end()) throw std::runtime_error("explanation " + e.id + ": unknown instance " + e.instance_id);
    auto built = build_teacher(e, lexicon, *ref);
    if (!built.program) {
      std::string msg = "explanation " + e.id + " does not compile";
      for (const auto& d : built.diagnostics) msg += "\n  " + d;
      throw std::runtime_error(msg);
    }
    if (verbose) {
      std::cerr << built.program->id << "  " << e.id << "  " << (built.program->validated ? "validated" : "NOT validated")
                << '\n';
    }
    out.push_back(std::move(*built.program));
  }
  return out;
}

// Gold answers from a corpus file, or from a JSON map id -> [answers].
std::map<std::string, std::vector<std::string>> load_gold(const std::string& path) {
  std::map<std::string, std::vector<std::string>> gold;
  const auto doc = json::parse(slurp(path), nullptr, false);
  if (!doc.is_discarded() && doc.is_object() && !doc.contains("data")) {
    for (const auto& [id, v] : doc.items()) {
      gold[id] = v.is_string() ? std::vector<std::string>{v.get<std::string>()} : v.get<std::vector<std::string>>();
    }
    return gold;
  }
  for (const auto& inst : load_corpus(path)) {
    if (inst.gold) gold[inst.id] = {inst.answer_text(*inst.gold)};
  }
  return gold;
}

Service* g_service = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Teacher-based weak supervision for extractive QA"};
  app.require_subcommand(1);

  // compile
  std::string c_expl, c_corpus, c_lexicon, c_out;
  auto* compile_cmd = app.add_subcommand("compile", "Build and validate teachers from explanations");
  compile_cmd->add_option("--explanations", c_expl, "explanations JSONL")->required()->check(CLI::ExistingFile);
  compile_cmd->add_option("--corpus", c_corpus, "corpus (SQuAD JSON or JSONL)")->required()->check(CLI::ExistingFile);
  compile_cmd->add_option("--lexicon", c_lexicon, "lexicon JSON")->required()->check(CLI::ExistingFile);
  compile_cmd->add_option("--out", c_out, "teacher bundles JSONL")->required();

  // label
  std::string l_corpus, l_teachers, l_lexicon, l_out;
  LabelConfig l_cfg;
  auto* label_cmd = app.add_subcommand("label", "Label a corpus into strict, soft and unlabeled splits");
  label_cmd->add_option("--corpus", l_corpus)->required()->check(CLI::ExistingFile);
  label_cmd->add_option("--teachers", l_teachers, "bundles or explanations JSONL")->required()->check(CLI::ExistingFile);
  label_cmd->add_option("--lexicon", l_lexicon, "needed when --teachers holds explanations");
  label_cmd->add_option("--threshold", l_cfg.search.threshold)->capture_default_str()->check(CLI::Range(0.0, 0.999999));
  label_cmd->add_option("--beam", l_cfg.search.beam_width)->capture_default_str()->check(CLI::PositiveNumber);
  label_cmd->add_option("--threads", l_cfg.threads, "0 = hardware")->capture_default_str();
  label_cmd->add_flag("--strict-only", l_cfg.strict_only);
  label_cmd->add_option("--out", l_out, "output directory")->required();

  // train
  std::string t_splits, t_corpus, t_mode = "da", t_config, t_out;
  auto* train_cmd = app.add_subcommand("train", "Train the student on exported splits");
  train_cmd->add_option("--splits", t_splits, "directory written by label")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--corpus", t_corpus, "corpus the splits were labeled from")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--mode", t_mode)->capture_default_str()->check(CLI::IsMember({"sa", "da", "da+pl"}));
  train_cmd->add_option("--config", t_config, "training config JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", t_out, "model JSON")->required();

  // predict
  std::string p_model, p_corpus, p_out;
  auto* predict_cmd = app.add_subcommand("predict", "Predict answers for every corpus instance");
  predict_cmd->add_option("--model", p_model)->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--corpus", p_corpus)->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--out", p_out, "predictions JSON (id -> answer)")->required();

  // eval
  std::string e_pred, e_gold, e_out;
  auto* eval_cmd = app.add_subcommand("eval", "Exact match and F1 of predictions against gold answers");
  eval_cmd->add_option("--pred", e_pred, "predictions JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gold", e_gold, "corpus file or JSON id -> [answers]")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", e_out, "metrics JSON (stdout when omitted)");

  // serve
  ServiceOptions s_opt;
  std::string s_host = "127.0.0.1";
  int s_port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--host", s_host)->capture_default_str();
  serve_cmd->add_option("--port", s_port)->capture_default_str();
  serve_cmd->add_option("--corpus", s_opt.corpus_path)->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--lexicon", s_opt.lexicon_path)->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--data-dir", s_opt.data_dir)->envname("NMT_DATA_DIR")->required();
  serve_cmd->add_option("--workers", s_opt.workers)->capture_default_str()->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*compile_cmd) {
      const auto corpus = load_corpus(c_corpus);
      const auto programs = load_teacher_file(c_expl, corpus, c_lexicon, true);
      save_teachers(programs, c_out);
    } else if (*label_cmd) {
      const auto corpus = load_corpus(l_corpus);
      const auto programs = load_teacher_file(l_teachers, corpus, l_lexicon, false);
      std::vector<TeacherProgram> usable;
      for (const auto& p : programs) {
        if (p.validated) {
          usable.push_back(p);
        } else {
          std::cerr << "skipping unvalidated teacher " << p.id << '\n';
        }
      }
      const auto stats = label_and_export(usable, corpus, l_cfg, l_out);
      std::cerr << "strict " << stats.strict << "  soft " << stats.soft << "  unlabeled " << stats.unlabeled << "  ("
                << stats.wall_seconds << " s)\n";
    } else if (*train_cmd) {
      const auto corpus = load_corpus(t_corpus);
      const auto splits = import_splits(t_splits, corpus);
      const auto config = t_config.empty() ? TrainConfig{} : train_config_from_json(slurp(t_config));
      write_file(t_out, student_json(train_student(splits, corpus, config, train_mode_from_string(t_mode))));
    } else if (*predict_cmd) {
      const auto student = student_from_json(slurp(p_model));
      const auto corpus = load_corpus(p_corpus);
      std::vector<const Instance*> all;
      for (const auto& i : corpus) all.push_back(&i);
      write_file(p_out, json(predict_all(student, all)).dump(2) + "\n");
    } else if (*eval_cmd) {
      const auto preds = json::parse(slurp(e_pred)).get<std::map<std::string, std::string>>();
      const auto m = evaluate(preds, load_gold(e_gold));
      const auto text = json{{"exact_match", m.exact_match}, {"f1", m.f1}}.dump(2) + "\n";
      if (e_out.empty()) {
        std::cout << text;
      } else {
        write_file(e_out, text);
      }
    } else if (*serve_cmd) {
      Service service(s_opt);
      g_service = &service;
      std::signal(SIGINT, [](int) { g_service->stop(); });
      std::signal(SIGTERM, [](int) { g_service->stop(); });
      std::cerr << "listening on " << s_host << ":" << s_port << '\n';
      if (!service.listen(s_host, s_port)) {
        std::cerr << "cannot listen on " << s_host << ":" << s_port << '\n';
        return 1;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
