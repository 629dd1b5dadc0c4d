#include "nmt/service.hpp"

#include <cmath>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"
#include "nmt/pipeline.hpp"

namespace nmt {

using json = nlohmann::ordered_json;

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
  std::vector<std::string> details;
};

[[noreturn]] void fail(int status, std::string code, std::string message, std::vector<std::string> details = {}) {
  throw HttpError{status, std::move(code), std::move(message), std::move(details)};
}

json error_body(const HttpError& e) {
  json j;
  j["code"] = e.code;
  j["message"] = e.message;
  j["details"] = e.details;
  return j;
}

json parse_body(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) fail(400, "bad_request", "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    fail(400, "bad_request", "request body is not valid JSON", {e.what()});
  }
}

template <class T>
T field(const json& body, const std::string& key, const T& fallback) {
  if (!body.contains(key) || body[key].is_null()) return fallback;
  try {
    return body[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(400, "bad_request", "field '" + key + "' has the wrong type");
  }
}

std::string required_string(const json& body, const std::string& key) {
  if (!body.contains(key)) fail(400, "bad_request", "missing field '" + key + "'");
  if (!body[key].is_string()) fail(400, "bad_request", "field '" + key + "' must be a string");
  return body[key].get<std::string>();
}

json tokens_json(const TokenSeq& seq) {
  auto arr = json::array();
  for (const auto& t : seq.tokens()) {
    arr.push_back({{"text", t.text}, {"char_start", t.char_start}, {"char_end", t.char_end}});
  }
  return arr;
}

enum class RunStatus { Queued, Running, Done, Failed };

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Queued: return "QUEUED";
    case RunStatus::Running: return "RUNNING";
    case RunStatus::Done: return "DONE";
    case RunStatus::Failed: return "FAILED";
  }
  return "FAILED";
}

struct RunRecord {
  std::string id;
  std::vector<std::string> teacher_ids;
  LabelConfig config;
  RunStatus status = RunStatus::Queued;
  std::string stats;  // stats.json text once DONE
  double wall_seconds = 0.0;
  std::string error;
  std::filesystem::path dir;
};

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  std::vector<Instance> corpus;
  std::unordered_map<std::string, std::size_t> index;
  Lexicon lexicon;
  json lexicon_doc;
  std::filesystem::path data_dir;

  mutable std::shared_mutex teachers_mu;
  std::map<std::string, TeacherProgram> teachers;

  std::mutex runs_mu;
  std::map<std::string, RunRecord> runs;
  long run_counter = 0;
  std::mt19937_64 run_rng{std::random_device{}()};

  std::mutex queue_mu;
  std::condition_variable queue_cv;
  std::deque<std::function<void()>> queue;
  bool shutting_down = false;
  std::vector<std::thread> workers;

  httplib::Server server;

  explicit Impl(const ServiceOptions& o) : options(o), data_dir(o.data_dir) {
    corpus = load_corpus(o.corpus_path);
    for (std::size_t i = 0; i < corpus.size(); ++i) index.emplace(corpus[i].id, i);
    lexicon = load_lexicon(o.lexicon_path);
    std::ifstream lex(o.lexicon_path);
    lexicon_doc = json::parse(lex);
    std::filesystem::create_directories(data_dir / "runs");
    const auto bundle = data_dir / "teachers.jsonl";
    if (std::filesystem::exists(bundle)) {
      for (auto& p : load_teachers(bundle.string(), corpus)) teachers.emplace(p.id, std::move(p));
    }
    for (int i = 0; i < o.workers; ++i) workers.emplace_back([this] { work(); });
    routes();
  }

  ~Impl() {
    server.stop();
    {
      std::lock_guard<std::mutex> lock(queue_mu);
      shutting_down = true;
    }
    queue_cv.notify_all();
    for (auto& t : workers) t.join();
  }

  void work() {
    while (true) {
      std::function<void()> job;
      {
        std::unique_lock<std::mutex> lock(queue_mu);
        queue_cv.wait(lock, [&] { return shutting_down || !queue.empty(); });
        if (queue.empty()) return;
        job = std::move(queue.front());
        queue.pop_front();
      }
      job();
    }
  }

  const Instance& instance(const std::string& id) const {
    auto it = index.find(id);
    if (it == index.end()) fail(404, "not_found", "unknown instance " + id);
    return corpus[it->second];
  }

  TeacherProgram teacher(const std::string& id) const {
    std::shared_lock<std::shared_mutex> lock(teachers_mu);
    auto it = teachers.find(id);
    if (it == teachers.end()) fail(404, "not_found", "unknown teacher " + id);
    return it->second;
  }

  // -------------------------------------------------------------------------

  json parse(const json& body) const {
    const auto text = required_string(body, "text");
    const auto& inst = instance(required_string(body, "instance_id"));
    json out;
    Explanation expl;
    try {
      expl = make_explanation("draft", inst.id, text);
    } catch (const ExplanationError& e) {
      fail(422, "unprocessable", "bad variable definitions", {e.what()});
    }
    out["variables"] = json::array();
    for (const auto& v : expl.variable_defs) out["variables"].push_back({{"name", v.name}, {"surface", v.surface}});
    const auto parsed = parse_explanation(expl, lexicon);
    out["sentences"] = json::array();
    for (const auto& s : parsed.sentences) {
      json row;
      row["text"] = s.text;
      if (s.parses.empty()) {
        row["parse"] = nullptr;
        row["error"] = "unparsable sentence";
      } else {
        row["parse"] = to_string(s.parses.front().form);
        std::string undefined;
        for (const auto& v : variables_in(s.parses.front().form)) {
          if (!expl.find_variable(v)) undefined += (undefined.empty() ? "" : ", ") + v;
        }
        row["error"] = undefined.empty() ? json(nullptr) : json("undefined variable " + undefined);
      }
      out["sentences"].push_back(std::move(row));
    }
    out["diagnostics"] = parsed.diagnostics;
    return out;
  }

  json build(const json& body) {
    std::string instance_id, text;
    if (!body.contains("explanation")) fail(400, "bad_request", "missing field 'explanation'");
    const auto& e = body["explanation"];
    if (e.is_object()) {
      instance_id = required_string(e, "instance_id");
      text = required_string(e, "text");
    } else if (e.is_string()) {
      instance_id = required_string(body, "instance_id");
      text = e.get<std::string>();
    } else {
      fail(400, "bad_request", "field 'explanation' must be an object or a string");
    }
    const auto& ref = instance(instance_id);
    TeacherBuild built;
    try {
      built = build_teacher(make_explanation("e-" + teacher_id(instance_id, text), instance_id, text), lexicon, ref);
    } catch (const ExplanationError& ex) {
      fail(422, "unprocessable", "bad variable definitions", {ex.what()});
    }
    if (!built.program) fail(422, "unprocessable", "explanation does not compile", built.diagnostics);
    const auto& prog = *built.program;
    {
      std::unique_lock<std::shared_mutex> lock(teachers_mu);
      if (!teachers.count(prog.id)) {
        std::ofstream out(data_dir / "teachers.jsonl", std::ios::app | std::ios::binary);
        out << bundle_json(prog) << '\n';
        if (!out) fail(500, "io_error", "cannot persist teacher bundle");
        teachers.emplace(prog.id, prog);
      }
    }
    json out;
    out["teacher_id"] = prog.id;
    out["validated"] = prog.validated;
    const auto a = answer(prog, prog.reference, strict_config());
    out["reference_answer"] = a ? json(prog.reference.answer_text(a->span)) : json(nullptr);
    out["z_on_reference"] = a ? a->z : 0.0;
    out["execution_trees"] = prog.execution_trees();
    return out;
  }

  json match(const json& body) const {
    const auto prog = teacher(required_string(body, "teacher_id"));
    const int limit = field<int>(body, "limit", 20);
    const double threshold = field<double>(body, "threshold", SearchConfig{}.threshold);
    if (limit < 0) fail(400, "bad_request", "limit must be >= 0");
    if (!(threshold >= 0.0 && threshold <= 1.0)) fail(400, "bad_request", "threshold must lie in [0, 1]");
    if (!prog.validated) fail(409, "conflict", "teacher " + prog.id + " is not validated");
    SearchConfig cfg;
    // Search keeps z > t; the preview keeps z >= threshold.
    cfg.threshold = std::nextafter(threshold, -1.0);
    json out;
    out["matches"] = json::array();
    for (const auto& inst : corpus) {
      if (static_cast<int>(out["matches"].size()) >= limit) break;
      if (inst.id == prog.reference.id) continue;
      const auto a = answer(prog, inst, cfg);
      if (!a || a->z < threshold) continue;
      const auto chars = inst.char_range(a->span);
      out["matches"].push_back({{"instance_id", inst.id},
                                {"question", inst.question.source()},
                                {"answer_text", inst.answer_text(a->span)},
                                {"char_start", chars.start},
                                {"char_end", chars.end},
                                {"z", a->z},
                                {"strict", a->z == 1.0}});
    }
    return out;
  }

  json run_json(const RunRecord& r) const {
    json j;
    j["run_id"] = r.id;
    j["status"] = to_string(r.status);
    j["config"] = {{"teacher_ids", r.teacher_ids},
                   {"threshold", r.config.search.threshold},
                   {"beam", r.config.search.beam_width},
                   {"strict_only", r.config.strict_only}};
    j["stats"] = r.status == RunStatus::Done ? json::parse(r.stats) : json(nullptr);
    j["wall_seconds"] = r.status == RunStatus::Done ? json(r.wall_seconds) : json(nullptr);
    j["artifacts"] = r.status == RunStatus::Done ? json(kSplitFiles) : json::array();
    j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
    return j;
  }

  json label_run(const json& body) {
    if (!body.contains("teacher_ids") || !body["teacher_ids"].is_array()) {
      fail(400, "bad_request", "field 'teacher_ids' must be a list");
    }
    std::vector<std::string> ids;
    std::vector<TeacherProgram> programs;
    for (const auto& v : body["teacher_ids"]) {
      if (!v.is_string()) fail(400, "bad_request", "teacher ids must be strings");
      ids.push_back(v.get<std::string>());
      programs.push_back(teacher(ids.back()));
      if (!programs.back().validated) fail(409, "conflict", "teacher " + ids.back() + " is not validated");
    }
    const json cfg = body.contains("config") ? body["config"] : json::object();
    if (!cfg.is_object()) fail(400, "bad_request", "field 'config' must be an object");
    LabelConfig config;
    config.search.threshold = field<double>(cfg, "threshold", config.search.threshold);
    config.search.beam_width = field<int>(cfg, "beam", config.search.beam_width);
    config.strict_only = field<bool>(cfg, "strict_only", false);
    config.threads = options.label_threads;
    if (!(config.search.threshold >= 0.0 && config.search.threshold < 1.0)) {
      fail(400, "bad_request", "threshold must lie in [0, 1)");
    }
    if (config.search.beam_width < 1) fail(400, "bad_request", "beam must be >= 1");

    RunRecord rec;
    {
      std::lock_guard<std::mutex> lock(runs_mu);
      char buf[48];
      std::snprintf(buf, sizeof buf, "run-%06ld-%08llx", ++run_counter,
                    static_cast<unsigned long long>(run_rng() & 0xffffffffULL));
      rec.id = buf;
      rec.teacher_ids = ids;
      rec.config = config;
      rec.dir = data_dir / "runs" / rec.id;
      runs.emplace(rec.id, rec);
    }
    {
      std::lock_guard<std::mutex> lock(queue_mu);
      queue.push_back([this, id = rec.id, programs = std::move(programs), config, dir = rec.dir] {
        set_status(id, RunStatus::Running);
        try {
          const auto stats = label_and_export(programs, corpus, config, dir.string());
          std::lock_guard<std::mutex> lock(runs_mu);
          auto& r = runs.at(id);
          r.stats = stats_json(stats);
          r.wall_seconds = stats.wall_seconds;
          r.status = RunStatus::Done;
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(runs_mu);
          auto& r = runs.at(id);
          r.error = e.what();
          r.status = RunStatus::Failed;
        }
      });
    }
    queue_cv.notify_one();
    return {{"run_id", rec.id}, {"status", "QUEUED"}};
  }

  void set_status(const std::string& id, RunStatus s) {
    std::lock_guard<std::mutex> lock(runs_mu);
    auto& r = runs.at(id);
    if (static_cast<int>(s) > static_cast<int>(r.status)) r.status = s;
  }

  RunRecord run(const std::string& id) {
    std::lock_guard<std::mutex> lock(runs_mu);
    auto it = runs.find(id);
    if (it == runs.end()) fail(404, "not_found", "unknown run " + id);
    return it->second;
  }

  RunRecord finished_run(const std::string& id) {
    auto r = run(id);
    if (r.status != RunStatus::Done) fail(409, "conflict", "run " + id + " is " + to_string(r.status));
    return r;
  }

  static std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(500, "io_error", "cannot read " + p.filename().string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  json splits(const std::string& id) {
    const auto r = finished_run(id);
    json out;
    out["run_id"] = id;
    for (const auto* name : {"strict", "soft", "unlabeled"}) {
      auto rows = json::array();
      std::istringstream in(slurp(r.dir / (std::string(name) + ".jsonl")));
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) rows.push_back(json::parse(line));
      }
      out[name] = std::move(rows);
    }
    out["stats"] = json::parse(r.stats);
    return out;
  }

  json instance_json(const std::string& id) const {
    const auto& inst = instance(id);
    json j;
    j["id"] = inst.id;
    j["question"] = inst.question.source();
    j["context"] = inst.context.source();
    if (inst.gold) {
      const auto c = inst.char_range(*inst.gold);
      j["gold"] = {{"char_start", c.start}, {"char_end", c.end}, {"text", inst.answer_text(*inst.gold)}};
    } else {
      j["gold"] = nullptr;
    }
    j["question_tokens"] = tokens_json(inst.question);
    j["context_tokens"] = tokens_json(inst.context);
    return j;
  }

  json teacher_json(const std::string& id) const {
    const auto prog = teacher(id);
    auto j = json::parse(bundle_json(prog));
    j["execution_trees"] = prog.execution_trees();
    return j;
  }

  // -------------------------------------------------------------------------

  using Handler = std::function<json(const httplib::Request&)>;

  static httplib::Server::Handler wrap(Handler h, int ok_status = 200) {
    return [h = std::move(h), ok_status](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto body = h(req);
        res.status = ok_status;
        res.set_content(body.dump(), "application/json");
      } catch (const HttpError& e) {
        res.status = e.status;
        res.set_content(error_body(e).dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(error_body({500, "internal", e.what(), {}}).dump(), "application/json");
      }
    };
  }

  void routes() {
    server.Post("/parse", wrap([this](const auto& req) { return parse(parse_body(req)); }));
    server.Post("/teacher", wrap([this](const auto& req) { return build(parse_body(req)); }));
    server.Post("/match", wrap([this](const auto& req) { return match(parse_body(req)); }));
    server.Post("/label-run", wrap([this](const auto& req) { return label_run(parse_body(req)); }, 202));
    server.Get("/run/:id", wrap([this](const auto& req) { return run_json(run(req.path_params.at("id"))); }));
    server.Get("/run/:id/splits", wrap([this](const auto& req) { return splits(req.path_params.at("id")); }));
    server.Get("/run/:id/splits/:file", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto r = finished_run(req.path_params.at("id"));
        const auto& file = req.path_params.at("file");
        if (std::find(kSplitFiles.begin(), kSplitFiles.end(), file) == kSplitFiles.end()) {
          fail(404, "not_found", "unknown artifact " + file);
        }
        res.set_content(slurp(r.dir / file), file == "stats.json" ? "application/json" : "application/x-ndjson");
        res.set_header("Content-Disposition", "attachment; filename=\"" + file + "\"");
      } catch (const HttpError& e) {
        res.status = e.status;
        res.set_content(error_body(e).dump(), "application/json");
      }
    });
    server.Get("/instances/:id", wrap([this](const auto& req) { return instance_json(req.path_params.at("id")); }));
    server.Get("/teachers/:id", wrap([this](const auto& req) { return teacher_json(req.path_params.at("id")); }));
    server.Get("/lexicon", wrap([this](const auto&) { return json{{"entries", lexicon_doc}}; }));
    server.Get("/health", wrap([this](const auto&) {
      std::shared_lock<std::shared_mutex> lock(teachers_mu);
      return json{{"status", "ok"}, {"instances", corpus.size()}, {"teachers", teachers.size()}};
    }));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      res.set_content(error_body({res.status, res.status == 404 ? "not_found" : "error", "no such endpoint", {}}).dump(),
                      "application/json");
    });
  }
};

Service::Service(const ServiceOptions& options) : impl_(std::make_unique<Impl>(options)) {}
Service::~Service() = default;

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }
int Service::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }
void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }
void Service::stop() { impl_->server.stop(); }

}  // namespace nmt
