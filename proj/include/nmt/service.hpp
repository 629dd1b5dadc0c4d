#pragma once

// HTTP facade over parsing, teacher building, match preview and label runs.
// Corpus and lexicon are immutable after start-up; teachers and runs live in
// guarded registries, and label runs execute on a background worker.

#include <memory>
#include <string>

namespace nmt {

struct ServiceOptions {
  std::string corpus_path;
  std::string lexicon_path;
  std::string data_dir;  // teachers.jsonl and runs/<run_id>/
  int workers = 1;       // label-run worker threads; 0 leaves runs QUEUED
  int label_threads = 0;  // threads inside one label run; 0 = hardware
};

class Service {
 public:
  /// Loads corpus, lexicon and any persisted teachers; throws on bad inputs.
  explicit Service(const ServiceOptions& options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves until stop(). Returns false if the port is taken.
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace nmt
