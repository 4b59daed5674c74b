#pragma once

#include <memory>
#include <string>

#include "alseg/al_loop.h"
#include "alseg/annotation_queue.h"

namespace alseg {

// Every response body is a JSON object carrying this schema tag.
inline constexpr const char* kApiSchema = "alseg.annotation.v1";

// HTTP front of an AnnotationQueue:
//   GET  /batch?k=N   lease up to N pending tasks
//   POST /labels      {"task_id": int, "boundaries": [int, ...]}
//   GET  /status      run snapshot plus queue counts
//   GET  /curves      per-iteration metric history
class AnnotationServer {
 public:
  AnnotationServer(AnnotationQueue& queue, const RunMonitor& monitor);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws on failure.
  int bind(const std::string& host, int port);
  // Serves on a background thread until stop().
  void start();
  // Serves on the calling thread until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace alseg
