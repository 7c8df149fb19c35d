// HTTP service for the blinded annotation study.
//
//   GET  /api/lists/{A|B}          blinded item array for one list
//   POST /api/annotations          one Annotation; 201, 409 duplicate, 400 malformed,
//                                  404 unknown item, 403 evaluator not on the item's list
//   GET  /api/report               ErrorReport JSON over the stored annotations
//   GET  /api/progress/{evaluator} {"evaluator", "list", "done", "total"}
#pragma once

#include <memory>
#include <string>

#include "ltx/human_eval.hpp"

namespace ltx::humeval {

class AnnotationServer {
 public:
  /// `store` must outlive the server. When the experiment has no evaluator
  /// assignment, any evaluator id may annotate any item.
  AnnotationServer(Experiment experiment, AnnotationStore& store);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Returns the bound port, or -1.
  int bind_to_any_port(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  bool listen_after_bind();
  /// Runs listen_after_bind on a background thread and waits until it accepts requests.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ltx::humeval
