#pragma once

#include <memory>
#include <string>

#include "sentiment/annotate.hpp"

namespace sentiment {

/// HTTP+JSON front end for a CommitteeService.
///
///   GET  /records?annotator=<id>&status=pending|all   JSON array of records
///   POST /judgments                                   201 + stored judgment
///   GET  /adjudications/<record_id>                   adjudicated label
///   GET  /export?min_votes=N                          labeled corpus as JSONL
///
/// Errors are JSON objects {"error": "..."} with status 400 (bad request),
/// 403 (annotator rejected by policy) or 404 (unknown record / no judgments).
class AnnotationServer {
 public:
  explicit AnnotationServer(CommitteeService& service);
  ~AnnotationServer();

  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called. Requires a successful bind().
  bool serve();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sentiment
