#include "sentiment/annotate_server.hpp"

#include <httplib.h>
#include <json.hpp>

#include "sentiment/corpus.hpp"

namespace sentiment {

using nlohmann::json;

struct AnnotationServer::Impl {
  CommitteeService& service;
  httplib::Server server;

  explicit Impl(CommitteeService& s) : service(s) {}
};

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

}  // namespace

AnnotationServer::AnnotationServer(CommitteeService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& server = impl_->server;
  auto& svc = impl_->service;

  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/records", [&svc](const httplib::Request& req, httplib::Response& res) {
    const std::string status = req.has_param("status") ? req.get_param_value("status") : "pending";
    std::vector<SurveyRecord> records;
    if (status == "pending") {
      if (!req.has_param("annotator") || req.get_param_value("annotator").empty())
        return send_error(res, 400, "status=pending requires an annotator parameter");
      records = svc.pending_for(req.get_param_value("annotator"));
    } else if (status == "all") {
      records = svc.records();
    } else {
      return send_error(res, 400, "status must be pending or all");
    }
    json out = json::array();
    for (const auto& r : records) out.push_back(json::parse(record_to_json_line(r)));
    res.set_content(out.dump(), "application/json");
  });

  server.Post("/judgments", [&svc](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return send_error(res, 400, "body must be a JSON object");
    for (const char* key : {"record_id", "annotator_id", "label"})
      if (!body.contains(key) || !body[key].is_string())
        return send_error(res, 400, std::string("missing string field \"") + key + "\"");
    auto label = parse_label(body["label"].get<std::string>());
    if (!label) return send_error(res, 400, "label must be \"positive\" or \"negative\"");

    Judgment j;
    j.record_id = body["record_id"].get<std::string>();
    j.annotator_id = body["annotator_id"].get<std::string>();
    j.label = *label;
    try {
      const Judgment stored = svc.submit(j);
      res.status = 201;
      res.set_content(judgment_to_json(stored), "application/json");
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const UnknownAnnotatorError& e) {
      send_error(res, 403, e.what());
    } catch (const std::invalid_argument& e) {
      send_error(res, 400, e.what());
    }
  });

  server.Get(R"(/adjudications/(.+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    try {
      res.set_content(adjudication_to_json(svc.adjudicate(req.matches[1].str())), "application/json");
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    }
  });

  server.Get("/export", [&svc](const httplib::Request& req, httplib::Response& res) {
    std::size_t min_votes = 1;
    if (req.has_param("min_votes")) {
      const auto& text = req.get_param_value("min_votes");
      try {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used != text.size() || v < 0) throw std::invalid_argument(text);
        min_votes = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        return send_error(res, 400, "min_votes must be a nonnegative integer");
      }
    }
    std::string body;
    for (const auto& r : svc.export_labeled(min_votes)) body += record_to_json_line(r) + "\n";
    res.set_content(body, "application/x-ndjson");
  });
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool AnnotationServer::serve() { return impl_->server.listen_after_bind(); }

void AnnotationServer::stop() {
  if (impl_) impl_->server.stop();
}

void AnnotationServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace sentiment
