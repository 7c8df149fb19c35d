#include "ltx/annotation_server.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

namespace ltx::humeval {

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

}  // namespace

struct AnnotationServer::Impl {
  Experiment experiment;
  AnnotationStore& store;
  httplib::Server http;
  std::thread worker;

  Impl(Experiment e, AnnotationStore& s) : experiment(std::move(e)), store(s) { routes(); }

  void routes() {
    http.Get(R"(/api/lists/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto name = req.matches[1].str();
      if (name != "A" && name != "B") return send_error(res, 404, "unknown list '" + name + "'");
      send_json(res, 200, blinded_list(experiment, list_from_string(name)));
    });

    http.Post("/api/annotations", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded()) return send_error(res, 400, "body is not valid JSON");
      Annotation a;
      try {
        a = annotation_from_json(body);
      } catch (const std::exception& e) {
        return send_error(res, 400, e.what());
      }
      const auto* item = experiment.find(a.item_id);
      if (!item) return send_error(res, 404, "unknown item '" + a.item_id + "'");
      if (!experiment.evaluators.empty()) {
        auto it = experiment.evaluators.find(a.evaluator_id);
        if (it == experiment.evaluators.end()) return send_error(res, 403, "unknown evaluator '" + a.evaluator_id + "'");
        if (it->second != item->list) return send_error(res, 403, "item is not on this evaluator's list");
      }
      if (a.timestamp.empty()) a.timestamp = utc_now();
      try {
        if (store.submit(a) == AnnotationStore::Status::Duplicate) {
          return send_error(res, 409, "annotation already submitted for this item");
        }
      } catch (const std::exception& e) {
        return send_error(res, 500, e.what());
      }
      send_json(res, 201, to_json(a));
    });

    http.Get("/api/report", [this](const httplib::Request&, httplib::Response& res) {
      try {
        const auto annotations = store.snapshot();
        send_json(res, 200, to_json(aggregate(annotations, experiment.items)));
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    });

    http.Get(R"(/api/progress/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto evaluator = req.matches[1].str();
      nlohmann::ordered_json out{{"evaluator", evaluator}};
      if (experiment.evaluators.empty()) {
        out["list"] = nullptr;
        out["total"] = experiment.items.size();
      } else {
        auto it = experiment.evaluators.find(evaluator);
        if (it == experiment.evaluators.end()) return send_error(res, 404, "unknown evaluator '" + evaluator + "'");
        out["list"] = to_string(it->second);
        out["total"] = experiment.list(it->second).size();
      }
      out["done"] = store.count_for(evaluator);
      send_json(res, 200, out);
    });
  }
};

AnnotationServer::AnnotationServer(Experiment experiment, AnnotationStore& store)
    : impl_(std::make_unique<Impl>(std::move(experiment), store)) {}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind_to_any_port(const std::string& host) { return impl_->http.bind_to_any_port(host); }

bool AnnotationServer::bind(const std::string& host, int port) { return impl_->http.bind_to_port(host, port); }

bool AnnotationServer::listen_after_bind() { return impl_->http.listen_after_bind(); }

void AnnotationServer::start() {
  impl_->worker = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace ltx::humeval
