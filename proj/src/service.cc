#include "alseg/service.h"

#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "alseg/errors.h"
#include "alseg/utf8.h"

namespace alseg {

using nlohmann::json;

namespace {

constexpr int kMaxBatch = 1000;

void reply(httplib::Response& res, int status, json body) {
  body["schema"] = kApiSchema;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void error(httplib::Response& res, int status, const std::string& reason) {
  reply(res, status, {{"error", reason}});
}

json task_json(const AnnotationTask& t) {
  return {{"task_id", t.task_id},
          {"sentence_id", t.sentence_id},
          {"iteration", t.iteration},
          {"text", utf8::encode(t.chars)},
          {"length", t.chars.size()},
          {"status", t.status == TaskStatus::kPending ? "pending" : "submitted"}};
}

}  // namespace

struct AnnotationServer::Impl {
  AnnotationQueue& queue;
  const RunMonitor& monitor;
  httplib::Server server;
  std::thread thread;

  Impl(AnnotationQueue& q, const RunMonitor& m) : queue(q), monitor(m) {
    // The library default adds SO_REUSEPORT, which lets a second server share
    // a busy port silently.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    server.Get("/batch", [this](const httplib::Request& req, httplib::Response& res) {
      int k = 10;
      if (req.has_param("k")) {
        try {
          std::size_t used = 0;
          const std::string v = req.get_param_value("k");
          k = std::stoi(v, &used);
          if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
          return error(res, 400, "k must be an integer");
        }
        if (k < 1 || k > kMaxBatch) {
          return error(res, 400, "k must lie in 1.." + std::to_string(kMaxBatch));
        }
      }
      json tasks = json::array();
      for (const auto& t : queue.lease_batch(k)) tasks.push_back(task_json(t));
      reply(res, 200, {{"tasks", tasks}});
    });

    server.Post("/labels", [this](const httplib::Request& req, httplib::Response& res) {
      int task_id = 0;
      std::vector<int> boundaries;
      try {
        const json body = json::parse(req.body);
        task_id = body.at("task_id").get<int>();
        boundaries = body.at("boundaries").get<std::vector<int>>();
      } catch (const json::exception& e) {
        return error(res, 400, std::string("expected {\"task_id\": int, \"boundaries\": [int]}: ") +
                                   e.what());
      }
      const SubmitResult r = queue.submit(task_id, boundaries);
      switch (r.outcome) {
        case SubmitOutcome::kAccepted: {
          const auto t = queue.task(task_id);
          return reply(res, 200, {{"task_id", task_id},
                                  {"status", "submitted"},
                                  {"tags", tags_to_string(t->tags)}});
        }
        case SubmitOutcome::kUnknownTask: return error(res, 404, r.reason);
        case SubmitOutcome::kAlreadySubmitted: return error(res, 409, r.reason);
        case SubmitOutcome::kInvalid: return error(res, 422, r.reason);
      }
    });

    server.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
      json s = monitor.status();
      const auto c = queue.counts();
      s["pending"] = c.pending;
      s["submitted"] = c.submitted;
      reply(res, 200, std::move(s));
    });

    server.Get("/curves", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"history", monitor.curves()}});
    });

    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          std::string what = "internal error";
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            what = e.what();
          } catch (...) {
          }
          spdlog::error("request failed: {}", what);
          error(res, 500, what);
        });
  }
};

AnnotationServer::AnnotationServer(AnnotationQueue& queue, const RunMonitor& monitor)
    : impl_(std::make_unique<Impl>(queue, monitor)) {}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void AnnotationServer::start() {
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void AnnotationServer::serve() { impl_->server.listen_after_bind(); }

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace alseg
