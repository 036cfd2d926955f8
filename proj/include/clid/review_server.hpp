#pragma once

#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "clid/review.hpp"

namespace clid {

inline int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::invalid_argument:
    case ErrorCode::parse: return 400;
    default: return 500;
  }
}

/// JSON-over-HTTP front end for ReviewService. Errors are returned as
/// {"code", "stage", "message"} with a matching status.
///
///   POST /analyze        {title, text, system?, score_floor?} -> 202 {job_id}
///   GET  /jobs/{id}
///   GET  /queue?min_score=&status=
///   GET  /items/{id}     item plus resolved evidence passages
///   POST /verdicts       {item_id, decision, note?}; header X-Reviewer-Id
///   GET  /export/dataset line-delimited dataset records
class ReviewServer {
 public:
  ReviewServer(ReviewService& service, const CorpusSnapshot& snapshot) : service_(service), snapshot_(snapshot) {
    routes();
  }

  ~ReviewServer() { stop(); }

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorCode::io, "serve", "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Serves on the calling thread until stop() is called elsewhere.
  void run(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw Error(ErrorCode::io, "serve", "cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, const Error& e) {
    send_json(res, http_status_for(e.code()), {{"code", to_string(e.code())}, {"stage", e.stage()}, {"message", e.what()}});
  }

  template <typename F>
  static httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const nlohmann::json::exception& e) {
        send_error(res, Error(ErrorCode::invalid_argument, "http", std::string("malformed body: ") + e.what()));
      } catch (const std::exception& e) {
        send_error(res, Error(ErrorCode::pipeline, "http", e.what()));
      }
    };
  }

  static nlohmann::json parse_body(const httplib::Request& req) {
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::invalid_argument, "http", std::string("body is not JSON: ") + e.what());
    }
  }

  nlohmann::json item_detail(const ReviewItem& item) const {
    auto j = to_json(item);
    auto passages = nlohmann::json::array();
    for (const auto& e : item.result.evidence) {
      nlohmann::json p = to_json(e);
      if (const auto* b = snapshot_.find(e.block_id)) {
        p["title"] = b->full_title();
        p["text"] = b->text;
      }
      passages.push_back(p);
    }
    j["evidence_passages"] = passages;
    return j;
  }

  void routes() {
    server_.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_header("Access-Control-Allow-Headers", "Content-Type, X-Reviewer-Id");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.status = 204;
    });

    server_.Post("/analyze", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      AnalysisRequest ar;
      ar.title = body.at("title").get<std::string>();
      ar.text = body.at("text").get<std::string>();
      if (body.contains("system")) {
        auto sys = parse_system(body["system"].get<std::string>());
        if (!sys) throw Error(ErrorCode::invalid_argument, "analyze", "system must be agent, rv or nli");
        ar.system = *sys;
      }
      if (body.contains("score_floor")) ar.score_floor = body["score_floor"].get<double>();
      send_json(res, 202, {{"job_id", service_.analyze_page(ar)}});
    }));

    server_.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto job = service_.job(req.matches[1].str());
      if (!job) throw Error(ErrorCode::not_found, "jobs", "unknown job " + req.matches[1].str());
      send_json(res, 200, to_json(*job));
    }));

    server_.Get("/queue", guarded([this](const httplib::Request& req, httplib::Response& res) {
      double min_score = 0.0;
      if (req.has_param("min_score")) {
        try {
          min_score = std::stod(req.get_param_value("min_score"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::invalid_argument, "queue", "min_score must be a number");
        }
      }
      std::optional<ItemStatus> status;
      if (req.has_param("status") && !req.get_param_value("status").empty()) {
        status = parse_item_status(req.get_param_value("status"));
        if (!status) throw Error(ErrorCode::invalid_argument, "queue", "status must be pending, accepted or rejected");
      }
      auto items = nlohmann::json::array();
      for (const auto& item : service_.store().queue(min_score, status)) items.push_back(queue_entry_json(item));
      send_json(res, 200, {{"items", items}});
    }));

    server_.Get(R"(/items/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto item = service_.store().get(req.matches[1].str());
      if (!item) throw Error(ErrorCode::not_found, "items", "unknown item " + req.matches[1].str());
      send_json(res, 200, item_detail(*item));
    }));

    server_.Post("/verdicts", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto reviewer = req.get_header_value("X-Reviewer-Id");
      if (reviewer.empty()) throw Error(ErrorCode::invalid_argument, "verdicts", "X-Reviewer-Id header is required");
      const auto body = parse_body(req);
      HumanVerdict v;
      v.item_id = body.at("item_id").get<std::string>();
      const auto d = parse_decision(body.at("decision").get<std::string>());
      if (!d) throw Error(ErrorCode::invalid_argument, "verdicts", "decision must be accept or reject");
      v.decision = *d;
      if (body.contains("note") && !body["note"].is_null()) v.note = body["note"].get<std::string>();
      v.reviewer_id = reviewer;
      send_json(res, 200, item_detail(service_.submit_verdict(v)));
    }));

    server_.Get("/export/dataset", guarded([this](const httplib::Request&, httplib::Response& res) {
      std::ostringstream out;
      write_dataset(service_.store().export_dataset(), out);
      res.status = 200;
      res.set_content(out.str(), "application/x-ndjson");
    }));
  }

  ReviewService& service_;
  const CorpusSnapshot& snapshot_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace clid
