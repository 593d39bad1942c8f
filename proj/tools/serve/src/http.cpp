#include "scbm/serve/http.hpp"

#include <functional>

#include <httplib.h>

namespace scbm::serve {
namespace {

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw UsageError("request body is not valid JSON");
  return j;
}

void send_error(httplib::Response& res, const std::string& kind, const std::string& message) {
  res.status = status_for(kind);
  if (kind == "busy") res.set_header("Retry-After", "1");
  res.set_content(json{{"error", {{"kind", kind}, {"message", message}}}}.dump(), "application/json");
}

using Handler = std::function<json(const httplib::Request&)>;

httplib::Server::Handler wrap(Handler fn, int ok_status = 200) {
  return [fn = std::move(fn), ok_status](const httplib::Request& req, httplib::Response& res) {
    try {
      const json out = fn(req);
      res.status = ok_status;
      res.set_content(out.dump(), "application/json");
    } catch (const Error& e) {
      send_error(res, e.kind(), e.what());
    } catch (const json::exception& e) {
      send_error(res, "usage", e.what());
    } catch (const std::exception& e) {
      send_error(res, "internal", e.what());
    }
  };
}

}  // namespace

int status_for(const std::string& kind) {
  if (kind == "not_found") return 404;
  if (kind == "conflict") return 409;
  if (kind == "usage" || kind == "config") return 400;
  if (kind == "busy") return 503;
  return 500;
}

HttpServer::HttpServer(Service& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  Service& svc = service_;
  s.Get("/health", wrap([&svc](const httplib::Request&) { return svc.health(); }));
  s.Post("/sessions", wrap([&svc](const httplib::Request& req) { return svc.create_session(parse_body(req)); }, 201));
  s.Get(R"(/sessions/([^/]+))", wrap([&svc](const httplib::Request& req) { return svc.get_session(req.matches[1]); }));
  s.Post(R"(/sessions/([^/]+)/interventions)",
         wrap([&svc](const httplib::Request& req) { return svc.apply(req.matches[1], parse_body(req)); }));
  s.Post(R"(/sessions/([^/]+)/undo)", wrap([&svc](const httplib::Request& req) { return svc.undo(req.matches[1]); }));
  s.Get(R"(/sessions/([^/]+)/suggestion)",
        wrap([&svc](const httplib::Request& req) { return svc.suggestion(req.matches[1]); }));
  s.Get("/correlation", wrap([&svc](const httplib::Request& req) {
          std::optional<std::string> id;
          if (req.has_param("session")) id = req.get_param_value("session");
          return svc.correlation(id);
        }));
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const int status = res.status;
      send_error(res, status == 404 ? "not_found" : "usage", "no such endpoint");
      res.status = status;
    }
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

}  // namespace scbm::serve
