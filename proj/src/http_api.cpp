#include "trade/http_api.hpp"

#include "httplib.h"

namespace trade::session {

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, Json{{"error", message}, {"status", status}});
}

// Maps service exceptions onto status codes.
template <class F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const NotFound& e) {
    send_error(res, 404, e.what());
  } catch (const Conflict& e) {
    send_error(res, 409, e.what());
  } catch (const ValidationError& e) {
    send_error(res, 422, e.what());
  } catch (const Json::exception& e) {
    send_error(res, 400, std::string("malformed JSON: ") + e.what());
  } catch (const DomainError& e) {
    send_error(res, 422, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  return Json::parse(req.body);
}

}  // namespace

struct ApiServer::Impl {
  SessionService& service;
  httplib::Server server;

  explicit Impl(SessionService& s) : service(s) {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Json body = parse_body(req);
        const Json& cfg = body.contains("config") ? body["config"] : body;
        send_json(res, 201, service.create(session_config_from_json(cfg)));
      });
    });
    server.Get(R"(/sessions/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, service.get(req.matches[1])); });
    });
    server.Post(R"(/sessions/([A-Za-z0-9_-]+)/respond)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Json body = parse_body(req);
        if (!body.is_object() || !body.contains("token") || !body.contains("action"))
          throw ValidationError("respond needs token and action");
        std::optional<Vec> counter;
        if (body.contains("counter") && !body["counter"].is_null()) counter = vec_from_json(body["counter"]);
        send_json(res, 200,
                  service.respond(req.matches[1], body["token"].get<std::uint64_t>(), body["action"].get<std::string>(),
                                  counter));
      });
    });
    server.Post(R"(/sessions/([A-Za-z0-9_-]+)/end)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, service.end(req.matches[1])); });
    });
    server.Get(R"(/sessions/([A-Za-z0-9_-]+)/transcript)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        res.status = 200;
        res.set_content(service.transcript(req.matches[1]), "application/x-ndjson; charset=utf-8");
      });
    });
  }
};

ApiServer::ApiServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) {}
ApiServer::~ApiServer() { stop(); }

bool ApiServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }
int ApiServer::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool ApiServer::listen_after_bind() { return impl_->server.listen_after_bind(); }
void ApiServer::wait_until_ready() const { impl_->server.wait_until_ready(); }
void ApiServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace trade::session
