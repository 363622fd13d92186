#include <atomic>

#include <fmt/format.h>

#include "httplib.h"

#include "deskmate/gateway.hpp"

namespace deskmate::gateway {

using nlohmann::json;

struct Server::Impl {
  SessionManager& manager;
  httplib::Server http;
  std::atomic<bool> stopping{false};

  explicit Impl(SessionManager& m) : manager(m) {}
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw ApiError(400, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ApiError(400, fmt::format("invalid JSON: {}", e.what()));
  }
}

template <typename T>
T field(const json& body, const char* name) {
  if (!body.contains(name)) throw ApiError(400, fmt::format("missing field '{}'", name));
  try {
    return body.at(name).get<T>();
  } catch (const json::exception&) {
    throw ApiError(400, fmt::format("field '{}' has the wrong type", name));
  }
}

// Wraps a handler so ApiError and library errors become JSON error replies.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ApiError& e) {
      reply(res, e.status(), {{"error", e.what()}});
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const Error& e) {
      reply(res, 400, {{"error", e.what()}});
    }
  };
}

std::string sse(std::optional<std::int64_t> id, const std::string& type, const json& data) {
  std::string out;
  if (id) out += fmt::format("id: {}\n", *id);
  out += fmt::format("event: {}\ndata: {}\n\n", type, data.dump());
  return out;
}

}  // namespace

Server::Server(SessionManager& manager) : impl_(std::make_unique<Impl>(manager)) {
  auto& http = impl_->http;
  auto* impl = impl_.get();
  auto& mgr = manager;

  http.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
  });
  http.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  http.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"status", "ok"}}); });

  http.Get("/v1/sessions", guarded([&mgr](const httplib::Request&, httplib::Response& res) {
             reply(res, 200, {{"sessions", mgr.ids()}});
           }));

  http.Post("/v1/sessions", guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
              auto session = mgr.create(parse_body(req));
              reply(res, 201, session->snapshot());
            }));

  http.Get(R"(/v1/sessions/([^/]+))", guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
             reply(res, 200, mgr.get(req.matches[1], true)->snapshot());
           }));

  http.Delete(R"(/v1/sessions/([^/]+))", guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
                mgr.get(req.matches[1]);
                mgr.remove(req.matches[1]);
                res.status = 204;
              }));

  http.Post(R"(/v1/sessions/([^/]+)/instruction)",
            guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
              auto session = mgr.get(req.matches[1]);
              const auto body = parse_body(req);
              const int n = session->submit(field<std::string>(body, "text"), body.value("entry_id", ""));
              reply(res, 202, {{"session", session->id()}, {"episode", n}});
            }));

  http.Post(R"(/v1/sessions/([^/]+)/persona)", guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
              auto session = mgr.get(req.matches[1]);
              const auto body = parse_body(req);
              session->persona_message(field<std::string>(body, "person"), field<std::string>(body, "content"));
              reply(res, 202, {{"session", session->id()}, {"queued", true}});
            }));

  http.Post(R"(/v1/sessions/([^/]+)/availability)",
            guarded([&mgr](const httplib::Request& req, httplib::Response& res) {
              auto session = mgr.get(req.matches[1]);
              const auto body = parse_body(req);
              session->set_availability(field<std::string>(body, "person"), field<bool>(body, "available"));
              reply(res, 200, session->snapshot());
            }));

  // Server-sent events: a snapshot, then every event after ?from=, then live
  // events until the session closes. ?follow=0 stops after the backlog.
  http.Get(R"(/v1/sessions/([^/]+)/events)", guarded([&mgr, impl](const httplib::Request& req,
                                                                  httplib::Response& res) {
             auto session = mgr.get(req.matches[1], true);
             std::int64_t from = 0;
             if (req.has_param("from")) {
               try {
                 from = std::stoll(req.get_param_value("from"));
               } catch (const std::exception&) {
                 throw ApiError(400, "'from' must be an integer");
               }
             }
             const bool follow = req.get_param_value("follow") != "0";
             auto cursor = std::make_shared<std::int64_t>(from);
             auto started = std::make_shared<bool>(false);
             res.set_header("Cache-Control", "no-cache");
             res.set_chunked_content_provider(
                 "text/event-stream", [session, cursor, started, follow, impl](std::size_t, httplib::DataSink& sink) {
                   if (!*started) {
                     *started = true;
                     const auto snap = sse(std::nullopt, "snapshot", session->snapshot());
                     return sink.write(snap.data(), snap.size());
                   }
                   const auto wait = follow ? std::chrono::milliseconds(500) : std::chrono::milliseconds(0);
                   const auto events = session->events_after(*cursor, wait);
                   for (const auto& e : events) {
                     const auto chunk = sse(e.seq, e.type, e.data);
                     if (!sink.write(chunk.data(), chunk.size())) return false;
                     *cursor = e.seq;
                   }
                   const bool drained = session->events_after(*cursor, std::chrono::milliseconds(0)).empty();
                   if (!follow || impl->stopping || (session->closed() && drained)) {
                     sink.done();
                     return true;
                   }
                   if (events.empty()) {
                     static constexpr std::string_view keepalive = ": keepalive\n\n";
                     return sink.write(keepalive.data(), keepalive.size());
                   }
                   return true;
                 });
           }));
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->http.bind_to_any_port(host);
    if (bound < 0) throw Error(fmt::format("cannot bind {}", host));
    return bound;
  }
  if (!impl_->http.bind_to_port(host, port)) throw Error(fmt::format("cannot bind {}:{}", host, port));
  return port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  impl_->stopping = true;
  impl_->http.stop();
}

}  // namespace deskmate::gateway
