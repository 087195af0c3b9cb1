#include "ministone/matchsvc/server.hpp"

#include <thread>

#include <httplib.h>

#include "ministone/evalharness/eval.hpp"

namespace ministone::matchsvc {

namespace {

constexpr const char* kJson = "application/json";

void send(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& msg) { send(res, status, {{"error", msg}}); }

nlohmann::json body_of(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  auto j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw BadRequest("request body must be a JSON object");
  return j;
}

Hero hero_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) throw BadRequest(std::string("missing hero field '") + key + "'");
  try {
    return hero_from_string(j[key].get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw BadRequest(e.what());
  }
}

// Wraps a handler: maps service errors and malformed JSON to status codes.
template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const RejectedAction& e) {
      nlohmann::json legal = nlohmann::json::array();
      for (ActionId a : e.legal()) legal.push_back(a.index());
      send(res, e.status(), {{"error", e.what()}, {"legal", legal}});
    } catch (const ServiceError& e) {
      send_error(res, e.status(), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, std::string("bad request: ") + e.what());
    } catch (const std::invalid_argument& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  explicit Impl(Service& s) : svc(s) {}
  Service& svc;
  httplib::Server http;
  std::thread worker;
  void routes();
};

void HttpServer::Impl::routes() {
  auto& s = svc;
  http.set_payload_max_length(1 << 20);

  http.Get("/api/health", guarded([](const httplib::Request&, httplib::Response& res) { send(res, 200, {{"ok", true}}); }));
  http.Get("/api/schema", guarded([&s](const httplib::Request&, httplib::Response& res) { send(res, 200, s.schema_json()); }));
  http.Get("/api/pool", guarded([&s](const httplib::Request& req, httplib::Response& res) {
             std::optional<Hero> hero;
             if (req.has_param("hero")) {
               try {
                 hero = hero_from_string(req.get_param_value("hero"));
               } catch (const std::invalid_argument& e) {
                 throw BadRequest(e.what());
               }
             }
             send(res, 200, s.pool_json(hero));
           }));
  http.Get("/api/agents", guarded([&s](const httplib::Request&, httplib::Response& res) {
             send(res, 200, {{"agents", s.agent_names()}});
           }));

  http.Post("/api/sessions", guarded([&s](const httplib::Request& req, httplib::Response& res) {
              const auto j = body_of(req);
              SessionOptions o;
              o.agent = j.at("agent").get<std::string>();
              o.human_hero = hero_field(j, "human_hero");
              if (j.contains("agent_hero") && j["agent_hero"] != "auto") o.agent_hero = hero_field(j, "agent_hero");
              if (j.contains("human_seat")) o.human_seat = j["human_seat"].get<int>();
              if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
              o.human_cheat_n = j.value("human_cheat_n", 0);
              o.agent_cheat_n = j.value("agent_cheat_n", 0);
              if (j.contains("deck")) {
                const auto d = s.decks().get(j["deck"].at("owner").get<std::string>(), j["deck"].at("name").get<std::string>());
                if (d.hero != o.human_hero) throw BadRequest("saved deck belongs to " + std::string(to_string(d.hero)));
                o.human_deck = d.cards;
              } else if (j.contains("cards")) {
                o.human_deck = j["cards"].get<std::vector<CardId>>();
              }
              const auto id = s.create_session(o);
              send(res, 201, s.view(id));
            }));
  http.Get(R"(/api/sessions/([0-9a-f]+))", guarded([&s](const httplib::Request& req, httplib::Response& res) {
             send(res, 200, s.view(req.matches[1]));
           }));
  http.Delete(R"(/api/sessions/([0-9a-f]+))", guarded([&s](const httplib::Request& req, httplib::Response& res) {
                s.close(req.matches[1]);
                send(res, 200, {{"closed", std::string(req.matches[1])}});
              }));
  http.Post(R"(/api/sessions/([0-9a-f]+)/act)", guarded([&s](const httplib::Request& req, httplib::Response& res) {
              const auto j = body_of(req);
              const int a = j.at("action").get<int>();
              if (a < 0 || a >= action::kTableSize) throw BadRequest("action id out of range");
              send(res, 200, s.submit_action(req.matches[1], ActionId(a)));
            }));
  http.Get(R"(/api/sessions/([0-9a-f]+)/poll)", guarded([&s](const httplib::Request& req, httplib::Response& res) {
             const auto since = req.has_param("since") ? std::stoull(req.get_param_value("since")) : 0ull;
             const auto ms = req.has_param("timeout_ms") ? std::stoll(req.get_param_value("timeout_ms")) : 25000ll;
             const auto wait = std::chrono::milliseconds(std::clamp<long long>(ms, 0, 60000));
             send(res, 200, s.poll(req.matches[1], since, wait));
           }));
  http.Get(R"(/api/sessions/([0-9a-f]+)/replay)", guarded([&s](const httplib::Request& req, httplib::Response& res) {
             res.status = 200;
             res.set_content(s.export_replay(req.matches[1]).to_text(), "text/plain");
           }));

  http.Get(R"(/api/decks/([^/]+))", guarded([&s](const httplib::Request& req, httplib::Response& res) {
             send(res, 200, {{"owner", req.matches[1]}, {"decks", s.decks().list(req.matches[1])}});
           }));
  http.Post(R"(/api/decks/([^/]+))", guarded([&s](const httplib::Request& req, httplib::Response& res) {
              auto d = body_of(req).get<SavedDeck>();
              d.owner = req.matches[1];
              d.created_ms = 0;
              send(res, 201, s.decks().save(d));
            }));
  http.Get(R"(/api/decks/([^/]+)/([^/]+))", guarded([&s](const httplib::Request& req, httplib::Response& res) {
             send(res, 200, s.decks().get(req.matches[1], req.matches[2]));
           }));
  http.Put(R"(/api/decks/([^/]+)/([^/]+))", guarded([&s](const httplib::Request& req, httplib::Response& res) {
             auto j = body_of(req);
             j["name"] = std::string(req.matches[2]);
             auto d = j.get<SavedDeck>();
             d.owner = req.matches[1];
             d.created_ms = 0;
             send(res, 200, s.decks().save(d, true));
           }));
  http.Delete(R"(/api/decks/([^/]+)/([^/]+))", guarded([&s](const httplib::Request& req, httplib::Response& res) {
                s.decks().remove(req.matches[1], req.matches[2]);
                send(res, 200, {{"deleted", std::string(req.matches[2])}});
              }));

  // Conquest bookkeeping for client-run series, with the evaluation rules.
  http.Post("/api/conquest", guarded([](const httplib::Request& req, httplib::Response& res) {
              const auto j = body_of(req);
              ConquestTracker t;
              for (const auto& g : j.at("games")) {
                const auto h = g.at("heroes");
                t.record({hero_from_string(h.at(0).get<std::string>()), hero_from_string(h.at(1).get<std::string>())},
                         g.at("winner").get<int>());
              }
              nlohmann::json avail = nlohmann::json::array();
              for (int p = 0; p < 2; ++p) {
                nlohmann::json a = nlohmann::json::array();
                for (Hero h : t.available(p)) a.push_back(to_string(h));
                avail.push_back(a);
              }
              send(res, 200, {{"wins", t.wins()}, {"winner", t.winner()}, {"available", avail}});
            }));
}

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) { impl_->routes(); }

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->http.bind_to_any_port(host);
    if (p < 0) throw std::runtime_error("cannot bind " + host);
    return p;
  }
  if (!impl_->http.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::serve() { impl_->http.listen_after_bind(); }

int HttpServer::start(const std::string& host, int port) {
  const int p = bind(host, port);
  impl_->worker = std::thread([this] { serve(); });
  impl_->http.wait_until_ready();
  return p;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace ministone::matchsvc
