#pragma once

#include <memory>
#include <string>

#include "ministone/matchsvc/service.hpp"

namespace ministone::matchsvc {

// JSON over HTTP front end of a Service.
//
//   GET    /api/health
//   GET    /api/schema                         pool, heroes, action table, observation schema
//   GET    /api/pool[?hero=mage]               cards (with CB action ids when hero given)
//   GET    /api/agents
//   POST   /api/sessions                       create; body below; 201 + view
//   GET    /api/sessions/{id}                  censored view
//   POST   /api/sessions/{id}/act              {"action": int} -> view; 409 + legal on rejection
//   GET    /api/sessions/{id}/poll?since=v&timeout_ms=t   long poll for version > v
//   GET    /api/sessions/{id}/replay           replay text (finished sessions only)
//   DELETE /api/sessions/{id}
//   GET    /api/decks/{owner}                  list
//   POST   /api/decks/{owner}                  {"name","hero","cards"}; 409 on duplicate
//   GET    /api/decks/{owner}/{name}
//   PUT    /api/decks/{owner}/{name}           replace
//   DELETE /api/decks/{owner}/{name}
//   POST   /api/conquest                       {"games": [{"heroes": [h0, h1], "winner": 0|1|-1}]}
//
// Create body: {"agent": name, "human_hero": hero, "agent_hero": hero|"auto",
//   "human_seat": 0|1 (optional), "deck": {"owner","name"} or "cards": [...]
//   (optional), "seed": u64 (optional), "human_cheat_n", "agent_cheat_n"}.
// Errors are {"error": message} with status 400, 404, 409 or 503.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void serve();
  // bind() + serve() on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ministone::matchsvc
