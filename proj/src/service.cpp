#include "v2b/service/service.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include <httplib.h>

#include "v2b/sim/serialize.hpp"

namespace v2b::service {

Response error_response(int status, const std::string& code, const std::string& message, const std::string& field) {
  Json e{{"code", code}, {"message", message}};
  if (!field.empty()) e["field"] = field;
  return Response{status, Json{{"error", e}}};
}

std::string config_error_field(const std::string& message) {
  std::string m = message;
  const std::string prefix = "ConfigError: ";
  if (m.rfind(prefix, 0) == 0) m = m.substr(prefix.size());
  static const std::regex unknown(R"(^unknown key '([^']+)' in ([A-Za-z_][A-Za-z0-9_.\[\]]*))");
  std::smatch sm;
  if (std::regex_search(m, sm, unknown)) return sm[2].str() + "." + sm[1].str();
  static const std::regex path(R"(^([a-z_]+(?:\[[0-9]+\])?(?:\.[a-z_0-9]+(?:\[[0-9]+\])?)*)[: ])");
  if (std::regex_search(m, sm, path)) return sm[1].str();
  return "";
}

namespace {

const char* kind_name(sim::DayEngine::EventKind k) {
  switch (k) {
    case sim::DayEngine::EventKind::Arrival: return "arrival";
    case sim::DayEngine::EventKind::Step: return "step";
    case sim::DayEngine::EventKind::Completed: return "completed";
  }
  return "?";
}

Json menu_payload(const sim::DayEngine& e, int idx) {
  const auto& s = e.sessions().at(static_cast<std::size_t>(idx));
  Json savings = Json::array();
  const double base = s.menu && !s.menu->offers.empty() ? s.menu->offers.front().price : 0.0;
  if (s.menu)
    for (const auto& o : s.menu->offers) savings.push_back(base - o.price);
  return Json{{"session", idx},
              {"t", e.now()},
              {"request", s.request},
              {"charger_id", s.charger_id},
              {"menu", s.menu ? Json(*s.menu) : Json(nullptr)},
              {"savings", savings},
              {"satisfaction", s.satisfaction},
              {"probabilities", s.probabilities},
              {"external_cost", s.external_cost}};
}

/** Maps library errors onto HTTP statuses. */
template <class F>
Response guarded(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    return error_response(400, "ConfigError", e.what(), config_error_field(e.what()));
  } catch (const FormatError& e) {
    return error_response(400, "FormatError", e.what());
  } catch (const Json::exception& e) {
    return error_response(400, "BadRequest", e.what());
  } catch (const ConflictError& e) {
    return error_response(409, "Conflict", e.what());
  } catch (const DomainError& e) {
    return error_response(422, "DomainError", e.what());
  } catch (const Error& e) {
    return error_response(500, "InternalError", e.what());
  }
}

bool parse_mode(const Json& body, const char* key, bool fallback) {
  if (!body.contains(key)) return fallback;
  const auto m = body.at(key).get<std::string>();
  if (m == "autopilot") return true;
  if (m == "human") return false;
  throw ConfigError(std::string(key) + " must be human or autopilot");
}

}  // namespace

Service::Service(ServiceOptions opt) : opt_(std::move(opt)) {
  opt_.base.validate();
  if (!opt_.log_dir.empty()) std::filesystem::create_directories(opt_.log_dir);
}

std::shared_ptr<LiveSession> Service::find(const std::string& id) {
  std::shared_lock lock(map_mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void Service::record(LiveSession& s, Json event) {
  event["seq"] = s.events.size();
  if (!s.log_path.empty()) {
    std::ofstream out(s.log_path, std::ios::app);
    out << event.dump() << '\n';
  }
  s.events.push_back(std::move(event));
}

Json Service::snapshot(const LiveSession& s) const {
  const auto& e = *s.engine;
  Json connected = Json::array();
  for (const auto& ev : e.state().connected)
    connected.push_back(Json{{"user_id", ev.request.user_id},
                             {"charger_id", ev.charger_id},
                             {"soc", ev.soc},
                             {"e_target", ev.target()},
                             {"t_dep", ev.departure()}});
  int accepted = 0, rejects = 0;
  const int pending = e.pending() ? *e.pending() : -1;
  for (std::size_t i = 0; i < e.sessions().size(); ++i) {
    if (static_cast<int>(i) == pending) continue;
    (e.sessions()[i].accepted() ? accepted : rejects) += 1;
  }
  return Json{{"session_id", s.id},
              {"t", e.now()},
              {"steps", e.config().grid.steps},
              {"done", e.done()},
              {"mode", s.autopilot ? "autopilot" : "human"},
              {"bundle", e.bundle()},
              {"seed", e.seed()},
              {"pending", e.pending() ? Json(*e.pending()) : Json(nullptr)},
              {"p_past_max", e.state().p_past_max},
              {"connected", connected},
              {"arrivals", e.sessions().size()},
              {"accepted", accepted},
              {"rejects", rejects},
              {"config_hash", sim::config_hash(e.config())}};
}

Response Service::create_from(const Json& body_in, bool log_it) {
  const Json body = body_in.is_null() ? Json::object() : body_in;
  check_keys(body, {"config", "seed", "policy", "alpha", "mode", "request_id"}, "request");
  sim::SimConfig cfg = body.contains("config") ? sim::config_from_json(body.at("config")) : opt_.base;
  std::uint64_t seed = opt_.default_seed;
  read_opt(body, "seed", seed, "request");
  sim::PolicyBundle bundle = sim::find_bundle("consent");
  if (body.contains("policy")) {
    const auto& p = body.at("policy");
    bundle = p.is_string() ? sim::find_bundle(p.get<std::string>()) : p.get<sim::PolicyBundle>();
  }
  read_opt(body, "alpha", bundle.alpha, "request");
  bundle.validate();
  auto s = std::make_shared<LiveSession>();
  s->autopilot = parse_mode(body, "mode", false);
  s->engine = std::make_unique<sim::DayEngine>(cfg, bundle, seed);
  {
    std::unique_lock lock(map_mu_);
    s->id = "s" + std::to_string(next_id_++);
    sessions_[s->id] = s;
  }
  if (log_it && !opt_.log_dir.empty())
    s->log_path = (std::filesystem::path(opt_.log_dir) / (s->id + ".jsonl")).string();
  std::lock_guard<std::mutex> lock(s->mu);
  record(*s, Json{{"type", "create"},
                  {"request",
                   {{"config", sim::config_to_json(cfg)},
                    {"seed", seed},
                    {"policy", bundle},
                    {"mode", s->autopilot ? "autopilot" : "human"}}}});
  return Response{201, Json{{"session_id", s->id}, {"state", snapshot(*s)}}};
}

Response Service::create_session(const Json& body, const std::string& request_id) {
  if (!request_id.empty()) {
    std::shared_lock lock(map_mu_);
    auto it = create_replies_.find(request_id);
    if (it != create_replies_.end()) return it->second;
  }
  auto r = guarded([&] { return create_from(body, true); });
  if (!request_id.empty() && r.status < 500) {
    std::unique_lock lock(map_mu_);
    create_replies_.emplace(request_id, r);
  }
  return r;
}

#define V2B_WITH_SESSION(id, s)                                                         \
  auto s = find(id);                                                                    \
  if (!s) return error_response(404, "NotFound", "no session " + (id));                 \
  std::unique_lock<std::mutex> session_lock(s->mu)

#define V2B_IDEMPOTENT(s, request_id)                       \
  if (!(request_id).empty()) {                              \
    auto hit = (s)->replies.find(request_id);               \
    if (hit != (s)->replies.end()) return hit->second;      \
  }

namespace {
void remember(LiveSession& s, const std::string& request_id, const Response& r) {
  if (!request_id.empty() && r.status < 500) s.replies.emplace(request_id, r);
}
}  // namespace

Response Service::advance(const std::string& id, const Json& body_in, const std::string& request_id) {
  V2B_WITH_SESSION(id, s);
  V2B_IDEMPOTENT(s, request_id);
  auto r = guarded([&] {
    const Json body = body_in.is_null() ? Json::object() : body_in;
    check_keys(body, {"mode", "until", "request_id"}, "request");
    const bool autopilot = parse_mode(body, "mode", s->autopilot);
    std::string until = "event";
    read_opt(body, "until", until, "request");
    if (until != "event" && until != "end") throw ConfigError("until must be event or end");
    auto& e = *s->engine;
    Json out = Json::object();
    int events = 0;
    for (;;) {
      const auto ev = e.advance(autopilot);
      ++events;
      Json entry{{"type", "advance"}, {"autopilot", autopilot}, {"kind", kind_name(ev.kind)}, {"t", ev.t}};
      if (ev.session >= 0) {
        entry["session"] = ev.session;
        if (autopilot) entry["option"] = e.sessions()[static_cast<std::size_t>(ev.session)].chosen;
      }
      record(*s, entry);
      out["event"] = Json{{"kind", kind_name(ev.kind)}, {"t", ev.t}, {"session", ev.session}};
      if (ev.kind == sim::DayEngine::EventKind::Step && !e.steps().empty()) out["step"] = e.steps().back();
      if (ev.kind == sim::DayEngine::EventKind::Arrival) out["arrival"] = e.sessions()[static_cast<std::size_t>(ev.session)];
      if (e.pending()) out["menu"] = menu_payload(e, *e.pending());
      if (until == "event" || e.done() || e.pending() || ev.kind == sim::DayEngine::EventKind::Completed) break;
    }
    out["events"] = events;
    if (e.done()) out["metrics"] = e.metrics();
    out["state"] = snapshot(*s);
    return Response{200, out};
  });
  remember(*s, request_id, r);
  s->changed.notify_all();
  return r;
}

Response Service::get_session(const std::string& id) {
  V2B_WITH_SESSION(id, s);
  return Response{200, snapshot(*s)};
}

Response Service::get_menu(const std::string& id) {
  V2B_WITH_SESSION(id, s);
  const auto& e = *s->engine;
  if (!e.pending()) return error_response(404, "NoPendingMenu", "no menu is awaiting a choice");
  return Response{200, menu_payload(e, *e.pending())};
}

Response Service::submit_choice(const std::string& id, const Json& body_in, const std::string& request_id) {
  V2B_WITH_SESSION(id, s);
  V2B_IDEMPOTENT(s, request_id);
  auto r = guarded([&] {
    const Json body = body_in.is_null() ? Json::object() : body_in;
    check_keys(body, {"option", "level", "reject", "request_id"}, "request");
    auto& e = *s->engine;
    if (!e.pending()) throw ConflictError("no menu is awaiting a choice");
    const int idx = *e.pending();
    const auto& menu = *e.sessions()[static_cast<std::size_t>(idx)].menu;
    const int n = static_cast<int>(menu.offers.size());
    const int given = static_cast<int>(body.contains("option")) + static_cast<int>(body.contains("level")) +
                      static_cast<int>(body.contains("reject"));
    if (given != 1) throw DomainError("give exactly one of option, level or reject");
    int option = -1;
    if (body.contains("option")) {
      option = body.at("option").get<int>();
    } else if (body.contains("level")) {
      const int level = body.at("level").get<int>();
      for (int i = 0; i < n; ++i)
        if (menu.offers[static_cast<std::size_t>(i)].level == level) option = i;
      if (option < 0) throw DomainError("level " + std::to_string(level) + " is not on the menu");
    } else {
      if (!body.at("reject").get<bool>()) throw DomainError("reject must be true when given");
      if (!menu.has_reject) throw DomainError("this menu has no reject option");
      option = n;
    }
    e.choose(idx, option);
    const auto& rec = e.sessions()[static_cast<std::size_t>(idx)];
    record(*s, Json{{"type", "choice"}, {"session", idx}, {"option", option}});
    double best = rec.satisfaction.empty() ? 0.0 : *std::max_element(rec.satisfaction.begin(), rec.satisfaction.end());
    Json ack{{"session", idx},
             {"option", option},
             {"choice", rec.choice},
             {"accepted", rec.accepted()},
             {"price", rec.price},
             {"voluntary_participation", {{"best_y", best}, {"holds", best >= -1e-9}}}};
    if (rec.accepted())
      ack["schedule"] = Json{{"user_id", rec.request.user_id},
                             {"charger_id", rec.charger_id},
                             {"e_target", rec.choice.e_target},
                             {"t_dep", rec.choice.t_dep}};
    else
      ack["schedule"] = nullptr;
    ack["state"] = snapshot(*s);
    return Response{200, ack};
  });
  remember(*s, request_id, r);
  s->changed.notify_all();
  return r;
}

Response Service::set_alpha(const std::string& id, const Json& body_in, const std::string& request_id) {
  V2B_WITH_SESSION(id, s);
  V2B_IDEMPOTENT(s, request_id);
  auto r = guarded([&] {
    const Json body = body_in.is_null() ? Json::object() : body_in;
    check_keys(body, {"alpha", "request_id"}, "request");
    if (!body.contains("alpha")) throw DomainError("alpha is required");
    const double a = body.at("alpha").get<double>();
    s->engine->set_alpha(a);
    record(*s, Json{{"type", "alpha"}, {"alpha", a}});
    return Response{200, snapshot(*s)};
  });
  remember(*s, request_id, r);
  return r;
}

Response Service::metrics(const std::string& id) {
  V2B_WITH_SESSION(id, s);
  const auto& e = *s->engine;
  Json out{{"done", e.done()}, {"t", e.now()}};
  if (e.done()) {
    out["metrics"] = e.metrics();
  } else {
    const auto snap = snapshot(*s);
    out["partial"] = Json{{"p_past_max", e.state().p_past_max},
                          {"arrivals", snap.at("arrivals")},
                          {"accepted", snap.at("accepted")},
                          {"rejects", snap.at("rejects")}};
  }
  Json sessions = Json::array();
  for (const auto& r : e.sessions()) sessions.push_back(r);
  out["sessions"] = sessions;
  return Response{200, out};
}

Response Service::events(const std::string& id) {
  V2B_WITH_SESSION(id, s);
  return Response{200, Json{{"session_id", s->id}, {"events", s->events}}};
}

std::optional<std::vector<Json>> Service::timeline(const std::string& id, std::size_t from, int wait_ms, bool* done) {
  auto s = find(id);
  if (!s) return std::nullopt;
  std::unique_lock<std::mutex> lock(s->mu);
  auto ready = [&] { return s->engine->steps().size() > from || s->engine->done(); };
  if (!ready() && wait_ms > 0) s->changed.wait_for(lock, std::chrono::milliseconds(wait_ms), ready);
  std::vector<Json> out;
  const auto& steps = s->engine->steps();
  for (std::size_t i = from; i < steps.size(); ++i) out.push_back(steps[i]);
  if (done) *done = s->engine->done();
  return out;
}

Response Service::replay_log(const std::string& path) {
  return guarded([&]() -> Response {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open log " + path);
    std::string line;
    std::shared_ptr<LiveSession> s;
    int row = 0;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty()) continue;
      Json ev;
      try {
        ev = Json::parse(line);
      } catch (const Json::parse_error&) {
        throw FormatError("log line " + std::to_string(row) + " is not JSON");
      }
      const auto type = ev.at("type").get<std::string>();
      if (!s) {
        if (type != "create") throw FormatError("log must start with a create event");
        const auto r = create_from(ev.at("request"), false);
        s = find(r.body.at("session_id").get<std::string>());
        continue;
      }
      std::lock_guard<std::mutex> lock(s->mu);
      auto& e = *s->engine;
      if (type == "advance") {
        e.advance(ev.at("autopilot").get<bool>());
      } else if (type == "choice") {
        e.choose(ev.at("session").get<int>(), ev.at("option").get<int>());
      } else if (type == "alpha") {
        e.set_alpha(ev.at("alpha").get<double>());
      } else {
        throw FormatError("log line " + std::to_string(row) + " has unknown type " + type);
      }
      record(*s, ev);
    }
    if (!s) throw FormatError("log " + path + " is empty");
    std::lock_guard<std::mutex> lock(s->mu);
    return Response{201, Json{{"session_id", s->id}, {"state", snapshot(*s)}}};
  });
}

namespace {

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  return Json::parse(req.body);
}

std::string request_id(const httplib::Request& req, const Json& body) {
  if (req.has_header("Idempotency-Key")) return req.get_header_value("Idempotency-Key");
  if (body.is_object() && body.contains("request_id") && body.at("request_id").is_string())
    return body.at("request_id").get<std::string>();
  return "";
}

void send(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

void Service::mount(httplib::Server& svr) {
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type, Idempotency-Key"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  // Body parsing failures become 400 before any handler runs.
  auto with_body = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      Json body;
      try {
        body = parse_body(req);
      } catch (const Json::exception& e) {
        send(res, error_response(400, "BadJson", e.what()));
        return;
      }
      send(res, handler(req, body));
    };
  };
  svr.Post("/sessions", with_body([this](const httplib::Request& req, const Json& body) {
    return create_session(body, request_id(req, body));
  }));
  svr.Post(R"(/sessions/([A-Za-z0-9_-]+)/advance)", with_body([this](const httplib::Request& req, const Json& body) {
    return advance(req.matches[1], body, request_id(req, body));
  }));
  svr.Post(R"(/sessions/([A-Za-z0-9_-]+)/choice)", with_body([this](const httplib::Request& req, const Json& body) {
    return submit_choice(req.matches[1], body, request_id(req, body));
  }));
  svr.Post(R"(/sessions/([A-Za-z0-9_-]+)/alpha)", with_body([this](const httplib::Request& req, const Json& body) {
    return set_alpha(req.matches[1], body, request_id(req, body));
  }));
  svr.Get(R"(/sessions/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, get_session(req.matches[1]));
  });
  svr.Get(R"(/sessions/([A-Za-z0-9_-]+)/menu)", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, get_menu(req.matches[1]));
  });
  svr.Get(R"(/sessions/([A-Za-z0-9_-]+)/metrics)", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, metrics(req.matches[1]));
  });
  svr.Get(R"(/sessions/([A-Za-z0-9_-]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, events(req.matches[1]));
  });
  svr.Get(R"(/sessions/([A-Za-z0-9_-]+)/timeline)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!find(id)) {
      send(res, error_response(404, "NotFound", "no session " + id));
      return;
    }
    std::size_t from = 0;
    bool follow = true;
    try {
      if (req.has_param("from")) from = std::stoul(req.get_param_value("from"));
      if (req.has_param("follow")) follow = req.get_param_value("follow") != "0";
    } catch (const std::exception&) {
      send(res, error_response(400, "BadRequest", "from must be a non-negative integer"));
      return;
    }
    auto next = std::make_shared<std::size_t>(from);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, id, next, follow](std::size_t, httplib::DataSink& sink) {
      bool done = false;
      auto batch = timeline(id, *next, follow ? 1000 : 0, &done);
      if (!batch) {
        sink.done();
        return true;
      }
      for (const auto& step : *batch) {
        std::ostringstream os;
        os << "id: " << *next << "\nevent: step\ndata: " << step.dump() << "\n\n";
        const auto text = os.str();
        if (!sink.write(text.data(), text.size())) return false;
        ++*next;
      }
      if (done || !follow) {
        if (done) {
          const std::string end = "event: completed\ndata: {}\n\n";
          sink.write(end.data(), end.size());
        }
        sink.done();
      }
      return true;
    });
  });
}

void Service::serve(const std::string& host, int port) {
  httplib::Server svr;
  mount(svr);
  std::cerr << "listening on " << host << ":" << port << std::endl;
  if (!svr.listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace v2b::service
