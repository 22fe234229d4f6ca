#ifndef V2B_SERVICE_SERVICE_HPP
#define V2B_SERVICE_SERVICE_HPP

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "v2b/json_util.hpp"
#include "v2b/sim/config.hpp"
#include "v2b/sim/engine.hpp"

namespace httplib {
class Server;
}

namespace v2b::service {

/** \brief HTTP status plus JSON body. */
struct Response {
  int status = 200;
  Json body;
};

/** \brief Error payload: {"error": {"code", "message", "field"?}}. */
Response error_response(int status, const std::string& code, const std::string& message,
                        const std::string& field = "");

/** \brief Dotted config path named by a ConfigError message, empty when none is recognizable. */
std::string config_error_field(const std::string& message);

struct ServiceOptions {
  sim::SimConfig base;           // used when a create request carries no config
  std::uint64_t default_seed = 1;
  std::string log_dir;           // one JSON-lines file per session; empty disables logging
};

/** \brief A live day driven over the API. */
struct LiveSession {
  std::string id;
  std::unique_ptr<sim::DayEngine> engine;
  bool autopilot = false;
  std::vector<Json> events;                  // append-only
  std::map<std::string, Response> replies;   // by request id
  std::string log_path;
  std::mutex mu;                             // one writer at a time
  std::condition_variable changed;
};

/**
 * \brief Session registry and request handlers. Every handler is safe to call from several
 * threads; requests on one session are serialized.
 */
class Service {
 public:
  explicit Service(ServiceOptions opt = {});

  Response create_session(const Json& body, const std::string& request_id = "");
  Response advance(const std::string& id, const Json& body, const std::string& request_id = "");
  Response get_session(const std::string& id);
  Response get_menu(const std::string& id);
  Response submit_choice(const std::string& id, const Json& body, const std::string& request_id = "");
  Response set_alpha(const std::string& id, const Json& body, const std::string& request_id = "");
  Response metrics(const std::string& id);
  Response events(const std::string& id);

  /** \brief Step snapshots from index `from`; waits up to `wait_ms` for new ones when none are ready. */
  std::optional<std::vector<Json>> timeline(const std::string& id, std::size_t from, int wait_ms, bool* done);

  /** \brief Routes of the HTTP API on `server`. */
  void mount(httplib::Server& server);

  /** \brief Serves until the process is stopped. */
  void serve(const std::string& host, int port);

  /** \brief Rebuilds a session from its JSON-lines log and registers it under a new id. */
  Response replay_log(const std::string& path);

 private:
  std::shared_ptr<LiveSession> find(const std::string& id);
  Response create_from(const Json& body, bool log_it);
  void record(LiveSession& s, Json event);
  Json snapshot(const LiveSession& s) const;

  ServiceOptions opt_;
  std::shared_mutex map_mu_;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
  std::map<std::string, Response> create_replies_;
  std::uint64_t next_id_ = 1;
};

}  // namespace v2b::service

#endif
