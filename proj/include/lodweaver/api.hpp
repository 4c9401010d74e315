#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lodweaver/config.hpp"
#include "lodweaver/fetcher.hpp"
#include "lodweaver/index.hpp"
#include "lodweaver/ingestion.hpp"
#include "lodweaver/reconciliation.hpp"
#include "lodweaver/relations.hpp"

namespace lodweaver {

// One immutable generation of everything the API serves.
struct ServerState {
  PortalConfig cfg;
  ReconciledStore store;
  IndexMap indexes;
  std::uint64_t generation = 0;
};

// Checks that `indexes` equals what build_indexes(store, cfg, generation)
// produces; throws Error(InvalidReference) otherwise.
std::shared_ptr<const ServerState> make_server_state(PortalConfig cfg, ReconciledStore store, IndexMap indexes,
                                                     std::uint64_t generation);

struct ApiRequest {
  std::string method = "GET";
  std::string path;
  std::multimap<std::string, std::string> params;
  std::optional<std::string> origin;

  std::optional<std::string> param(const std::string& name) const;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;  // null for bodiless responses (preflight)
  std::map<std::string, std::string> headers;
};

// Error payload {code, message, generation?}. status is one of 400, 404, 500, 503.
struct ApiError {
  int status;
  std::string code;
  std::string message;
};

inline constexpr std::size_t kRelationPageSize = 50;
inline constexpr std::size_t kMaxRelationPageSize = 500;
inline constexpr std::size_t kRelationCacheCapacity = 1024;

// Routes requests against the current ServerState. Each request pins the
// state it started on, so a publish() in the middle of a request is not
// observed by it.
class Api {
 public:
  Api(FetchOptions opts, std::shared_ptr<ResultsFetcher> fetcher);

  // Generations must strictly increase.
  void publish(std::shared_ptr<const ServerState> state);
  std::shared_ptr<const ServerState> current() const;

  ApiResponse handle(const ApiRequest& req) const;

  std::size_t relation_cache_size() const;
  std::size_t relation_expansions() const;  // cache misses so far

 private:
  struct CacheEntry {
    std::shared_ptr<const std::vector<Relation>> relations;
    std::list<std::pair<std::uint64_t, std::string>>::iterator lru;
  };

  ApiResponse route(const ServerState& s, const ApiRequest& req) const;
  nlohmann::json meta(const ServerState& s) const;
  nlohmann::json suggest(const ServerState& s, const ApiRequest& req) const;
  nlohmann::json entity(const ServerState& s, const std::string& id) const;
  nlohmann::json relations(const ServerState& s, const std::string& id, const ApiRequest& req) const;
  nlohmann::json insight(const ServerState& s, const std::string& id) const;
  nlohmann::json health(const ServerState& s) const;

  struct Expansion {
    std::shared_ptr<const std::vector<Relation>> relations;
    bool partial;  // some source failed; not memoized
  };
  Expansion cached_relations(const ServerState& s, const MergedEntity& e) const;
  void add_cors(const ServerState* s, const ApiRequest& req, ApiResponse& res) const;

  FetchOptions opts_;
  std::shared_ptr<ResultsFetcher> fetcher_;

  mutable std::mutex state_mu_;
  std::shared_ptr<const ServerState> state_;

  mutable std::mutex cache_mu_;
  mutable std::list<std::pair<std::uint64_t, std::string>> lru_;  // front = most recent
  mutable std::map<std::pair<std::uint64_t, std::string>, CacheEntry> cache_;
  mutable std::size_t expansions_ = 0;
};

nlohmann::json suggestion_to_json(const Suggestion& s);
nlohmann::json relation_to_json(const Relation& r);
nlohmann::json insight_to_json(const InsightCard& card);

// The OpenAPI description compiled into the binary, served at /api/openapi.yaml.
std::string_view openapi_document();

// httplib front end for an Api. Binds LODWEAVER_ADDR-style "host:port".
class ApiServer {
 public:
  explicit ApiServer(std::shared_ptr<Api> api);
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Background thread; port 0 picks a free port. Returns the port or -1.
  int start(const std::string& host, int port);
  // Blocks until stop().
  bool listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct HostPort {
  std::string host;
  int port;
};

// "host:port", ":port" or "port". Throws Error(ParseError).
HostPort parse_host_port(std::string_view text);

}  // namespace lodweaver
