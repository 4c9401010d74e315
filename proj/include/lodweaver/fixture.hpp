#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "lodweaver/fetcher.hpp"
#include "lodweaver/rdf.hpp"

namespace lodweaver {

// Whitespace runs collapsed, LIMIT/OFFSET clauses removed, trimmed.
std::string normalize_query_text(std::string_view query);

// SHA-256 of normalize_query_text.
std::string query_fingerprint(std::string_view query);

struct PageWindow {
  std::optional<std::size_t> limit;
  std::optional<std::size_t> offset;
};
PageWindow parse_page_window(std::string_view query);

// First path segment of an endpoint URL ("/wikidata-fx/sparql" ->
// "wikidata-fx"); empty for "/sparql".
std::string endpoint_name_from_path(std::string_view path);

// Canned SPARQL responses keyed by endpoint name and query fingerprint.
//
// On disk, each subdirectory of the data dir is one endpoint (served at
// /<name>/sparql); files directly in the data dir belong to the unnamed
// endpoint at /sparql. Every *.json file holds
//   {"entries": [{"query": "...", "results": <SPARQL results JSON>,
//                 "fail_first": N, "fail_status": 503}]}
// A fail_status of 0 simulates a timeout.
class FixtureRepository {
 public:
  struct Response {
    int status = 200;
    std::string body;
    bool timed_out = false;
  };

  struct RequestLogEntry {
    std::string endpoint;
    std::string query;
    int status;
  };

  FixtureRepository() = default;

  // Throws Error(IoError/ParseError/MalformedResults) on a bad data dir.
  static std::shared_ptr<FixtureRepository> load(const std::filesystem::path& data_dir);

  void add(const std::string& endpoint, std::string_view query, BindingTable table, int fail_first = 0,
           int fail_status = 503);

  // Makes every request to `endpoint` fail with `status`; times < 0 means
  // indefinitely.
  void script_endpoint(const std::string& endpoint, int status, int times = -1);

  Response respond(std::string_view endpoint, std::string_view query);

  std::vector<RequestLogEntry> request_log() const;
  std::size_t entry_count() const;

 private:
  struct Entry {
    BindingTable table;
    int fail_first = 0;
    int fail_status = 503;
    int seen = 0;
  };
  struct EndpointScript {
    int status = 503;
    int remaining = -1;
  };

  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, Entry> entries_;
  std::map<std::string, EndpointScript> scripts_;
  std::vector<RequestLogEntry> log_;
};

// In-process fetcher over a FixtureRepository; no sockets involved.
class CannedFetcher final : public ResultsFetcher {
 public:
  explicit CannedFetcher(std::shared_ptr<FixtureRepository> repo) : repo_(std::move(repo)) {}

  FetchOutcome fetch(const SparqlRequest& request) override;

  FixtureRepository& repository() { return *repo_; }

 private:
  std::shared_ptr<FixtureRepository> repo_;
};

// Mock SPARQL service over HTTP (GET ?query=, form POST, or
// application/sparql-query POST bodies).
class FixtureServer {
 public:
  explicit FixtureServer(std::shared_ptr<FixtureRepository> repo);
  ~FixtureServer();

  FixtureServer(const FixtureServer&) = delete;
  FixtureServer& operator=(const FixtureServer&) = delete;

  // Binds and serves on a background thread. port 0 picks a free port.
  int start(const std::string& host, int port);
  // Binds and serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lodweaver
