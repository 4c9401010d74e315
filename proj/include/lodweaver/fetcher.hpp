#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace lodweaver {

struct SparqlRequest {
  std::string endpoint;
  std::string query;
  std::chrono::duration<double> timeout{60.0};
  std::optional<std::string> bearer_token;
};

// Transport-level outcome. status == 0 means no HTTP response was
// received (connection failure or timeout).
struct FetchOutcome {
  int status = 0;
  std::string body;
  bool timed_out = false;
  std::string error;

  bool ok() const { return status >= 200 && status < 300; }
  bool transient() const { return status == 0 || status >= 500; }
};

// Boundary between the pipeline and SPARQL endpoints. Implementations
// must be safe to call from several threads at once.
class ResultsFetcher {
 public:
  virtual ~ResultsFetcher() = default;
  virtual FetchOutcome fetch(const SparqlRequest& request) = 0;
};

// SPARQL protocol over HTTP(S): GET with a `query` parameter, falling back
// to a form POST once the query exceeds kMaxGetQueryBytes.
class HttpFetcher final : public ResultsFetcher {
 public:
  static constexpr std::size_t kMaxGetQueryBytes = 2000;

  FetchOutcome fetch(const SparqlRequest& request) override;
};

// Serves successful responses from `dir` when present and stores new
// successful responses there. Keyed by SHA-256 of endpoint + query.
class CachingFetcher final : public ResultsFetcher {
 public:
  CachingFetcher(ResultsFetcher& inner, std::filesystem::path dir);

  FetchOutcome fetch(const SparqlRequest& request) override;

 private:
  ResultsFetcher& inner_;
  std::filesystem::path dir_;
  std::mutex write_mu_;
};

// Caps in-flight requests per endpoint; callers beyond the cap block.
class PoliteFetcher final : public ResultsFetcher {
 public:
  static constexpr int kDefaultPerEndpoint = 2;

  explicit PoliteFetcher(ResultsFetcher& inner, int per_endpoint = kDefaultPerEndpoint);

  FetchOutcome fetch(const SparqlRequest& request) override;

 private:
  ResultsFetcher& inner_;
  int per_endpoint_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, int> in_flight_;
};

// Splits "http://host:port/path?x" into scheme+authority and path+query.
struct UrlParts {
  std::string origin;
  std::string path;
};
UrlParts split_url(std::string_view url);

}  // namespace lodweaver
