#include "lodweaver/fetcher.hpp"

#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lodweaver/hash.hpp"

namespace lodweaver {

UrlParts split_url(std::string_view url) {
  auto scheme_end = url.find("://");
  std::size_t authority_start = scheme_end == std::string_view::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', authority_start);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

FetchOutcome HttpFetcher::fetch(const SparqlRequest& request) {
  auto [origin, path] = split_url(request.endpoint);
  httplib::Client client(origin);
  auto secs = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout);
  client.set_connection_timeout(secs);
  client.set_read_timeout(secs);
  client.set_write_timeout(secs);
  client.set_follow_location(true);

  httplib::Headers headers{{"Accept", "application/sparql-results+json"}};
  if (request.bearer_token) headers.emplace("Authorization", "Bearer " + *request.bearer_token);

  httplib::Params params{{"query", request.query}};
  httplib::Result res = request.query.size() > kMaxGetQueryBytes
                            ? client.Post(path, headers, params)
                            : client.Get(path, params, headers);

  FetchOutcome out;
  if (!res) {
    auto err = res.error();
    out.timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
    out.error = httplib::to_string(err);
    return out;
  }
  out.status = res->status;
  out.body = std::move(res->body);
  return out;
}

CachingFetcher::CachingFetcher(ResultsFetcher& inner, std::filesystem::path dir)
    : inner_(inner), dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

FetchOutcome CachingFetcher::fetch(const SparqlRequest& request) {
  auto key = sha256_hex(request.endpoint + "\n" + request.query);
  auto path = dir_ / (key + ".json");
  if (std::ifstream in(path, std::ios::binary); in) {
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      auto j = nlohmann::json::parse(buf.str());
      if (j.value("endpoint", "") == request.endpoint && j.value("query", "") == request.query) {
        return FetchOutcome{j.at("status").get<int>(), j.at("body").get<std::string>(), false, {}};
      }
    } catch (const nlohmann::json::exception&) {
      // Corrupt cache entry: refetch and overwrite.
    }
  }
  FetchOutcome out = inner_.fetch(request);
  if (out.ok()) {
    nlohmann::json j{{"endpoint", request.endpoint}, {"query", request.query}, {"status", out.status}, {"body", out.body}};
    std::lock_guard lock(write_mu_);
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
      o << j.dump();
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
  }
  return out;
}

PoliteFetcher::PoliteFetcher(ResultsFetcher& inner, int per_endpoint)
    : inner_(inner), per_endpoint_(per_endpoint < 1 ? 1 : per_endpoint) {}

FetchOutcome PoliteFetcher::fetch(const SparqlRequest& request) {
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_[request.endpoint] < per_endpoint_; });
    ++in_flight_[request.endpoint];
  }
  struct Release {
    PoliteFetcher& self;
    const std::string& endpoint;
    ~Release() {
      {
        std::lock_guard lock(self.mu_);
        --self.in_flight_[endpoint];
      }
      self.cv_.notify_all();
    }
  } release{*this, request.endpoint};
  return inner_.fetch(request);
}

}  // namespace lodweaver
