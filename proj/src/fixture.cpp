#include "lodweaver/fixture.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include <httplib.h>

#include "lodweaver/error.hpp"
#include "lodweaver/hash.hpp"

namespace lodweaver {

namespace fs = std::filesystem;

namespace {

const std::regex& window_clause() {
  static const std::regex re(R"(\b(LIMIT|OFFSET)\s+(\d+))", std::regex::icase);
  return re;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out += ' ';
    pending = false;
    out += static_cast<char>(c);
  }
  return out;
}

BindingTable slice(const BindingTable& table, const PageWindow& w) {
  BindingTable out;
  out.vars = table.vars;
  std::size_t begin = std::min(w.offset.value_or(0), table.rows.size());
  std::size_t end = w.limit ? std::min(table.rows.size(), begin + *w.limit) : table.rows.size();
  out.rows.assign(table.rows.begin() + static_cast<std::ptrdiff_t>(begin),
                  table.rows.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

void load_file(FixtureRepository& repo, const std::string& endpoint, const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "IoError(cannot read " + file.string() + ")");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, "ParseError(" + file.string() + ", " + e.what() + ")");
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
    throw Error(ErrorCode::ParseError, "ParseError(" + file.string() + ", missing entries array)");
  }
  for (const auto& e : doc["entries"]) {
    if (!e.contains("query") || !e["query"].is_string() || !e.contains("results")) {
      throw Error(ErrorCode::ParseError, "ParseError(" + file.string() + ", entry needs query and results)");
    }
    BindingTable table = parse_sparql_results(e["results"].dump());
    repo.add(endpoint, e["query"].get<std::string>(), std::move(table), e.value("fail_first", 0),
             e.value("fail_status", 503));
  }
}

}  // namespace

std::string normalize_query_text(std::string_view query) {
  std::string stripped = std::regex_replace(std::string(query), window_clause(), " ");
  return collapse_whitespace(stripped);
}

std::string query_fingerprint(std::string_view query) { return sha256_hex(normalize_query_text(query)); }

PageWindow parse_page_window(std::string_view query) {
  PageWindow w;
  std::string q(query);
  for (auto it = std::sregex_iterator(q.begin(), q.end(), window_clause()); it != std::sregex_iterator(); ++it) {
    std::string kw = (*it)[1].str();
    std::transform(kw.begin(), kw.end(), kw.begin(), [](unsigned char c) { return std::toupper(c); });
    std::size_t value = std::stoul((*it)[2].str());
    if (kw == "LIMIT") w.limit = value;
    else w.offset = value;
  }
  return w;
}

std::string endpoint_name_from_path(std::string_view path) {
  auto q = path.find('?');
  if (q != std::string_view::npos) path = path.substr(0, q);
  while (path.starts_with('/')) path.remove_prefix(1);
  auto slash = path.find('/');
  if (slash == std::string_view::npos) return {};  // "/sparql"
  return std::string(path.substr(0, slash));
}

std::shared_ptr<FixtureRepository> FixtureRepository::load(const fs::path& data_dir) {
  if (!fs::is_directory(data_dir)) {
    throw Error(ErrorCode::IoError, "IoError(fixture data dir " + data_dir.string() + " is not a directory)");
  }
  auto repo = std::make_shared<FixtureRepository>();
  std::vector<fs::directory_entry> items(fs::directory_iterator(data_dir), fs::directory_iterator{});
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.path() < b.path(); });
  for (const auto& item : items) {
    if (item.is_directory()) {
      std::vector<fs::path> files;
      for (const auto& f : fs::directory_iterator(item.path())) {
        if (f.path().extension() == ".json") files.push_back(f.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) load_file(*repo, item.path().filename().string(), f);
    } else if (item.path().extension() == ".json") {
      load_file(*repo, "", item.path());
    }
  }
  return repo;
}

void FixtureRepository::add(const std::string& endpoint, std::string_view query, BindingTable table,
                            int fail_first, int fail_status) {
  std::lock_guard lock(mu_);
  entries_[{endpoint, query_fingerprint(query)}] = Entry{std::move(table), fail_first, fail_status, 0};
}

void FixtureRepository::script_endpoint(const std::string& endpoint, int status, int times) {
  std::lock_guard lock(mu_);
  scripts_[endpoint] = EndpointScript{status, times};
}

FixtureRepository::Response FixtureRepository::respond(std::string_view endpoint, std::string_view query) {
  std::lock_guard lock(mu_);
  auto record = [&](Response r) {
    log_.push_back({std::string(endpoint), std::string(query), r.status});
    return r;
  };
  auto failure = [](int status) {
    return status == 0 ? Response{0, {}, true} : Response{status, "scripted failure", false};
  };

  if (auto s = scripts_.find(std::string(endpoint)); s != scripts_.end() && s->second.remaining != 0) {
    if (s->second.remaining > 0) --s->second.remaining;
    return record(failure(s->second.status));
  }
  auto it = entries_.find({std::string(endpoint), query_fingerprint(query)});
  if (it == entries_.end()) {
    return record(Response{400, "unknown query fingerprint; normalized query:\n" + normalize_query_text(query), false});
  }
  Entry& e = it->second;
  if (e.seen++ < e.fail_first) return record(failure(e.fail_status));
  return record(Response{200, results_to_json(slice(e.table, parse_page_window(query))).dump(), false});
}

std::vector<FixtureRepository::RequestLogEntry> FixtureRepository::request_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t FixtureRepository::entry_count() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

FetchOutcome CannedFetcher::fetch(const SparqlRequest& request) {
  auto [origin, path] = split_url(request.endpoint);
  auto r = repo_->respond(endpoint_name_from_path(path), request.query);
  FetchOutcome out;
  out.status = r.status;
  out.body = std::move(r.body);
  out.timed_out = r.timed_out;
  if (r.timed_out) out.error = "timeout";
  return out;
}

struct FixtureServer::Impl {
  std::shared_ptr<FixtureRepository> repo;
  httplib::Server server;
  std::thread thread;
};

FixtureServer::FixtureServer(std::shared_ptr<FixtureRepository> repo) : impl_(std::make_unique<Impl>()) {
  impl_->repo = std::move(repo);
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    std::string query;
    if (req.has_param("query")) {
      query = req.get_param_value("query");
    } else if (req.get_header_value("Content-Type").starts_with("application/sparql-query")) {
      query = req.body;
    } else {
      res.status = 400;
      res.set_content("missing query parameter", "text/plain");
      return;
    }
    auto r = impl_->repo->respond(endpoint_name_from_path(req.path), query);
    if (r.timed_out) {
      res.status = 504;
      res.set_content("scripted timeout", "text/plain");
      return;
    }
    res.status = r.status;
    res.set_content(r.body, r.status == 200 ? "application/sparql-results+json" : "text/plain");
  };
  impl_->server.Get(R"(/.*)", handler);
  impl_->server.Post(R"(/.*)", handler);
}

FixtureServer::~FixtureServer() { stop(); }

int FixtureServer::start(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) return -1;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool FixtureServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

void FixtureServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace lodweaver
