#include "lodweaver/api.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "lodweaver/error.hpp"
#include "lodweaver/text.hpp"

namespace lodweaver {

using nlohmann::json;

namespace {

json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::string hex_suffix(const Iri& minted) {
  const auto& s = minted.str();
  return s.size() >= 16 ? s.substr(s.size() - 16) : s;
}

bool is_hex16(std::string_view id) {
  return id.size() == 16 &&
         std::all_of(id.begin(), id.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

std::optional<long long> parse_int(std::string_view text) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

const MergedEntity& require_entity(const ServerState& s, const std::string& id) {
  const MergedEntity* e = is_hex16(id) ? s.store.find_by_id(id) : nullptr;
  if (!e) throw ApiError{404, "unknown_entity", "no entity with id '" + id + "'"};
  return *e;
}

ApiResponse error_response(const ApiError& e, const ServerState* s) {
  json body{{"code", e.code}, {"message", e.message}};
  if (s) body["generation"] = s->generation;
  return {e.status, std::move(body), {}};
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    auto j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    if (j > i) parts.emplace_back(path.substr(i, j - i));
    i = j + 1;
  }
  return parts;
}

}  // namespace

std::shared_ptr<const ServerState> make_server_state(PortalConfig cfg, ReconciledStore store, IndexMap indexes,
                                                     std::uint64_t generation) {
  auto rebuilt = build_indexes(store, cfg, generation);
  // An index directory built without the config has no files for empty categories.
  for (auto& [cat, index] : rebuilt) {
    if (!indexes.count(cat) && index.size() == 0) indexes.emplace(cat, index);
  }
  for (const auto& [cat, index] : indexes) {
    auto it = rebuilt.find(cat);
    if (it == rebuilt.end()) {
      throw Error(ErrorCode::InvalidReference, "InvalidReference(index for unknown category '" + cat + "')");
    }
    if (index.generation() != generation) {
      throw Error(ErrorCode::InvalidReference, "InvalidReference(index '" + cat + "' has generation " +
                                                   std::to_string(index.generation()) + ", expected " +
                                                   std::to_string(generation) + ")");
    }
    if (!(index == it->second)) {
      throw Error(ErrorCode::InvalidReference,
                  "InvalidReference(index '" + cat + "' was not built from this store)");
    }
  }
  if (indexes.size() != rebuilt.size()) {
    throw Error(ErrorCode::InvalidReference, "InvalidReference(index set does not cover every category)");
  }
  return std::make_shared<const ServerState>(
      ServerState{std::move(cfg), std::move(store), std::move(indexes), generation});
}

std::optional<std::string> ApiRequest::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) return std::nullopt;
  return it->second;
}

json suggestion_to_json(const Suggestion& s) {
  return {{"id", hex_suffix(s.minted)},
          {"iri", s.minted.str()},
          {"label", s.display_label},
          {"category", s.category_id},
          {"sources", s.sources},
          {"match", to_string(s.match_class)}};
}

json relation_to_json(const Relation& r) {
  return {{"predicate", r.predicate.str()},
          {"predicate_label", r.predicate_label},
          {"object", term_to_json(r.object)},
          {"object_label", r.object_label},
          {"object_id", r.object_entity ? json(hex_suffix(*r.object_entity)) : json(nullptr)},
          {"object_iri", r.object_entity ? json(r.object_entity->str()) : json(nullptr)},
          {"object_category", opt(r.object_category)},
          {"source", r.source},
          {"direction", to_string(r.direction)},
          {"transitive", r.transitive},
          {"via", r.via ? json(r.via->str()) : json(nullptr)}};
}

json insight_to_json(const InsightCard& card) {
  json blocks = json::array();
  for (const auto& b : card.blocks) {
    json items = json::array();
    for (const auto& t : b.texts) items.push_back({{"text", t}});
    for (const auto& m : b.media) items.push_back({{"url", m.url}, {"label", opt(m.label)}, {"media_type", m.media_type}});
    for (const auto& l : b.links) items.push_back({{"label", l.label}, {"url", l.url}});
    for (const auto& r : b.relations) items.push_back(relation_to_json(r));
    blocks.push_back({{"kind", to_string(b.kind)},
                      {"title", b.title},
                      {"description", opt(b.description)},
                      {"size", to_string(b.size)},
                      {"items", std::move(items)},
                      {"error", opt(b.error_note)}});
  }
  return {{"id", hex_suffix(card.entity)}, {"iri", card.entity.str()}, {"title", card.title}, {"blocks", blocks}};
}

Api::Api(FetchOptions opts, std::shared_ptr<ResultsFetcher> fetcher)
    : opts_(std::move(opts)), fetcher_(std::move(fetcher)) {}

void Api::publish(std::shared_ptr<const ServerState> state) {
  if (!state) throw Error(ErrorCode::InvalidReference, "InvalidReference(null server state)");
  std::shared_ptr<const ServerState> old;
  {
    std::lock_guard lock(state_mu_);
    if (state_ && state->generation <= state_->generation) {
      throw Error(ErrorCode::InvalidReference, "InvalidReference(generation " + std::to_string(state->generation) +
                                                   " is not newer than " + std::to_string(state_->generation) + ")");
    }
    old = std::exchange(state_, std::move(state));
  }
  // Old cache entries can never be hit again.
  if (old) {
    std::lock_guard lock(cache_mu_);
    for (auto it = cache_.begin(); it != cache_.end();) {
      if (it->first.first <= old->generation) {
        lru_.erase(it->second.lru);
        it = cache_.erase(it);
      } else {
        ++it;
      }
    }
  }
}

std::shared_ptr<const ServerState> Api::current() const {
  std::lock_guard lock(state_mu_);
  return state_;
}

std::size_t Api::relation_cache_size() const {
  std::lock_guard lock(cache_mu_);
  return cache_.size();
}

std::size_t Api::relation_expansions() const {
  std::lock_guard lock(cache_mu_);
  return expansions_;
}

void Api::add_cors(const ServerState* s, const ApiRequest& req, ApiResponse& res) const {
  if (!s || !req.origin) return;
  const auto& allowed = s->cfg.cors_origins;
  bool any = std::find(allowed.begin(), allowed.end(), "*") != allowed.end();
  if (!any && std::find(allowed.begin(), allowed.end(), *req.origin) == allowed.end()) return;
  res.headers["Access-Control-Allow-Origin"] = any ? "*" : *req.origin;
  if (!any) res.headers["Vary"] = "Origin";
  if (req.method == "OPTIONS") {
    res.headers["Access-Control-Allow-Methods"] = "GET, OPTIONS";
    res.headers["Access-Control-Allow-Headers"] = "Content-Type";
    res.headers["Access-Control-Max-Age"] = "600";
  }
}

ApiResponse Api::handle(const ApiRequest& req) const {
  const auto state = current();  // pinned for the whole request
  ApiResponse res;
  if (req.method == "OPTIONS") {
    res.status = 204;
    res.body = nullptr;
  } else if (!state) {
    res = error_response({503, "loading", "the store is still loading"}, nullptr);
  } else {
    try {
      res = route(*state, req);
    } catch (const ApiError& e) {
      res = error_response(e, state.get());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      res = error_response({500, "internal", e.what()}, state.get());
    }
  }
  add_cors(state.get(), req, res);
  return res;
}

ApiResponse Api::route(const ServerState& s, const ApiRequest& req) const {
  if (req.method != "GET" && req.method != "HEAD") {
    throw ApiError{404, "not_found", "no route for " + req.method + " " + req.path};
  }
  const auto parts = split_path(req.path);
  auto ok = [&](json body) {
    body["generation"] = s.generation;
    return ApiResponse{200, std::move(body), {}};
  };
  if (parts.size() == 1 && parts[0] == "health") return ok(health(s));
  if (parts.size() >= 2 && parts[0] == "api") {
    if (parts.size() == 2 && parts[1] == "meta") return ok(meta(s));
    if (parts.size() == 2 && parts[1] == "suggest") return ok(suggest(s, req));
    if (parts[1] == "entity" && parts.size() == 3) return ok(entity(s, parts[2]));
    if (parts[1] == "entity" && parts.size() == 4 && parts[3] == "relations") return ok(relations(s, parts[2], req));
    if (parts[1] == "entity" && parts.size() == 4 && parts[3] == "insight") return ok(insight(s, parts[2]));
  }
  throw ApiError{404, "not_found", "no route for " + req.path};
}

json Api::health(const ServerState& s) const {
  return {{"status", "ok"}, {"entity_count", s.store.entities.size()}};
}

json Api::meta(const ServerState& s) const {
  json categories = json::array();
  for (const auto& c : s.cfg.categories) {
    categories.push_back({{"id", c.id}, {"label", c.label}, {"color", c.color}, {"sound_url", opt(c.sound_url)}});
  }
  json datasets = json::array();
  for (const auto& d : s.cfg.datasets) {
    datasets.push_back({{"id", d.id}, {"label", d.label}, {"metadata", d.metadata}});
  }
  json carousel = json::array();
  for (const auto& b : s.cfg.carousel) {
    carousel.push_back(
        {{"title", b.title}, {"description", b.description}, {"link", b.link}, {"image", opt(b.image)}});
  }
  json highlights = json::array();
  for (const auto& h : s.cfg.highlights) {
    json resolved = nullptr, id = nullptr, label = nullptr;
    if (auto it = s.store.member_to_minted.find(h.entity_iri); it != s.store.member_to_minted.end()) {
      resolved = it->second;
      if (const auto* e = s.store.find(it->second)) {
        id = e->id();
        label = e->display_label;
      }
    }
    highlights.push_back({{"category_id", h.category_id},
                          {"entity_iri", h.entity_iri},
                          {"caption", h.caption},
                          {"linked_to", opt(h.linked_to)},
                          {"resolved", resolved},
                          {"id", id},
                          {"label", label}});
  }
  return {{"intro", {{"title", s.cfg.intro.title}, {"message", s.cfg.intro.message}}},
          {"categories", categories},
          {"datasets", datasets},
          {"carousel", carousel},
          {"highlights", highlights}};
}

json Api::suggest(const ServerState& s, const ApiRequest& req) const {
  const std::string q = req.param("q").value_or("");
  const std::string category = req.param("category").value_or("");
  long long limit = 10;
  if (auto raw = req.param("limit")) {
    auto v = parse_int(*raw);
    if (!v) throw ApiError{400, "bad_limit", "limit must be an integer, got '" + *raw + "'"};
    limit = std::clamp<long long>(*v, 1, 100);
  }
  if (!s.cfg.find_category(category)) throw ApiError{400, "unknown_category", "unknown category '" + category + "'"};
  json out = json::array();
  if (auto it = s.indexes.find(category); it != s.indexes.end()) {
    try {
      for (const auto& sug : lodweaver::suggest(it->second, q, static_cast<std::size_t>(limit))) {
        out.push_back(suggestion_to_json(sug));
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyQuery) throw;
      throw ApiError{400, "empty_query", "q is empty after normalization"};
    }
  } else if (normalize_label(q).empty()) {
    throw ApiError{400, "empty_query", "q is empty after normalization"};
  }
  return {{"query", q}, {"category", category}, {"limit", limit}, {"suggestions", out}};
}

json Api::entity(const ServerState& s, const std::string& id) const {
  const MergedEntity& e = require_entity(s, id);
  json members = json::array();
  for (const auto& m : e.members) {
    auto it = e.member_sources.find(m.str());
    members.push_back({{"iri", m.str()},
                       {"sources", it == e.member_sources.end() ? json::array() : json(it->second)}});
  }
  json attributes = json::object();
  for (const auto& [name, values] : e.attributes) {
    json arr = json::array();
    for (const auto& v : values) {
      arr.push_back({{"value", term_to_json(v.value)}, {"dataset_id", v.dataset_id}, {"member", v.member.str()}});
    }
    attributes[name] = std::move(arr);
  }
  return {{"id", e.id()},
          {"iri", e.minted.str()},
          {"label", e.display_label},
          {"labels", e.all_labels},
          {"categories", e.categories},
          {"sources", e.sources},
          {"members", members},
          {"attributes", attributes}};
}

Api::Expansion Api::cached_relations(const ServerState& s, const MergedEntity& e) const {
  const auto key = std::make_pair(s.generation, e.minted.str());
  {
    std::lock_guard lock(cache_mu_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.lru);
      return {it->second.relations, false};
    }
    ++expansions_;
  }
  std::vector<std::string> errors;
  auto list = expand_relations(e.minted, s.store, s.cfg, opts_, *fetcher_, &errors);
  std::stable_sort(list.begin(), list.end(), [](const Relation& a, const Relation& b) {
    return std::tie(a.predicate_label, a.object_label, a.source) < std::tie(b.predicate_label, b.object_label, b.source);
  });
  auto shared = std::make_shared<const std::vector<Relation>>(std::move(list));
  if (!errors.empty()) {
    for (const auto& err : errors) spdlog::warn("relations of {}: {}", e.minted.str(), err);
    return {shared, true};  // partial results are not memoized
  }
  std::lock_guard lock(cache_mu_);
  if (cache_.count(key)) return {cache_.at(key).relations, false};
  lru_.push_front(key);
  cache_.emplace(key, CacheEntry{shared, lru_.begin()});
  while (cache_.size() > kRelationCacheCapacity) {
    cache_.erase(lru_.back());
    lru_.pop_back();
  }
  return {shared, false};
}

json Api::relations(const ServerState& s, const std::string& id, const ApiRequest& req) const {
  const MergedEntity& e = require_entity(s, id);
  long long page = 0;
  if (auto raw = req.param("page")) {
    auto v = parse_int(*raw);
    if (!v || *v < 0) throw ApiError{400, "bad_page", "page must be a non-negative integer, got '" + *raw + "'"};
    page = *v;
  }
  long long page_size = kRelationPageSize;
  if (auto raw = req.param("page_size")) {
    auto v = parse_int(*raw);
    if (!v || *v < 1 || *v > static_cast<long long>(kMaxRelationPageSize)) {
      throw ApiError{400, "bad_page", "page_size must be in 1.." + std::to_string(kMaxRelationPageSize)};
    }
    page_size = *v;
  }
  RelationFilter filter{req.param("relation_type"), req.param("category"), req.param("source")};

  auto expansion = cached_relations(s, e);
  auto filtered = filter_relations(*expansion.relations, filter);
  json items = json::array();
  const auto begin = static_cast<std::size_t>(page) * static_cast<std::size_t>(page_size);
  for (std::size_t i = begin; i < filtered.size() && i < begin + page_size; ++i) {
    items.push_back(relation_to_json(filtered[i]));
  }
  return {{"id", e.id()},
          {"total", filtered.size()},
          {"page", page},
          {"page_size", page_size},
          {"partial", expansion.partial},
          {"filters",
           {{"relation_type", opt(filter.relation_type)},
            {"category", opt(filter.category)},
            {"source", opt(filter.source)}}},
          {"relations", items}};
}

json Api::insight(const ServerState& s, const std::string& id) const {
  const MergedEntity& e = require_entity(s, id);
  const InsightTemplate* tmpl = find_template(e, s.cfg);
  if (!tmpl) throw ApiError{404, "no_template", "no insight template for the categories of " + e.id()};
  auto card = assemble_insight(e.minted, *tmpl, s.store, s.cfg, opts_, *fetcher_);
  json out = insight_to_json(card);
  out["category"] = tmpl->category_id;
  json members = json::array();
  for (const auto& m : e.members) members.push_back(m.str());
  out["members"] = members;
  return out;
}

HostPort parse_host_port(std::string_view text) {
  auto colon = text.rfind(':');
  std::string host = colon == std::string_view::npos ? "" : std::string(text.substr(0, colon));
  std::string_view port_text = colon == std::string_view::npos ? text : text.substr(colon + 1);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  auto port = parse_int(port_text);
  if (!port || *port < 0 || *port > 65535) {
    throw Error(ErrorCode::ParseError, "ParseError(bad address '" + std::string(text) + "', expected host:port)");
  }
  return {host.empty() ? "127.0.0.1" : host, static_cast<int>(*port)};
}

struct ApiServer::Impl {
  std::shared_ptr<Api> api;
  httplib::Server server;
  std::thread thread;
};

ApiServer::ApiServer(std::shared_ptr<Api> api) : impl_(std::make_unique<Impl>()) {
  impl_->api = std::move(api);
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r{req.method, req.path, {}, std::nullopt};
    for (const auto& [k, v] : req.params) r.params.emplace(k, v);
    if (req.has_header("Origin")) r.origin = req.get_header_value("Origin");
    ApiResponse out = impl_->api->handle(r);
    res.status = out.status;
    for (const auto& [k, v] : out.headers) res.set_header(k, v);
    if (!out.body.is_null()) res.set_content(out.body.dump(), "application/json");
  };
  impl_->server.Get("/api/openapi.yaml", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(std::string(openapi_document()), "application/yaml");
  });
  impl_->server.Get(R"(/.*)", handler);
  impl_->server.Options(R"(/.*)", handler);
  impl_->server.Post(R"(/.*)", handler);
  impl_->server.Put(R"(/.*)", handler);
  impl_->server.Delete(R"(/.*)", handler);
  impl_->server.Patch(R"(/.*)", handler);
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) return -1;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool ApiServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

void ApiServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace lodweaver
