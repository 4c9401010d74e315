#include <doctest.h>

#include <set>

#include "lodweaver/api.hpp"
#include "lodweaver/error.hpp"
#include "test_support.hpp"

using namespace lodweaver;
using nlohmann::json;

namespace {

const std::string kBeatles = "3e5437ca1210338e";
const std::string kBartok = "3b8b338dc1866a2f";
const std::string kRock = "ff8307507bc3b552";

struct Harness {
  lwtest::FixtureRun run = lwtest::run_fixture_pipeline();
  std::shared_ptr<CannedFetcher> fetcher = std::make_shared<CannedFetcher>(run.repo);
  Api api{lwtest::fast_options(), fetcher};

  Harness() { api.publish(make_server_state(run.cfg, run.store, run.indexes, 1)); }

  ApiResponse get(const std::string& path, std::multimap<std::string, std::string> params = {},
                  std::optional<std::string> origin = std::nullopt) const {
    return api.handle(ApiRequest{"GET", path, std::move(params), std::move(origin)});
  }
};

void check_error(const ApiResponse& res, int status, const std::string& code) {
  CHECK(res.status == status);
  CHECK(res.body.at("code") == code);
  CHECK(res.body.at("message").is_string());
}

}  // namespace

TEST_SUITE("api") {

TEST_CASE("loading state answers 503") {
  auto repo = std::make_shared<FixtureRepository>();
  Api api(lwtest::fast_options(), std::make_shared<CannedFetcher>(repo));
  auto res = api.handle(ApiRequest{"GET", "/health", {}, std::nullopt});
  check_error(res, 503, "loading");
  CHECK_FALSE(res.body.contains("generation"));
  check_error(api.handle(ApiRequest{"GET", "/api/meta", {}, std::nullopt}), 503, "loading");
}

TEST_CASE("health and meta") {
  Harness h;
  auto health = h.get("/health");
  CHECK(health.status == 200);
  CHECK(health.body == json{{"status", "ok"}, {"entity_count", 8}, {"generation", 1}});

  auto meta = h.get("/api/meta").body;
  CHECK(meta.at("generation") == 1);
  CHECK(meta.at("categories").size() == 5);
  CHECK(meta.at("categories")[0] ==
        json{{"id", "genres"}, {"label", "Genres"}, {"color", "#E4572E"}, {"sound_url", nullptr}});
  CHECK(meta.at("datasets").size() == 3);
  CHECK(meta.at("carousel").size() == 2);
  const auto& hl = meta.at("highlights");
  REQUIRE(hl.size() == 5);
  CHECK(hl[0].at("id") == kBeatles);
  CHECK(hl[0].at("label") == "The Beatles");
  CHECK(hl[0].at("linked_to") == "http://www.wikidata.org/entity/Q11399");
  CHECK(hl[1].at("id") == kRock);
  // The unresolvable highlight stays, with nulls.
  CHECK(hl[2].at("resolved").is_null());
  CHECK(hl[2].at("id").is_null());
}

TEST_CASE("suggest") {
  Harness h;
  auto res = h.get("/api/suggest", {{"q", "beat"}, {"category", "artists"}});
  REQUIRE(res.status == 200);
  CHECK(res.body.at("limit") == 10);
  REQUIRE(res.body.at("suggestions").size() == 1);
  CHECK(res.body["suggestions"][0] == json{{"id", kBeatles},
                                           {"iri", "https://w3id.org/lodweaver/fixture/entity/" + kBeatles},
                                           {"label", "The Beatles"},
                                           {"category", "artists"},
                                           {"sources", {"dbpedia-fx", "wikidata-fx"}},
                                           {"match", "label_prefix"}});

  CHECK(h.get("/api/suggest", {{"q", "l"}, {"category", "places"}, {"limit", "1"}}).body["suggestions"].size() == 1);
  CHECK(h.get("/api/suggest", {{"q", "l"}, {"category", "places"}, {"limit", "0"}}).body["limit"] == 1);
  CHECK(h.get("/api/suggest", {{"q", "l"}, {"category", "places"}, {"limit", "5000"}}).body["limit"] == 100);
  check_error(h.get("/api/suggest", {{"q", "l"}, {"category", "places"}, {"limit", "ten"}}), 400, "bad_limit");
  check_error(h.get("/api/suggest", {{"q", "  "}, {"category", "places"}}), 400, "empty_query");
  check_error(h.get("/api/suggest", {{"category", "places"}}), 400, "empty_query");
  check_error(h.get("/api/suggest", {{"q", "x"}, {"category", "planets"}}), 400, "unknown_category");
  CHECK(h.get("/api/suggest", {{"q", "x"}, {"category", "planets"}}).body.at("generation") == 1);
}

TEST_CASE("entity") {
  Harness h;
  auto res = h.get("/api/entity/" + kBeatles);
  REQUIRE(res.status == 200);
  const auto& b = res.body;
  CHECK(b.at("label") == "The Beatles");
  CHECK(b.at("labels") == json{"The Beatles", "Beatles, The"});
  CHECK(b.at("categories") == json{"artists"});
  CHECK(b.at("members") == json{{{"iri", "http://dbpedia.org/resource/The_Beatles"}, {"sources", {"dbpedia-fx"}}},
                                {{"iri", "http://www.wikidata.org/entity/Q1299"}, {"sources", {"wikidata-fx"}}}});
  CHECK(b.at("attributes").at("hometown")[0] ==
        json{{"value", {{"type", "uri"}, {"value", "http://dbpedia.org/resource/Liverpool"}}},
             {"dataset_id", "dbpedia-fx"},
             {"member", "http://dbpedia.org/resource/The_Beatles"}});

  check_error(h.get("/api/entity/0000000000000000"), 404, "unknown_entity");
  check_error(h.get("/api/entity/3E5437CA1210338E"), 404, "unknown_entity");
  check_error(h.get("/api/entity/nope"), 404, "unknown_entity");
  check_error(h.get("/api/nothing"), 404, "not_found");
  check_error(h.api.handle(ApiRequest{"POST", "/api/entity/" + kBeatles, {}, std::nullopt}), 404, "not_found");
}

TEST_CASE("relations pages concatenate to the filtered list") {
  Harness h;
  auto all = h.get("/api/entity/" + kBeatles + "/relations", {{"page_size", "500"}});
  REQUIRE(all.status == 200);
  CHECK(all.body.at("total") == 12);
  CHECK(all.body.at("partial") == false);
  const auto& full = all.body.at("relations");
  REQUIRE(full.size() == 12);
  // Sorted by (predicate_label, object_label, source).
  for (std::size_t i = 1; i < full.size(); ++i) {
    auto key = [](const json& r) {
      return std::make_tuple(r["predicate_label"].get<std::string>(), r["object_label"].get<std::string>(),
                             r["source"].get<std::string>());
    };
    CHECK_FALSE(key(full[i]) < key(full[i - 1]));
  }

  for (int size : {1, 5, 7, 12, 50}) {
    json joined = json::array();
    for (int page = 0;; ++page) {
      auto res = h.get("/api/entity/" + kBeatles + "/relations",
                       {{"page", std::to_string(page)}, {"page_size", std::to_string(size)}});
      REQUIRE(res.status == 200);
      CHECK(res.body.at("total") == 12);
      if (res.body["relations"].empty()) break;
      CHECK(res.body["relations"].size() <= static_cast<std::size_t>(size));
      for (const auto& r : res.body["relations"]) joined.push_back(r);
    }
    CHECK(joined == full);
  }
  // Expanded once; the rest came from the cache.
  CHECK(h.api.relation_expansions() == 1);
  CHECK(h.api.relation_cache_size() == 1);

  auto filtered = h.get("/api/entity/" + kBeatles + "/relations",
                        {{"category", "genres"}, {"source", "wikidata-fx"}, {"page_size", "500"}});
  REQUIRE(filtered.body.at("relations").size() == 1);
  CHECK(filtered.body["relations"][0].at("predicate") == "http://www.wikidata.org/prop/direct/P136");
  CHECK(filtered.body["relations"][0].at("object_id") == kRock);
  CHECK(filtered.body["relations"][0].at("object_category") == "genres");
  CHECK(filtered.body.at("filters") ==
        json{{"relation_type", nullptr}, {"category", "genres"}, {"source", "wikidata-fx"}});

  auto transitive = h.get("/api/entity/" + kBeatles + "/relations",
                          {{"relation_type", "http://www.wikidata.org/prop/direct/P1303"}});
  REQUIRE(transitive.body.at("relations").size() == 1);
  const auto& t = transitive.body["relations"][0];
  CHECK(t.at("transitive") == true);
  CHECK(t.at("via") == "https://w3id.org/lodweaver/fixture/entity/" + kRock);
  CHECK(t.at("object_label") == "Guitar");
  CHECK(t.at("direction") == "outgoing");

  CHECK(h.get("/api/entity/" + kBeatles + "/relations", {{"page", "99"}}).body.at("relations").empty());
  check_error(h.get("/api/entity/" + kBeatles + "/relations", {{"page", "-1"}}), 400, "bad_page");
  check_error(h.get("/api/entity/" + kBeatles + "/relations", {{"page_size", "0"}}), 400, "bad_page");
  check_error(h.get("/api/entity/" + kBeatles + "/relations", {{"page_size", "501"}}), 400, "bad_page");
  check_error(h.get("/api/entity/ffffffffffffffff/relations"), 404, "unknown_entity");
}

TEST_CASE("partial relation lists are flagged and not cached") {
  Harness h;
  h.run.repo->script_endpoint("wikidata-fx", 503, 100);
  auto res = h.get("/api/entity/" + kBeatles + "/relations");
  CHECK(res.body.at("partial") == true);
  CHECK(res.body.at("total") == 5);
  CHECK(h.api.relation_cache_size() == 0);
  h.run.repo->script_endpoint("wikidata-fx", 503, 0);
  res = h.get("/api/entity/" + kBeatles + "/relations");
  CHECK(res.body.at("partial") == false);
  CHECK(res.body.at("total") == 12);
  CHECK(h.api.relation_cache_size() == 1);
}

TEST_CASE("insight") {
  Harness h;
  auto res = h.get("/api/entity/" + kBeatles + "/insight");
  REQUIRE(res.status == 200);
  CHECK(res.body.at("title") == "The Beatles");
  CHECK(res.body.at("category") == "artists");
  REQUIRE(res.body.at("blocks").size() == 4);
  CHECK(res.body["blocks"][0] == json{{"kind", "text"},
                                      {"title", "About"},
                                      {"description", nullptr},
                                      {"size", "large"},
                                      {"items", {{{"text", "English rock band formed in Liverpool in 1960"}}}},
                                      {"error", nullptr}});
  CHECK(res.body["blocks"][1]["items"][0].at("media_type") == "image/*");
  CHECK(res.body["blocks"][2]["items"][0] ==
        json{{"label", "The Beatles (Wikipedia)"}, {"url", "https://en.wikipedia.org/wiki/The_Beatles"}});
  CHECK(res.body["blocks"][3]["items"].size() == 2);

  auto bartok = h.get("/api/entity/" + kBartok + "/insight");
  REQUIRE(bartok.status == 200);
  CHECK(bartok.body["blocks"][1]["items"].empty());
  CHECK(bartok.body["blocks"][1]["error"].is_string());

  check_error(h.get("/api/entity/" + kRock + "/insight"), 404, "no_template");
  check_error(h.get("/api/entity/0123456789abcdef/insight"), 404, "unknown_entity");
}

TEST_CASE("CORS") {
  Harness h;
  auto allowed = h.get("/api/meta", {}, std::string("http://localhost:5173"));
  CHECK(allowed.headers.at("Access-Control-Allow-Origin") == "http://localhost:5173");
  CHECK(allowed.headers.at("Vary") == "Origin");
  auto other = h.get("/api/meta", {}, std::string("http://evil.example"));
  CHECK_FALSE(other.headers.count("Access-Control-Allow-Origin"));
  CHECK_FALSE(h.get("/api/meta").headers.count("Access-Control-Allow-Origin"));
  // Errors carry the headers too, so the browser can read them.
  auto err = h.get("/api/entity/x", {}, std::string("http://localhost:5173"));
  CHECK(err.status == 404);
  CHECK(err.headers.count("Access-Control-Allow-Origin"));

  auto preflight = h.api.handle(ApiRequest{"OPTIONS", "/api/suggest", {}, std::string("http://localhost:5173")});
  CHECK(preflight.status == 204);
  CHECK(preflight.body.is_null());
  CHECK(preflight.headers.at("Access-Control-Allow-Methods") == "GET, OPTIONS");
  CHECK(preflight.headers.count("Access-Control-Max-Age"));

  auto cfg = h.run.cfg;
  cfg.cors_origins = {"*"};
  h.api.publish(make_server_state(cfg, h.run.store, build_indexes(h.run.store, cfg, 2), 2));
  auto star = h.get("/api/meta", {}, std::string("http://anything.example"));
  CHECK(star.headers.at("Access-Control-Allow-Origin") == "*");
  CHECK_FALSE(star.headers.count("Vary"));
}

TEST_CASE("publishing a new generation") {
  Harness h;
  h.get("/api/entity/" + kBeatles + "/relations");
  CHECK(h.api.relation_cache_size() == 1);
  CHECK_THROWS_AS(h.api.publish(make_server_state(h.run.cfg, h.run.store, h.run.indexes, 1)), Error);

  auto next = make_server_state(h.run.cfg, h.run.store, build_indexes(h.run.store, h.run.cfg, 2), 2);
  h.api.publish(next);
  CHECK(h.api.relation_cache_size() == 0);
  CHECK(h.get("/health").body.at("generation") == 2);
  CHECK(h.get("/api/suggest", {{"q", "rock"}, {"category", "genres"}}).body.at("generation") == 2);
  h.get("/api/entity/" + kBeatles + "/relations");
  CHECK(h.api.relation_expansions() == 2);
}

TEST_CASE("server state must match its indexes") {
  auto run = lwtest::run_fixture_pipeline();
  CHECK_THROWS_AS(make_server_state(run.cfg, run.store, run.indexes, 2), Error);  // generation differs
  auto stale = run.indexes;
  stale.erase("places");
  // A missing category is rebuilt as empty only when the store has none of it.
  CHECK_THROWS_AS(make_server_state(run.cfg, run.store, stale, 1), Error);
  auto other = run.store;
  other.entities.erase(other.entities.begin());
  CHECK_THROWS_AS(make_server_state(run.cfg, other, run.indexes, 1), Error);
}

TEST_CASE("host and port parsing") {
  auto a = parse_host_port("0.0.0.0:9000");
  CHECK(a.host == "0.0.0.0");
  CHECK(a.port == 9000);
  CHECK(parse_host_port(":81").host == "127.0.0.1");
  CHECK(parse_host_port("8081").port == 8081);
  CHECK_THROWS_AS(parse_host_port("localhost:http"), Error);
  CHECK_THROWS_AS(parse_host_port("host:70000"), Error);
}

TEST_CASE("HTTP front end") {
  Harness h;
  auto api = std::make_shared<Api>(lwtest::fast_options(), h.fetcher);
  ApiServer server(api);
  int port = server.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  auto loading = lwtest::http_get(port, "/health");
  CHECK(loading.status == 503);
  CHECK(loading.body.at("code") == "loading");
  api->publish(make_server_state(h.run.cfg, h.run.store, h.run.indexes, 1));

  auto health = lwtest::http_get(port, "/health");
  CHECK(health.status == 200);
  CHECK(health.body.at("entity_count") == 8);
  bool json_type = false;
  for (const auto& [k, v] : health.headers) {
    if (k == "Content-Type") json_type = v.rfind("application/json", 0) == 0;
  }
  CHECK(json_type);

  auto suggest = lwtest::http_get(port, "/api/suggest?q=B%C3%A9la&category=artists");
  REQUIRE(suggest.status == 200);
  CHECK(suggest.body["suggestions"][0]["id"] == kBartok);

  auto pre = lwtest::http_request(port, "OPTIONS", "/api/meta", {{"Origin", "http://localhost:5173"}});
  CHECK(pre.status == 204);
  CHECK(pre.headers.count("Access-Control-Allow-Origin"));

  auto doc = lwtest::http_get(port, "/api/openapi.yaml");
  CHECK(doc.status == 200);
  CHECK(doc.raw == std::string(openapi_document()));
  CHECK(doc.raw == lwtest::read_file(lwtest::source_dir() / "docs" / "openapi.yaml"));
  server.stop();
}

}  // TEST_SUITE
