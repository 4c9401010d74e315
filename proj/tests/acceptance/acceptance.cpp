// Acceptance gate. One PASS/FAIL line per criterion; exit 1 when any fails.

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lodweaver/api.hpp"
#include "lodweaver/error.hpp"
#include "lodweaver/fixture.hpp"
#include "lodweaver/relations.hpp"
#include "lodweaver/text.hpp"
#include "test_support.hpp"

using namespace lodweaver;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Pinned limits.
constexpr int kClosureInstances = 200;
constexpr std::size_t kClosureMaxNodes = 500;
constexpr std::size_t kClosureMaxEdges = 1000;
constexpr double kClosureBudgetSecs = 10.0;

constexpr std::size_t kFixtureRecords = 12;
constexpr std::size_t kFixtureMergingPairs = 4;
constexpr std::size_t kFixtureEntities = kFixtureRecords - kFixtureMergingPairs;  // 8
constexpr std::size_t kFixtureLinksetLines = kFixtureRecords;

constexpr int kRandomRelationLists = 100;
constexpr int kConcurrentRequests = 1000;
constexpr int kClientThreads = 8;
constexpr std::size_t kMinParserDocs = 20;

constexpr std::uint32_t kSeed = 20240611;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt_secs(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f s", s);
  return buf;
}

std::size_t count_lines(const std::string& text) { return std::count(text.begin(), text.end(), '\n'); }

// Fixture config copied to `dir` with the endpoint port swapped.
PortalConfig config_for_port(const fs::path& dir, int port) {
  for (auto name : kConfigFiles) {
    auto text = lwtest::read_file(lwtest::fixture_config_dir() / std::string(name));
    for (std::size_t pos; (pos = text.find("127.0.0.1:18089")) != std::string::npos;) {
      text.replace(pos, 15, "127.0.0.1:" + std::to_string(port));
    }
    lwtest::write_file(dir / std::string(name), text);
  }
  return load_portal_config(dir);
}

// ---------------------------------------------------------------------------

Outcome closure_oracle() {
  std::mt19937 rng(kSeed);
  std::vector<Iri> nodes;
  for (std::size_t i = 0; i < kClosureMaxNodes; ++i) {
    nodes.push_back(parse_iri("http://example.org/n" + std::to_string(100000 + i)));
  }
  const Iri same = parse_iri(std::string(vocab::kOwlSameAs));

  int matched = 0;
  double spent = 0.0;
  for (int t = 0; t < kClosureInstances; ++t) {
    // The first few instances sit at the size bound.
    std::size_t n = t < 10 ? kClosureMaxNodes : 1 + rng() % kClosureMaxNodes;
    std::size_t m = t < 10 ? kClosureMaxEdges : rng() % (kClosureMaxEdges + 1);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<EquivalenceStatement> stmts;
    for (std::size_t k = 0; k < m; ++k) {
      std::size_t a = rng() % n, b = rng() % n;
      edges.emplace_back(a, b);
      stmts.push_back({nodes[a], nodes[b], same, "oracle", 0});
    }
    std::span<const Iri> ents(nodes.data(), n);

    auto t0 = std::chrono::steady_clock::now();
    auto part = close_equivalences(ents, stmts);
    spent += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    auto label = lwtest::fixpoint_components(n, edges);
    std::map<std::size_t, std::set<std::string>> want_groups;
    for (std::size_t i = 0; i < n; ++i) want_groups[label[i]].insert(nodes[i].str());
    std::set<std::set<std::string>> want, got;
    for (auto& [k, g] : want_groups) want.insert(g);
    for (const auto& c : part.clusters) {
      std::set<std::string> g;
      for (const auto& mbr : c.members) g.insert(mbr.str());
      got.insert(g);
    }
    if (got == want) ++matched;
  }
  Outcome o;
  o.pass = matched == kClosureInstances && spent < kClosureBudgetSecs;
  o.detail = std::to_string(matched) + "/" + std::to_string(kClosureInstances) + " instances match, closure time " +
             fmt_secs(spent) + " (budget " + fmt_secs(kClosureBudgetSecs) + ")";
  return o;
}

// ---------------------------------------------------------------------------

struct PipelineBytes {
  std::size_t records = 0;
  std::size_t entities = 0;
  std::string linkset;
  std::string entities_ndjson;
  std::size_t oracle_components = 0;
};

PipelineBytes run_over_http(const PortalConfig& cfg, const fs::path& out) {
  HttpFetcher http;
  auto opts = lwtest::fast_options();
  auto snap = ingest(cfg, opts, http);
  auto store = reconcile(snap, cfg, opts, http);
  save_store(store, out);

  PipelineBytes b;
  b.records = snap.records.size();
  b.entities = store.entities.size();
  b.linkset = lwtest::read_file(out / "linkset.nt");
  b.entities_ndjson = lwtest::read_file(out / "entities.ndjson");

  // Independent count: components over ingested IRIs joined by the linkset
  // statements' shared subjects, via the brute-force labeller.
  std::map<std::string, std::size_t> idx;
  for (const auto& r : snap.records) idx.emplace(r.entity.str(), idx.size());
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (const auto& t : lwtest::parse_iri_ntriples(b.linkset)) {
    auto it = idx.find(t.o);
    if (it != idx.end()) by_subject[t.s].push_back(it->second);
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (auto& [s, ms] : by_subject) {
    for (std::size_t i = 1; i < ms.size(); ++i) edges.emplace_back(ms[0], ms[i]);
  }
  auto label = lwtest::fixpoint_components(idx.size(), edges);
  b.oracle_components = std::set<std::size_t>(label.begin(), label.end()).size();
  return b;
}

Outcome fixture_pipeline() {
  FixtureServer server(lwtest::fixture_repository());
  int port = server.start("127.0.0.1", 0);
  if (port <= 0) return {false, "fixture server did not start"};
  lwtest::TempDir tmp;
  auto cfg = config_for_port(tmp / "config", port);

  auto a = run_over_http(cfg, tmp / "run1");
  auto b = run_over_http(cfg, tmp / "run2");
  server.stop();

  bool identical = a.linkset == b.linkset && a.entities_ndjson == b.entities_ndjson;
  std::size_t lines = count_lines(a.linkset);
  Outcome o;
  o.pass = a.records == kFixtureRecords && a.entities == kFixtureEntities && a.oracle_components == kFixtureEntities &&
           lines == kFixtureLinksetLines && identical;
  o.detail = std::to_string(a.records) + " records, " + std::to_string(a.entities) + " entities (oracle " +
             std::to_string(a.oracle_components) + ", want " + std::to_string(kFixtureEntities) + "), " +
             std::to_string(lines) + " linkset lines (want " + std::to_string(kFixtureLinksetLines) + "), runs " +
             (identical ? "byte-identical" : "differ");
  return o;
}

// ---------------------------------------------------------------------------

std::string common_prefix(const std::string& a, const std::string& b) {
  std::size_t keep = 0;
  for (auto cut : utf8_boundaries(a)) {
    if (cut > b.size() || a.compare(0, cut, b, 0, cut) != 0) break;
    keep = cut;
  }
  return a.substr(0, keep);
}

std::set<std::string> normalized_labels_of(const IngestionSnapshot& snap, const std::string& iri) {
  std::set<std::string> out;
  for (const auto& r : snap.records) {
    if (r.entity.str() != iri) continue;
    auto n = normalize_label(r.label);
    if (!n.empty()) out.insert(n);
  }
  return out;
}

Outcome duplicate_minimization(const lwtest::FixtureRun& run) {
  CannedFetcher fetcher(run.repo);
  auto stmts = collect_equivalences(run.snapshot, run.cfg, lwtest::fast_options(), fetcher);
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& s : stmts) {
    auto l = s.left.str(), r = s.right.str();
    if (l > r) std::swap(l, r);
    if (l != r) pairs.emplace(l, r);
  }

  int checked = 0, failed = 0;
  std::string first_failure;
  for (const auto& [l, r] : pairs) {
    auto ml = run.store.member_to_minted.find(l);
    auto mr = run.store.member_to_minted.find(r);
    if (ml == run.store.member_to_minted.end() || mr == run.store.member_to_minted.end() ||
        ml->second != mr->second) {
      ++failed;
      if (first_failure.empty()) first_failure = l + " ~ " + r + " not merged";
      continue;
    }
    const auto* e = run.store.find(ml->second);
    // Longest shared prefix across the two sides' labels; the display label
    // stands in for a side with no ingested label.
    auto ll = normalized_labels_of(run.snapshot, l), rl = normalized_labels_of(run.snapshot, r);
    if (ll.empty()) ll.insert(normalize_label(e->display_label));
    if (rl.empty()) rl.insert(normalize_label(e->display_label));
    std::string prefix;
    for (const auto& x : ll) {
      for (const auto& y : rl) {
        auto p = common_prefix(x, y);
        if (p.size() > prefix.size()) prefix = p;
      }
    }
    if (normalize_label(prefix).empty()) prefix = normalize_label(e->display_label);

    for (const auto& cat : e->categories) {
      auto it = run.indexes.find(cat);
      if (it == run.indexes.end()) continue;
      ++checked;
      auto hits = suggest(it->second, prefix, it->second.size());
      auto n = std::count_if(hits.begin(), hits.end(), [&](const Suggestion& s) { return s.minted == e->minted; });
      bool member_leak = std::any_of(hits.begin(), hits.end(), [&](const Suggestion& s) {
        return s.minted.str() == l || s.minted.str() == r;
      });
      if (n != 1 || member_leak) {
        ++failed;
        if (first_failure.empty()) {
          first_failure = "'" + prefix + "' in " + cat + " gave " + std::to_string(n) + " hits for " + e->id();
        }
      }
    }
  }
  Outcome o;
  o.pass = failed == 0 && pairs.size() >= kFixtureMergingPairs && checked > 0;
  o.detail = std::to_string(pairs.size()) + " equivalence pairs, " + std::to_string(checked) + " suggest calls, " +
             std::to_string(failed) + " failures";
  if (!first_failure.empty()) o.detail += "; first: " + first_failure;
  return o;
}

// ---------------------------------------------------------------------------

Outcome index_completeness(const lwtest::FixtureRun& run) {
  std::size_t checks = 0, failures = 0;
  for (const auto& [cat, index] : run.indexes) {
    for (const auto& entry : index.entries()) {
      for (const auto& key : entry.normalized_keys()) {
        for (auto cut : utf8_boundaries(key)) {
          auto prefix = key.substr(0, cut);
          if (normalize_label(prefix).empty()) continue;
          ++checks;
          auto hits = suggest(index, prefix, index.size());
          if (std::none_of(hits.begin(), hits.end(), [&](const Suggestion& s) { return s.minted == entry.minted; })) {
            ++failures;
          }
        }
      }
    }
  }
  return {failures == 0 && checks > 0,
          std::to_string(checks) + " prefix lookups, " + std::to_string(failures) + " failures"};
}

// ---------------------------------------------------------------------------

// Returns the number of violated checks on one list.
std::size_t filter_violations(const std::vector<Relation>& rels) {
  std::size_t bad = 0;
  std::set<std::string> preds, cats, srcs;
  for (const auto& r : rels) {
    preds.insert(r.predicate.str());
    if (r.object_category) cats.insert(*r.object_category);
    srcs.insert(r.source);
  }
  auto opts_of = [](const std::set<std::string>& vals) {
    std::vector<std::optional<std::string>> v{std::nullopt, std::string("absent:value")};
    for (const auto& x : vals) v.emplace_back(x);
    return v;
  };

  // Conjunction equals the chain of single-field filters.
  for (const auto& p : opts_of(preds)) {
    for (const auto& c : opts_of(cats)) {
      for (const auto& s : opts_of(srcs)) {
        auto all = filter_relations(rels, RelationFilter{p, c, s});
        auto chain = filter_relations(rels, RelationFilter{p, std::nullopt, std::nullopt});
        chain = filter_relations(chain, RelationFilter{std::nullopt, c, std::nullopt});
        chain = filter_relations(chain, RelationFilter{std::nullopt, std::nullopt, s});
        if (all != chain) ++bad;
      }
    }
  }

  // Each single-field filter partitions the list (category also keeps the
  // relations with no category aside).
  auto partition = [&](const std::set<std::string>& vals, auto make, auto unset) {
    std::size_t total = 0;
    for (const auto& v : vals) {
      auto part = filter_relations(rels, make(v));
      for (const auto& r : part) {
        if (!make(v).matches(r)) ++bad;
      }
      total += part.size();
    }
    total += static_cast<std::size_t>(std::count_if(rels.begin(), rels.end(), unset));
    if (total != rels.size()) ++bad;
  };
  partition(preds, [](const std::string& v) { return RelationFilter{v, std::nullopt, std::nullopt}; },
            [](const Relation&) { return false; });
  partition(cats, [](const std::string& v) { return RelationFilter{std::nullopt, v, std::nullopt}; },
            [](const Relation& r) { return !r.object_category.has_value(); });
  partition(srcs, [](const std::string& v) { return RelationFilter{std::nullopt, std::nullopt, v}; },
            [](const Relation&) { return false; });

  if (filter_relations(rels, RelationFilter{}) != rels) ++bad;
  return bad;
}

std::vector<Relation> random_relations(std::mt19937& rng) {
  static const char* preds[] = {"http://ex.org/p/a", "http://ex.org/p/b", "http://ex.org/p/c", "http://ex.org/p/d"};
  static const char* cats[] = {"artists", "genres", "places"};
  static const char* srcs[] = {"wikidata-fx", "dbpedia-fx", "http://elsewhere.example/sparql"};
  std::vector<Relation> out;
  for (std::size_t i = 0, n = rng() % 40; i < n; ++i) {
    Relation r{parse_iri("http://ex.org/s"), parse_iri(preds[rng() % 4]), "p",
               parse_iri("http://ex.org/o" + std::to_string(rng() % 10))};
    if (rng() % 4) r.object_category = cats[rng() % 3];
    r.object_label = "o";
    r.source = srcs[rng() % 3];
    r.transitive = rng() % 2;
    r.direction = rng() % 3 ? Direction::Outgoing : Direction::Incoming;
    out.push_back(std::move(r));
  }
  return out;
}

Outcome filter_algebra(const lwtest::FixtureRun& run) {
  CannedFetcher fetcher(run.repo);
  std::size_t lists = 0, rows = 0, bad = 0;
  for (const auto& [minted, e] : run.store.entities) {
    auto rels = expand_relations(e.minted, run.store, run.cfg, lwtest::fast_options(), fetcher);
    rows += rels.size();
    bad += filter_violations(rels);
    ++lists;
  }
  std::size_t fixture_lists = lists;
  std::mt19937 rng(kSeed);
  for (int i = 0; i < kRandomRelationLists; ++i) {
    bad += filter_violations(random_relations(rng));
    ++lists;
  }
  return {bad == 0 && fixture_lists == kFixtureEntities && rows > 0,
          std::to_string(fixture_lists) + " fixture lists (" + std::to_string(rows) + " relations) + " +
              std::to_string(kRandomRelationLists) + " random lists, " + std::to_string(bad) + " violations"};
}

// ---------------------------------------------------------------------------

bool keys_are(const json& j, std::set<std::string> want) {
  if (!j.is_object()) return false;
  std::set<std::string> got;
  for (auto it = j.begin(); it != j.end(); ++it) got.insert(it.key());
  return got == want;
}

std::string python_command() {
  const char* env = std::getenv("LODWEAVER_PYTHON");
  return env && *env ? env : "python3";
}

Outcome api_contract(const lwtest::FixtureRun& run) {
  auto api = std::make_shared<Api>(lwtest::fast_options(), std::make_shared<CannedFetcher>(run.repo));
  api->publish(make_server_state(run.cfg, run.store, run.indexes, 1));
  ApiServer server(api);
  int port = server.start("127.0.0.1", 0);
  if (port <= 0) return {false, "api server did not start"};

  std::size_t checks = 0;
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    ++checks;
    if (!ok) failures.push_back(what);
  };
  auto error_is = [](const lwtest::HttpReply& r, int status, const std::string& code) {
    return r.status == status && keys_are(r.body, {"code", "message", "generation"}) && r.body["code"] == code;
  };

  auto health = lwtest::http_get(port, "/health");
  expect(health.status == 200 && keys_are(health.body, {"status", "generation", "entity_count"}), "health");
  auto meta = lwtest::http_get(port, "/api/meta");
  expect(meta.status == 200 &&
             keys_are(meta.body, {"generation", "intro", "categories", "datasets", "carousel", "highlights"}),
         "meta");
  auto sug = lwtest::http_get(port, "/api/suggest?q=beat&category=artists");
  expect(sug.status == 200 && keys_are(sug.body, {"generation", "query", "category", "limit", "suggestions"}) &&
             sug.body["suggestions"].size() == 1 &&
             keys_are(sug.body["suggestions"][0], {"id", "iri", "label", "category", "sources", "match"}),
         "suggest");

  for (const auto& [minted, e] : run.store.entities) {
    const auto id = e.id();
    auto ent = lwtest::http_get(port, "/api/entity/" + id);
    expect(ent.status == 200 && keys_are(ent.body, {"generation", "id", "iri", "label", "labels", "categories",
                                                    "sources", "members", "attributes"}) &&
               ent.body["id"] == id,
           "entity " + id);

    auto whole = lwtest::http_get(port, "/api/entity/" + id + "/relations?page_size=500");
    bool shape = whole.status == 200 && keys_are(whole.body, {"generation", "id", "total", "page", "page_size",
                                                              "partial", "filters", "relations"});
    expect(shape, "relations " + id);
    if (!shape) continue;
    json concat = json::array();
    for (int page = 0;; ++page) {
      auto r = lwtest::http_get(port, "/api/entity/" + id + "/relations?page_size=2&page=" + std::to_string(page));
      if (r.status != 200 || r.body["relations"].empty()) break;
      for (const auto& rel : r.body["relations"]) concat.push_back(rel);
    }
    expect(concat == whole.body["relations"] && whole.body["total"] == concat.size(), "pagination " + id);

    auto ins = lwtest::http_get(port, "/api/entity/" + id + "/insight");
    bool ins_ok = (ins.status == 200 && keys_are(ins.body, {"generation", "id", "iri", "title", "category",
                                                            "members", "blocks"})) ||
                  error_is(ins, 404, "no_template");
    expect(ins_ok, "insight " + id);
  }

  expect(error_is(lwtest::http_get(port, "/api/entity/0000000000000000"), 404, "unknown_entity"), "unknown entity");
  expect(error_is(lwtest::http_get(port, "/api/entity/0000000000000000/relations"), 404, "unknown_entity"),
         "unknown entity relations");
  expect(error_is(lwtest::http_get(port, "/api/suggest?q=&category=artists"), 400, "empty_query"), "empty query");
  expect(error_is(lwtest::http_get(port, "/api/suggest?q=%20%20&category=artists"), 400, "empty_query"),
         "blank query");
  auto doc = lwtest::http_get(port, "/api/openapi.yaml");
  expect(doc.status == 200 && doc.raw == lwtest::read_file(lwtest::source_dir() / "docs/openapi.yaml"), "openapi");
  auto pre = lwtest::http_request(port, "OPTIONS", "/api/meta",
                                  {{"Origin", run.cfg.cors_origins.empty() ? "*" : run.cfg.cors_origins.front()},
                                   {"Access-Control-Request-Method", "GET"}});
  expect(pre.status == 204 && pre.headers.count("Access-Control-Allow-Origin") == 1, "cors preflight");

  // Schema validation of every documented response, by a separate validator.
  auto cmd = python_command() + " " + (lwtest::source_dir() / "tests/contract/validate_contract.py").string() +
             " api --base http://127.0.0.1:" + std::to_string(port) + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  expect(rc == 0, "schema validator exit " + std::to_string(rc));
  server.stop();

  Outcome o;
  o.pass = failures.empty();
  o.detail = std::to_string(checks) + " checks, " + std::to_string(failures.size()) + " failures" +
             (rc == 0 ? ", schema validator clean" : "");
  if (!failures.empty()) o.detail += "; first: " + failures.front();
  return o;
}

// ---------------------------------------------------------------------------

const std::string kMark = " [even]";

// Even generations carry kMark on every display label.
std::shared_ptr<const ServerState> state_for(const lwtest::FixtureRun& run, std::uint64_t gen) {
  ReconciledStore store = run.store;
  if (gen % 2 == 0) {
    for (auto& [m, e] : store.entities) e.display_label += kMark;
  }
  auto indexes = build_indexes(store, run.cfg, gen);
  return make_server_state(run.cfg, std::move(store), std::move(indexes), gen);
}

bool ends_with_mark(const std::string& s) {
  return s.size() >= kMark.size() && s.compare(s.size() - kMark.size(), kMark.size(), kMark) == 0;
}

Outcome generation_atomicity(const lwtest::FixtureRun& run) {
  auto api = std::make_shared<Api>(lwtest::fast_options(), std::make_shared<CannedFetcher>(run.repo));
  api->publish(state_for(run, 1));
  ApiServer server(api);
  int port = server.start("127.0.0.1", 0);
  if (port <= 0) return {false, "api server did not start"};

  std::vector<std::string> ids;
  for (const auto& [m, e] : run.store.entities) ids.push_back(e.id());
  const std::vector<std::pair<std::string, std::string>> queries = {
      {"beat", "artists"}, {"b", "artists"}, {"l", "places"}, {"rock", "genres"}, {"g", "instruments"}};

  std::atomic<int> next{0}, done{0}, mixed{0}, bad_status{0};
  std::mutex seen_mu;
  std::set<std::uint64_t> seen;

  auto client = [&] {
    httplib::Client cli("127.0.0.1", port);
    cli.set_keep_alive(true);
    for (int i; (i = next.fetch_add(1)) < kConcurrentRequests;) {
      std::string path;
      bool is_suggest = i % 2 == 0;
      if (is_suggest) {
        const auto& [q, c] = queries[(i / 2) % queries.size()];
        path = "/api/suggest?q=" + q + "&category=" + c + "&limit=100";
      } else {
        path = "/api/entity/" + ids[(i / 2) % ids.size()];
      }
      auto res = cli.Get(path);
      done.fetch_add(1);
      if (!res || res->status != 200) {
        bad_status.fetch_add(1);
        continue;
      }
      auto body = json::parse(res->body, nullptr, false);
      if (body.is_discarded() || !body.contains("generation")) {
        bad_status.fetch_add(1);
        continue;
      }
      auto gen = body["generation"].get<std::uint64_t>();
      bool want = gen % 2 == 0;
      bool ok = true;
      if (is_suggest) {
        if (body["suggestions"].empty()) ok = false;
        for (const auto& s : body["suggestions"]) ok = ok && ends_with_mark(s["label"]) == want;
      } else {
        ok = ends_with_mark(body["label"]) == want;
      }
      if (!ok) mixed.fetch_add(1);
      std::lock_guard lock(seen_mu);
      seen.insert(gen);
    }
  };

  // States are prepared ahead so a swap is a pointer publish.
  std::vector<std::shared_ptr<const ServerState>> ready;
  for (std::uint64_t g = 2; g <= 400; ++g) ready.push_back(state_for(run, g));

  std::uint64_t published = 1;
  std::vector<std::thread> threads;
  for (int t = 0; t < kClientThreads; ++t) threads.emplace_back(client);
  for (const auto& st : ready) {
    if (done.load() >= kConcurrentRequests) break;
    api->publish(st);
    published = st->generation;
    std::this_thread::sleep_for(std::chrono::microseconds(500));
  }
  for (auto& th : threads) th.join();
  server.stop();

  Outcome o;
  o.pass = done.load() == kConcurrentRequests && bad_status.load() == 0 && mixed.load() == 0 && seen.size() >= 2;
  o.detail = std::to_string(done.load()) + " requests across " + std::to_string(seen.size()) +
             " generations (published up to " + std::to_string(published) + "), " + std::to_string(mixed.load()) +
             " mixed, " + std::to_string(bad_status.load()) + " non-200";
  return o;
}

// ---------------------------------------------------------------------------

// Records not from musoc-fx in the healthy run: what must survive.
std::size_t surviving_records(const lwtest::FixtureRun& run) {
  return std::count_if(run.snapshot.records.begin(), run.snapshot.records.end(),
                       [](const ExtractionRecord& r) { return r.dataset_id != "musoc-fx"; });
}

Outcome ingestion_resilience(std::size_t want_records) {
  auto cfg = load_portal_config(lwtest::fixture_config_dir());
  auto repo = lwtest::fixture_repository();
  repo->script_endpoint("musoc-fx", 503);
  CannedFetcher fetcher(repo);
  auto opts = lwtest::fast_options();

  std::size_t failed_pairs = 0, failed_musoc = 0, musoc_pairs = 0;
  try {
    auto snap = ingest(cfg, opts, fetcher);
    for (const auto& [key, st] : snap.source_stats) {
      if (key.dataset_id == "musoc-fx") ++musoc_pairs;
      if (st.error) {
        ++failed_pairs;
        if (key.dataset_id == "musoc-fx") ++failed_musoc;
      }
    }
    bool no_musoc_records = std::none_of(snap.records.begin(), snap.records.end(),
                                         [](const ExtractionRecord& r) { return r.dataset_id == "musoc-fx"; });
    auto store = reconcile(snap, cfg, opts, fetcher);
    auto indexes = build_indexes(store, cfg, 1);
    std::size_t indexed = 0;
    for (const auto& [c, idx] : indexes) indexed += idx.size();
    auto state = make_server_state(cfg, store, indexes, 1);

    Outcome o;
    o.pass = musoc_pairs > 0 && failed_musoc == musoc_pairs && failed_pairs == musoc_pairs && no_musoc_records &&
             snap.records.size() == want_records && !store.entities.empty() && !store.stats.lookup_errors.empty() && indexed > 0 &&
             state != nullptr;
    o.detail = std::to_string(failed_musoc) + "/" + std::to_string(musoc_pairs) +
               " musoc-fx pairs recorded as failed, " + std::to_string(snap.records.size()) + " records (want " +
               std::to_string(want_records) + "), " +
               std::to_string(store.entities.size()) + " entities, " + std::to_string(indexed) + " index entries, " +
               std::to_string(store.stats.lookup_errors.size()) + " lookup errors";
    return o;
  } catch (const std::exception& e) {
    return {false, std::string("pipeline aborted: ") + e.what()};
  }
}

// ---------------------------------------------------------------------------

Outcome parser_conformance() {
  std::size_t valid = 0, agree = 0, invalid = 0, rejected = 0;
  std::string corpus;
  std::vector<std::string> disagreements;
  for (const auto& ent : fs::directory_iterator(lwtest::srj_dir())) {
    if (ent.path().extension() != ".srj") continue;
    auto want_path = ent.path();
    want_path.replace_extension(".expected");
    auto want = lwtest::read_file(want_path);
    auto doc = lwtest::read_file(ent.path());
    if (want.rfind("ERROR", 0) == 0) {
      ++invalid;
      try {
        parse_sparql_results(doc);
      } catch (const Error&) {
        ++rejected;
      }
      continue;
    }
    ++valid;
    corpus += want;
    try {
      if (lwtest::canonical_results(parse_sparql_results(doc)) == want) {
        ++agree;
        continue;
      }
    } catch (const Error&) {
    }
    disagreements.push_back(ent.path().filename().string());
  }

  // Coverage of term kinds, read off the independent parser's output.
  auto has = [&](const std::string& needle) { return corpus.find(needle) != std::string::npos; };
  bool uri = has("=<"), bnode = has("=_:"), unbound = has("=UNBOUND");
  bool lang = false, datatype = false, plain = false;
  std::istringstream lines(corpus);
  for (std::string line; std::getline(lines, line);) {
    auto at = line.find("=L ");
    if (at == std::string::npos) continue;
    // L <hex>|<lang>|<datatype>
    auto bar = line.find('|', at);
    auto bar2 = bar == std::string::npos ? bar : line.find('|', bar + 1);
    if (bar2 == std::string::npos) continue;
    bool has_lang = bar2 > bar + 1, has_dt = bar2 + 1 < line.size();
    if (has_lang) lang = true;
    if (has_dt) datatype = true;
    if (!has_lang && !has_dt) plain = true;
  }
  bool covered = uri && bnode && unbound && lang && datatype && plain;

  Outcome o;
  o.pass = valid >= kMinParserDocs && agree == valid && rejected == invalid && covered;
  o.detail = std::to_string(agree) + "/" + std::to_string(valid) + " documents agree (min " +
             std::to_string(kMinParserDocs) + "), " + std::to_string(rejected) + "/" + std::to_string(invalid) +
             " invalid rejected, term kinds " + (covered ? "all covered" : "incomplete");
  if (!disagreements.empty()) o.detail += "; first: " + disagreements.front();
  return o;
}

}  // namespace

int main() {
  lwtest::FixtureRun run;
  try {
    run = lwtest::run_fixture_pipeline();
  } catch (const std::exception& e) {
    std::cerr << "fixture pipeline failed: " << e.what() << "\n";
    return 1;
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"closure-oracle", closure_oracle},
      {"fixture-pipeline", fixture_pipeline},
      {"duplicate-minimization", [&] { return duplicate_minimization(run); }},
      {"index-completeness", [&] { return index_completeness(run); }},
      {"filter-algebra", [&] { return filter_algebra(run); }},
      {"api-contract", [&] { return api_contract(run); }},
      {"generation-atomicity", [&] { return generation_atomicity(run); }},
      {"ingestion-resilience", [&] { return ingestion_resilience(surviving_records(run)); }},
      {"parser-conformance", parser_conformance},
  };

  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
