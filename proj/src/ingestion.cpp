#include "lodweaver/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "parallel.hpp"

namespace lodweaver {

namespace fs = std::filesystem;
using nlohmann::json;

FetchOptions FetchOptions::from_env(FetchOptions base) {
  if (const char* v = std::getenv("LODWEAVER_HTTP_TIMEOUT_SECS"); v && *v) {
    char* end = nullptr;
    double secs = std::strtod(v, &end);
    if (end && *end == '\0' && secs > 0) {
      base.timeout = std::chrono::duration<double>(secs);
    } else {
      spdlog::warn("ignoring invalid LODWEAVER_HTTP_TIMEOUT_SECS='{}'", v);
    }
  }
  return base;
}

FetchOptions FetchOptions::from_env() { return from_env(FetchOptions{}); }

std::string paged_query(std::string_view query, std::span<const std::string> order_vars, std::size_t limit,
                        std::size_t offset) {
  std::string out(query);
  while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
  if (!order_vars.empty()) {
    out += "\nORDER BY";
    for (const auto& v : order_vars) out += " ?" + v;
  }
  out += "\nLIMIT " + std::to_string(limit) + " OFFSET " + std::to_string(offset);
  return out;
}

namespace {

BindingTable fetch_page(const SparqlRequest& request, const FetchOptions& opts, ResultsFetcher& fetcher,
                        SelectStats* stats) {
  FetchOutcome last;
  for (int attempt = 0; attempt <= opts.retries; ++attempt) {
    if (stats) ++stats->requests;
    last = fetcher.fetch(request);
    if (last.ok()) return parse_sparql_results(last.body);
    if (!last.transient()) {
      throw HttpError(last.status, "HttpStatus(" + std::to_string(last.status) + ") from " + request.endpoint);
    }
    if (attempt < opts.retries && opts.backoff_base > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(opts.backoff_base * std::pow(2.0, attempt)));
    }
  }
  if (last.status == 0) {
    throw Error(ErrorCode::EndpointUnreachable,
                "EndpointUnreachable(" + request.endpoint + ", " + (last.timed_out ? "timeout" : last.error) + ")");
  }
  throw HttpError(last.status, "HttpStatus(" + std::to_string(last.status) + ") from " + request.endpoint +
                                   " after " + std::to_string(opts.retries + 1) + " attempts");
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<std::string> label_of(const Term& t) {
  if (const auto* lit = as_literal(t)) return lit->lexical;
  if (const auto* iri = as_iri(t)) return iri->str();
  return std::nullopt;
}

void add_distinct(std::vector<Term>& values, const Term& t) {
  if (std::find(values.begin(), values.end(), t) == values.end()) values.push_back(t);
}

struct PairResult {
  PairKey key;
  SourceStats stats;
  std::vector<ExtractionRecord> records;
};

std::vector<ExtractionRecord> to_records(const PairKey& key, const BindingTable& table) {
  std::vector<ExtractionRecord> records;
  std::map<std::string, std::size_t> by_entity;
  for (const auto& row : table.rows) {
    auto e = row.find("entity");
    const Iri* entity = e == row.end() ? nullptr : as_iri(e->second);
    if (!entity) {
      spdlog::warn("{}/{}: row without an IRI ?entity dropped", key.dataset_id, key.category_id);
      continue;
    }
    auto l = row.find("label");
    std::string label = l == row.end() ? std::string{} : trim(label_of(l->second).value_or(""));
    if (label.empty()) {
      spdlog::warn("{}/{}: {} has an empty label; dropped", key.dataset_id, key.category_id, entity->str());
      continue;
    }

    auto [it, inserted] = by_entity.emplace(entity->str(), records.size());
    if (inserted) records.push_back(ExtractionRecord{key.dataset_id, key.category_id, *entity, label, {}});
    ExtractionRecord& rec = records[it->second];
    if (!inserted && label != rec.label) add_distinct(rec.attributes["label"], Literal{label, {}, {}});
    for (const auto& [var, term] : row) {
      if (var == "entity" || var == "label") continue;
      add_distinct(rec.attributes[var], term);
    }
  }
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.entity < b.entity; });
  return records;
}

}  // namespace

BindingTable execute_select(const std::string& endpoint, std::string_view query, const FetchOptions& opts,
                            ResultsFetcher& fetcher, std::span<const std::string> order_vars,
                            const std::optional<std::string>& bearer_token, SelectStats* stats) {
  const std::size_t page_size = std::max<std::size_t>(opts.page_size, 1);
  BindingTable out;
  bool have_vars = false;
  for (std::size_t page = 0; page < opts.max_pages; ++page) {
    SparqlRequest request{endpoint, paged_query(query, order_vars, page_size, page * page_size), opts.timeout,
                          bearer_token};
    BindingTable t = fetch_page(request, opts, fetcher, stats);
    if (stats) ++stats->pages;
    if (!have_vars) {
      out.vars = t.vars;
      have_vars = true;
    }
    const std::size_t n = t.rows.size();
    std::move(t.rows.begin(), t.rows.end(), std::back_inserter(out.rows));
    if (n < page_size) return out;
  }
  throw PageLimitExceeded("PageLimitExceeded(" + endpoint + ", " + std::to_string(opts.max_pages) + " pages)",
                          std::move(out));
}

bool IngestionSnapshot::same_content(const IngestionSnapshot& other) const {
  if (records != other.records || source_stats.size() != other.source_stats.size()) return false;
  for (auto a = source_stats.begin(), b = other.source_stats.begin(); a != source_stats.end(); ++a, ++b) {
    if (a->first != b->first || a->second.rows != b->second.rows || a->second.pages != b->second.pages ||
        a->second.error != b->second.error) {
      return false;
    }
  }
  return true;
}

std::string utc_timestamp_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

IngestionSnapshot ingest(const PortalConfig& cfg, const FetchOptions& opts, ResultsFetcher& fetcher) {
  struct Job {
    PairKey key;
    std::string endpoint;
    std::string query;
    std::optional<std::string> token;
  };
  std::vector<Job> jobs;
  for (const auto& d : cfg.datasets) {
    std::optional<std::string> token;
    if (auto it = d.metadata.find("bearer_token"); it != d.metadata.end() && it->is_string()) {
      token = it->get<std::string>();
    }
    for (const auto& c : cfg.categories) {
      auto q = c.extraction_queries.find(d.id);
      if (q == c.extraction_queries.end()) {
        spdlog::warn("category '{}' has no extraction query for dataset '{}'; skipped", c.id, d.id);
        continue;
      }
      jobs.push_back(Job{{d.id, c.id}, d.endpoint, q->second, token});
    }
  }
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) { return a.key < b.key; });

  PoliteFetcher polite(fetcher);
  const std::vector<std::string> order{"entity"};
  std::vector<PairResult> results(jobs.size());

  detail::run_bounded(jobs.size(), opts.parallelism, [&](std::size_t i) {
    const Job& job = jobs[i];
    PairResult& r = results[i];
    r.key = job.key;
    SelectStats sel;
    auto start = std::chrono::steady_clock::now();
    BindingTable table;
    try {
      table = execute_select(job.endpoint, job.query, opts, polite, order, job.token, &sel);
    } catch (const PageLimitExceeded& e) {
      table = e.partial();
      r.stats.error = e.what();
    } catch (const std::exception& e) {
      r.stats.error = e.what();
      spdlog::error("{}/{}: {}", job.key.dataset_id, job.key.category_id, e.what());
    }
    r.stats.rows = table.rows.size();
    r.stats.pages = sel.pages;
    r.stats.duration_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.records = to_records(job.key, table);
  });

  IngestionSnapshot snap;
  snap.created_at = utc_timestamp_now();
  for (auto& r : results) {
    snap.source_stats.emplace(r.key, r.stats);
    std::move(r.records.begin(), r.records.end(), std::back_inserter(snap.records));
  }
  if (snap.records.empty()) {
    throw Error(ErrorCode::NoUsablePairs, "NoUsablePairs(no dataset/category pair produced any record)");
  }
  return snap;
}

void save_snapshot(const IngestionSnapshot& snapshot, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "IoError(cannot write " + path.string() + ")");
  out << json{{"format", "lodweaver-snapshot"},
              {"schema_version", kSnapshotSchemaVersion},
              {"created_at", snapshot.created_at}}
             .dump()
      << '\n';
  for (const auto& [key, s] : snapshot.source_stats) {
    json j{{"type", "stat"},
           {"dataset_id", key.dataset_id},
           {"category_id", key.category_id},
           {"rows", s.rows},
           {"pages", s.pages},
           {"duration_secs", s.duration_secs},
           {"error", s.error ? json(*s.error) : json(nullptr)}};
    out << j.dump() << '\n';
  }
  for (const auto& r : snapshot.records) {
    json attrs = json::object();
    for (const auto& [var, values] : r.attributes) {
      json arr = json::array();
      for (const auto& v : values) arr.push_back(term_to_json(v));
      attrs[var] = std::move(arr);
    }
    json j{{"type", "record"},
           {"dataset_id", r.dataset_id},
           {"category_id", r.category_id},
           {"entity", r.entity.str()},
           {"label", r.label},
           {"attributes", std::move(attrs)}};
    out << j.dump() << '\n';
  }
  out << json{{"type", "end"}, {"records", snapshot.records.size()}, {"stats", snapshot.source_stats.size()}}.dump()
      << '\n';
  if (!out) throw Error(ErrorCode::IoError, "IoError(write failed for " + path.string() + ")");
}

IngestionSnapshot load_snapshot(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "IoError(cannot read " + path.string() + ")");

  auto mismatch = [&](const std::string& why) {
    return Error(ErrorCode::SchemaVersionMismatch, "SchemaVersionMismatch(" + path.string() + ", " + why + ")");
  };
  auto io = [&](const std::string& why) {
    return Error(ErrorCode::IoError, "IoError(" + path.string() + ", " + why + ")");
  };

  std::string line;
  if (!std::getline(in, line)) throw mismatch("missing header");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception&) {
    throw mismatch("unreadable header");
  }
  if (!header.is_object() || header.value("format", "") != "lodweaver-snapshot" ||
      !header.contains("schema_version") || !header["schema_version"].is_number_integer()) {
    throw mismatch("not a snapshot header");
  }
  if (int v = header["schema_version"].get<int>(); v != kSnapshotSchemaVersion) {
    throw mismatch("schema_version " + std::to_string(v) + ", expected " + std::to_string(kSnapshotSchemaVersion));
  }

  IngestionSnapshot snap;
  snap.created_at = header.value("created_at", "");
  bool ended = false;
  std::size_t lineno = 1;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (ended) throw io("content after end marker at line " + std::to_string(lineno));
      json j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "stat") {
        SourceStats s;
        s.rows = j.at("rows").get<std::size_t>();
        s.pages = j.at("pages").get<std::size_t>();
        s.duration_secs = j.at("duration_secs").get<double>();
        if (!j.at("error").is_null()) s.error = j["error"].get<std::string>();
        snap.source_stats.emplace(PairKey{j.at("dataset_id").get<std::string>(), j.at("category_id").get<std::string>()},
                                  s);
      } else if (type == "record") {
        ExtractionRecord r{j.at("dataset_id").get<std::string>(), j.at("category_id").get<std::string>(),
                           parse_iri(j.at("entity").get<std::string>()), j.at("label").get<std::string>(), {}};
        for (const auto& [var, values] : j.at("attributes").items()) {
          auto& dst = r.attributes[var];
          for (const auto& v : values) dst.push_back(term_from_json(v));
        }
        snap.records.push_back(std::move(r));
      } else if (type == "end") {
        if (j.at("records").get<std::size_t>() != snap.records.size() ||
            j.at("stats").get<std::size_t>() != snap.source_stats.size()) {
          throw io("end marker counts do not match content");
        }
        ended = true;
      } else {
        throw io("unknown line type '" + type + "' at line " + std::to_string(lineno));
      }
    }
  } catch (const json::exception& e) {
    throw io("line " + std::to_string(lineno) + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    throw io("line " + std::to_string(lineno) + ": " + e.what());
  }
  if (!ended) throw io("truncated (no end marker)");
  return snap;
}

}  // namespace lodweaver
