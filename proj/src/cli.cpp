#include "lodweaver/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "lodweaver/api.hpp"
#include "lodweaver/config.hpp"
#include "lodweaver/error.hpp"
#include "lodweaver/fetcher.hpp"
#include "lodweaver/fixture.hpp"
#include "lodweaver/index.hpp"
#include "lodweaver/ingestion.hpp"
#include "lodweaver/reconciliation.hpp"

namespace lodweaver {

namespace fs = std::filesystem;

namespace {

std::atomic<int> g_signal{0};

extern "C" void on_signal(int sig) { g_signal.store(sig); }

struct FetchFlags {
  std::size_t page_size = FetchOptions{}.page_size;
  std::size_t max_pages = FetchOptions{}.max_pages;
  int retries = FetchOptions{}.retries;
  double backoff = FetchOptions{}.backoff_base;
  int parallelism = FetchOptions{}.parallelism;
  double timeout = 0;  // 0: default / LODWEAVER_HTTP_TIMEOUT_SECS

  void attach(CLI::App* cmd) {
    cmd->add_option("--page-size", page_size, "Rows per SPARQL page")->check(CLI::Range(1, 1000000))->capture_default_str();
    cmd->add_option("--max-pages", max_pages, "Page cap per query")->check(CLI::Range(1, 1000000))->capture_default_str();
    cmd->add_option("--retries", retries, "Attempts per page on transient failures")->check(CLI::Range(1, 20))->capture_default_str();
    cmd->add_option("--backoff", backoff, "Base backoff in seconds, doubled per retry")->check(CLI::Range(0.0, 600.0))->capture_default_str();
    cmd->add_option("--parallelism", parallelism, "Concurrent jobs")->check(CLI::Range(1, 64))->capture_default_str();
    cmd->add_option("--timeout", timeout, "HTTP timeout in seconds (overrides LODWEAVER_HTTP_TIMEOUT_SECS)")->check(CLI::Range(0.0, 3600.0));
  }

  FetchOptions options() const {
    FetchOptions o;
    o.page_size = page_size;
    o.max_pages = max_pages;
    o.retries = retries;
    o.backoff_base = backoff;
    o.parallelism = parallelism;
    o = FetchOptions::from_env(o);
    if (timeout > 0) o.timeout = std::chrono::duration<double>(timeout);
    return o;
  }
};

// HttpFetcher, optionally behind an on-disk response cache.
class FetcherChain {
 public:
  explicit FetcherChain(const std::string& cache_dir) {
    if (!cache_dir.empty()) cache_ = std::make_unique<CachingFetcher>(http_, cache_dir);
  }
  ResultsFetcher& get() { return cache_ ? static_cast<ResultsFetcher&>(*cache_) : http_; }

 private:
  HttpFetcher http_;
  std::unique_ptr<CachingFetcher> cache_;
};

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "IoError(cannot write " + path.string() + ")");
  out << content;
  if (!out.flush()) throw Error(ErrorCode::IoError, "IoError(write failed: " + path.string() + ")");
}

int cmd_validate(const std::string& config_dir, std::ostream& err) {
  PortalConfig cfg;
  try {
    cfg = load_portal_config(config_dir);
  } catch (const ConfigError& e) {
    err << e.file() << ": " << e.what() << '\n';
    return kExitInvalid;
  }
  auto report = validate_config(cfg);
  for (const auto& f : report.findings) {
    err << f.file << ": " << (f.severity == Severity::Error ? "error: " : "warning: ") << f.message << '\n';
  }
  return report.has_errors() ? kExitInvalid : kExitOk;
}

// Loads and validates; diagnostics as for `validate`. Returns nullopt on errors.
std::optional<PortalConfig> load_valid_config(const std::string& dir, std::ostream& err) {
  PortalConfig cfg;
  try {
    cfg = load_portal_config(dir);
  } catch (const ConfigError& e) {
    err << e.file() << ": " << e.what() << '\n';
    return std::nullopt;
  }
  auto report = validate_config(cfg);
  if (report.has_errors()) {
    for (const auto& f : report.findings) {
      if (f.severity == Severity::Error) err << f.file << ": error: " << f.message << '\n';
    }
    return std::nullopt;
  }
  return cfg;
}

// Keeps the generation of an existing index directory when the rebuild is
// identical, so reruns are byte-identical; otherwise bumps it.
std::uint64_t next_generation(const ReconciledStore& store, const PortalConfig& cfg, const fs::path& out) {
  std::uint64_t previous = read_index_generation(out);
  if (previous == 0) return 1;
  try {
    if (load_indexes(out) == build_indexes(store, cfg, previous)) return previous;
  } catch (const std::exception&) {
  }
  return previous + 1;
}

// Categories straight from the store when no config is given.
PortalConfig categories_from_store(const ReconciledStore& store) {
  PortalConfig cfg;
  std::set<std::string> seen;
  for (const auto& [k, e] : store.entities) seen.insert(e.categories.begin(), e.categories.end());
  for (const auto& c : seen) cfg.categories.push_back(CategoryDef{c, c, "", std::nullopt, {}, nlohmann::json::object()});
  return cfg;
}

std::shared_ptr<const ServerState> load_state(const PortalConfig& cfg, const std::string& store_dir,
                                              const std::string& index_dir) {
  auto store = load_store(store_dir);
  auto indexes = load_indexes(index_dir);
  auto generation = std::max<std::uint64_t>(read_index_generation(index_dir), 1);
  if (store.base_iri != cfg.base_iri) {
    spdlog::warn("store base IRI {} differs from config base IRI {}", store.base_iri, cfg.base_iri);
  }
  return make_server_state(cfg, std::move(store), std::move(indexes), generation);
}

void install_signals() {
  g_signal.store(0);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
#ifdef SIGHUP
  std::signal(SIGHUP, on_signal);
#endif
}

std::string default_addr(const char* fallback) {
  const char* env = std::getenv("LODWEAVER_ADDR");
  return env && *env ? env : fallback;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  sink->set_pattern("%^%l%$: %v");
  auto previous_logger = spdlog::default_logger();
  spdlog::set_default_logger(std::make_shared<spdlog::logger>("lodweaver", sink));
  struct Restore {
    std::shared_ptr<spdlog::logger> logger;
    ~Restore() { spdlog::set_default_logger(logger); }
  } restore{previous_logger};

  CLI::App app{"lodweaver: linked open data reconciliation portal engine", "lodweaver"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_dir, out_path, cache_dir, snapshot_path, store_dir, index_dir, data_dir, addr;
  FetchFlags fetch;

  auto* validate = app.add_subcommand("validate", "Check the five configuration files");
  validate->add_option("--config", config_dir, "Configuration directory")->required()->check(CLI::ExistingDirectory);

  auto* ingest = app.add_subcommand("ingest", "Run every extraction query and write a snapshot");
  ingest->add_option("--config", config_dir, "Configuration directory")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--out", out_path, "Snapshot file (.ndjson)")->required();
  ingest->add_option("--cache", cache_dir, "Directory caching successful SPARQL responses");
  fetch.attach(ingest);

  auto* reconcile = app.add_subcommand("reconcile", "Find equivalences, mint identities, write the store");
  reconcile->add_option("--config", config_dir, "Configuration directory")->required()->check(CLI::ExistingDirectory);
  reconcile->add_option("--snapshot", snapshot_path, "Snapshot written by ingest")->required()->check(CLI::ExistingFile);
  reconcile->add_option("--out", out_path, "Store directory")->required();
  reconcile->add_option("--cache", cache_dir, "Directory caching successful SPARQL responses");
  fetch.attach(reconcile);

  auto* index = app.add_subcommand("index", "Build the per-category label indexes of a store");
  index->add_option("--store", store_dir, "Store directory")->required()->check(CLI::ExistingDirectory);
  index->add_option("--out", out_path, "Index directory")->required();
  index->add_option("--config", config_dir,
                    "Configuration directory; also creates empty indexes for categories without entities")
      ->check(CLI::ExistingDirectory);

  auto* serve = app.add_subcommand("serve", "Serve the REST API");
  serve->add_option("--config", config_dir, "Configuration directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--store", store_dir, "Store directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--index", index_dir, "Index directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--addr", addr, "HOST:PORT to bind (default $LODWEAVER_ADDR or 127.0.0.1:8080)");
  fetch.attach(serve);

  auto* export_linkset = app.add_subcommand("export-linkset", "Write the owl:sameAs linkset as N-Triples");
  export_linkset->add_option("--store", store_dir, "Store directory")->required()->check(CLI::ExistingDirectory);
  export_linkset->add_option("--out", out_path, "Output file (.nt)")->required();

  auto* fixture = app.add_subcommand("fixture-endpoint", "Serve canned SPARQL results for offline runs");
  fixture->add_option("--data", data_dir, "Fixture directory, one subdirectory per endpoint")
      ->required()
      ->check(CLI::ExistingDirectory);
  fixture->add_option("--addr", addr, "HOST:PORT to bind (default $LODWEAVER_ADDR or 127.0.0.1:18089)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(config_dir, err);

    if (*ingest) {
      auto cfg = load_valid_config(config_dir, err);
      if (!cfg) return kExitInvalid;
      FetcherChain chain(cache_dir);
      auto snapshot = lodweaver::ingest(*cfg, fetch.options(), chain.get());
      save_snapshot(snapshot, out_path);
      std::size_t failed = 0;
      for (const auto& [key, stats] : snapshot.source_stats) failed += stats.error ? 1 : 0;
      spdlog::info("{} records from {} pairs ({} with errors) -> {}", snapshot.records.size(),
                   snapshot.source_stats.size(), failed, out_path);
      return kExitOk;
    }

    if (*reconcile) {
      auto cfg = load_valid_config(config_dir, err);
      if (!cfg) return kExitInvalid;
      auto snapshot = load_snapshot(snapshot_path);
      FetcherChain chain(cache_dir);
      auto store = lodweaver::reconcile(snapshot, *cfg, fetch.options(), chain.get());
      save_store(store, out_path);
      spdlog::info("{} records -> {} entities, {} linkset statements -> {}", store.stats.records,
                   store.entities.size(), store.stats.linkset_size, out_path);
      return kExitOk;
    }

    if (*index) {
      auto store = load_store(store_dir);
      PortalConfig cfg;
      if (!config_dir.empty()) {
        auto loaded = load_valid_config(config_dir, err);
        if (!loaded) return kExitInvalid;
        cfg = std::move(*loaded);
      } else {
        cfg = categories_from_store(store);
      }
      auto generation = next_generation(store, cfg, out_path);
      auto indexes = build_indexes(store, cfg, generation);
      save_indexes(indexes, out_path);
      spdlog::info("{} category indexes, generation {} -> {}", indexes.size(), generation, out_path);
      return kExitOk;
    }

    if (*export_linkset) {
      auto store = load_store(store_dir);
      write_file(out_path, store.linkset.to_ntriples());
      return kExitOk;
    }

    if (*serve) {
      auto cfg = load_valid_config(config_dir, err);
      if (!cfg) return kExitInvalid;
      auto where = parse_host_port(addr.empty() ? default_addr("127.0.0.1:8080") : addr);
      auto http = std::make_shared<HttpFetcher>();
      auto api = std::make_shared<Api>(fetch.options(), http);
      ApiServer server(api);
      install_signals();
      int port = server.start(where.host, where.port);
      if (port < 0) {
        err << "cannot bind " << where.host << ':' << where.port << '\n';
        return kExitFailure;
      }
      spdlog::info("listening on {}:{}", where.host, port);
      api->publish(load_state(*cfg, store_dir, index_dir));
      spdlog::info("serving generation {}", api->current()->generation);
      for (;;) {
        int sig = g_signal.exchange(0);
        if (sig == SIGINT || sig == SIGTERM) break;
#ifdef SIGHUP
        if (sig == SIGHUP) {
          try {
            api->publish(load_state(*cfg, store_dir, index_dir));
            spdlog::info("reloaded, serving generation {}", api->current()->generation);
          } catch (const std::exception& e) {
            spdlog::error("reload failed, keeping generation {}: {}", api->current()->generation, e.what());
          }
        }
#endif
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      server.stop();
      return kExitOk;
    }

    if (*fixture) {
      auto where = parse_host_port(addr.empty() ? default_addr("127.0.0.1:18089") : addr);
      auto repo = FixtureRepository::load(data_dir);
      FixtureServer server(repo);
      install_signals();
      int port = server.start(where.host, where.port);
      if (port < 0) {
        err << "cannot bind " << where.host << ':' << where.port << '\n';
        return kExitFailure;
      }
      spdlog::info("fixture endpoint on {}:{} ({} canned queries)", where.host, port, repo->entry_count());
      while (g_signal.load() != SIGINT && g_signal.load() != SIGTERM) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      server.stop();
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << e.file() << ": " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace lodweaver
