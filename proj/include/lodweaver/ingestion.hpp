#pragma once

#include <chrono>
#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lodweaver/config.hpp"
#include "lodweaver/error.hpp"
#include "lodweaver/fetcher.hpp"
#include "lodweaver/rdf.hpp"

namespace lodweaver {

struct FetchOptions {
  std::size_t page_size = 10000;
  std::size_t max_pages = 100;
  std::chrono::duration<double> timeout{60.0};
  int retries = 3;
  double backoff_base = 1.0;  // seconds; doubles per attempt
  int parallelism = 4;        // global cap on concurrent (dataset, category) jobs

  // Applies LODWEAVER_HTTP_TIMEOUT_SECS when set.
  static FetchOptions from_env(FetchOptions base);
  static FetchOptions from_env();
};

// Thrown when max_pages was reached and the last page was still full.
// The rows fetched so far are carried along.
class PageLimitExceeded : public Error {
 public:
  PageLimitExceeded(std::string message, BindingTable partial)
      : Error(ErrorCode::PageLimitExceeded, std::move(message)), partial_(std::move(partial)) {}

  const BindingTable& partial() const noexcept { return partial_; }

 private:
  BindingTable partial_;
};

struct SelectStats {
  std::size_t pages = 0;
  std::size_t requests = 0;
};

// Appends ORDER BY (when order_vars is non-empty) and LIMIT/OFFSET.
std::string paged_query(std::string_view query, std::span<const std::string> order_vars, std::size_t limit,
                        std::size_t offset);

// Runs a SELECT page by page until a short page or max_pages. Transient
// failures (5xx, timeouts, refused connections) are retried with
// exponential backoff.
BindingTable execute_select(const std::string& endpoint, std::string_view query, const FetchOptions& opts,
                            ResultsFetcher& fetcher, std::span<const std::string> order_vars = {},
                            const std::optional<std::string>& bearer_token = std::nullopt,
                            SelectStats* stats = nullptr);

struct ExtractionRecord {
  std::string dataset_id;
  std::string category_id;
  Iri entity;
  std::string label;
  std::map<std::string, std::vector<Term>> attributes;

  friend bool operator==(const ExtractionRecord&, const ExtractionRecord&) = default;
};

struct PairKey {
  std::string dataset_id;
  std::string category_id;

  friend auto operator<=>(const PairKey&, const PairKey&) = default;
};

struct SourceStats {
  std::size_t rows = 0;  // rows fetched, before dedup and label filtering
  std::size_t pages = 0;
  double duration_secs = 0.0;
  std::optional<std::string> error;

  friend bool operator==(const SourceStats&, const SourceStats&) = default;
};

struct IngestionSnapshot {
  std::string created_at;  // ISO-8601 UTC
  std::vector<ExtractionRecord> records;
  std::map<PairKey, SourceStats> source_stats;

  friend bool operator==(const IngestionSnapshot&, const IngestionSnapshot&) = default;

  // Equality ignoring created_at and durations.
  bool same_content(const IngestionSnapshot& other) const;
};

// Records are ordered by (dataset_id, category_id, entity).
IngestionSnapshot ingest(const PortalConfig& cfg, const FetchOptions& opts, ResultsFetcher& fetcher);

inline constexpr int kSnapshotSchemaVersion = 1;

void save_snapshot(const IngestionSnapshot& snapshot, const std::filesystem::path& path);
IngestionSnapshot load_snapshot(const std::filesystem::path& path);

std::string utc_timestamp_now();

}  // namespace lodweaver
