#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lodweaver/config.hpp"
#include "lodweaver/rdf.hpp"
#include "lodweaver/reconciliation.hpp"

namespace lodweaver {

enum class MatchClass { LabelPrefix, TokenPrefix };

std::string_view to_string(MatchClass c);

struct IndexEntry {
  Iri minted;
  std::string display_label;
  std::string category_id;
  std::set<std::string> sources;
  std::set<std::string> label_keys;  // normalized full labels
  std::set<std::string> token_keys;  // normalized whitespace tokens

  std::size_t source_count() const { return sources.size(); }
  std::set<std::string> normalized_keys() const;

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

struct IndexKey {
  std::string key;
  std::uint32_t entry;
  MatchClass match;

  friend bool operator==(const IndexKey&, const IndexKey&) = default;
};

// Immutable once built. Keys are sorted by (key, entry) so a prefix query
// is one lower_bound plus a forward scan.
class CategoryIndex {
 public:
  CategoryIndex(std::string category_id, std::uint64_t generation, std::vector<IndexEntry> entries);

  const std::string& category_id() const { return category_id_; }
  std::uint64_t generation() const { return generation_; }
  const std::vector<IndexEntry>& entries() const { return entries_; }
  const std::vector<IndexKey>& keys() const { return keys_; }
  std::size_t size() const { return entries_.size(); }

  friend bool operator==(const CategoryIndex&, const CategoryIndex&) = default;

 private:
  std::string category_id_;
  std::uint64_t generation_;
  std::vector<IndexEntry> entries_;
  std::vector<IndexKey> keys_;
};

struct Suggestion {
  Iri minted;
  std::string display_label;
  std::string category_id;
  std::set<std::string> sources;
  MatchClass match_class;

  friend bool operator==(const Suggestion&, const Suggestion&) = default;
};

using IndexMap = std::map<std::string, CategoryIndex>;

// One index per configured category, each holding every entity of that
// category keyed by its normalized labels and their tokens.
IndexMap build_indexes(std::span<const MergedEntity> entities, const PortalConfig& cfg,
                       std::uint64_t generation = 1);
IndexMap build_indexes(const ReconciledStore& store, const PortalConfig& cfg, std::uint64_t generation = 1);

// Throws Error(EmptyQuery) when q normalizes to nothing.
std::vector<Suggestion> suggest(const CategoryIndex& index, std::string_view q, std::size_t limit);

inline constexpr int kIndexFormatVersion = 1;

// One <category>.index.ndjson per category plus a manifest.json.
void save_indexes(const IndexMap& indexes, const std::filesystem::path& dir);
IndexMap load_indexes(const std::filesystem::path& dir);
// Generation recorded in dir/manifest.json, or 0 when absent.
std::uint64_t read_index_generation(const std::filesystem::path& dir);

}  // namespace lodweaver
