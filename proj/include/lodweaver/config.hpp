#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lodweaver {

// Portal configuration: five JSON files in one directory.
//
//   datasets.json    base_iri, cors_origins, datasets[]
//   categories.json  categories[]
//   indexes.json     indexes[], predicate_labels{}
//   highlights.json  intro{}, carousel[], highlights[]
//   insights.json    templates[]
//
// Fields not recognised by the loader are kept in `extra` (or, for
// datasets, in `metadata`) and written back unchanged.

struct DatasetDescriptor {
  std::string id;
  std::string label;
  std::string endpoint;
  int priority = 0;
  nlohmann::json metadata = nlohmann::json::object();

  friend bool operator==(const DatasetDescriptor&, const DatasetDescriptor&) = default;
};

struct CategoryDef {
  std::string id;
  std::string label;
  std::string color;
  std::optional<std::string> sound_url;
  std::map<std::string, std::string> extraction_queries;  // dataset id -> SELECT
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const CategoryDef&, const CategoryDef&) = default;
};

struct IndexDef {
  std::string category_id;
  std::vector<std::string> equivalence_predicates;
  std::vector<std::string> expansion_endpoints;  // dataset ids or absolute URLs
  int expansion_depth = 1;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const IndexDef&, const IndexDef&) = default;
};

struct HighlightDef {
  std::string category_id;
  std::string entity_iri;
  std::string caption;
  std::optional<std::string> linked_to;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const HighlightDef&, const HighlightDef&) = default;
};

struct CarouselBox {
  std::string title;
  std::string description;
  std::string link;
  std::optional<std::string> image;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const CarouselBox&, const CarouselBox&) = default;
};

struct Intro {
  std::string title;
  std::string message;

  friend bool operator==(const Intro&, const Intro&) = default;
};

enum class BlockKind { Text, Media, Links, Relations };
enum class BlockSize { Small, Medium, Large };

std::string_view to_string(BlockKind kind);
std::string_view to_string(BlockSize size);

struct InsightBlock {
  BlockKind kind = BlockKind::Text;
  std::string title;
  std::optional<std::string> description;
  BlockSize size = BlockSize::Medium;
  std::string query;
  std::string target_dataset = "all";
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const InsightBlock&, const InsightBlock&) = default;
};

struct InsightTemplate {
  std::string category_id;
  std::vector<InsightBlock> blocks;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const InsightTemplate&, const InsightTemplate&) = default;
};

struct PortalConfig {
  std::string base_iri;
  std::vector<std::string> cors_origins;
  std::vector<DatasetDescriptor> datasets;
  std::vector<CategoryDef> categories;
  std::vector<IndexDef> indexes;
  std::map<std::string, std::string> predicate_labels;
  Intro intro;
  std::vector<CarouselBox> carousel;
  std::vector<HighlightDef> highlights;
  std::vector<InsightTemplate> insights;

  const DatasetDescriptor* find_dataset(std::string_view id) const;
  const CategoryDef* find_category(std::string_view id) const;
  const IndexDef* find_index(std::string_view category_id) const;

  // Dataset id -> endpoint URL; anything else is returned as-is.
  std::string resolve_endpoint(std::string_view dataset_or_url) const;
  std::map<std::string, int> dataset_priorities() const;

  friend bool operator==(const PortalConfig&, const PortalConfig&) = default;
};

inline constexpr std::string_view kConfigFiles[] = {
    "datasets.json", "categories.json", "indexes.json", "highlights.json", "insights.json"};

// Throws ConfigError: MissingFile, ParseError, InvalidReference.
PortalConfig load_portal_config(const std::filesystem::path& root_dir);

// Writes the five files; load_portal_config reads them back equal.
void write_portal_config(const PortalConfig& cfg, const std::filesystem::path& root_dir);

enum class Severity { Warning, Error };

struct Finding {
  Severity severity;
  std::string file;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool has_errors() const;
  std::size_t error_count() const;
};

ValidationReport validate_config(const PortalConfig& cfg);

// Replaces each `{NAME}` placeholder with `<IRI>`. Everything else is
// copied byte for byte. Throws UnboundPlaceholder / InvalidIri.
std::string render_query(std::string_view tmpl, const std::map<std::string, std::string>& substitutions);

bool is_absolute_http_url(std::string_view text);

}  // namespace lodweaver
