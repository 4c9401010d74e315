#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lodweaver/config.hpp"
#include "lodweaver/ingestion.hpp"
#include "lodweaver/rdf.hpp"

namespace lodweaver {

struct EquivalenceStatement {
  Iri left;
  Iri right;
  Iri predicate;
  std::string provenance;  // dataset id or endpoint URL
  int hop = 0;             // 0 = lookup on an ingested IRI

  friend auto operator<=>(const EquivalenceStatement&, const EquivalenceStatement&) = default;
};

// Named graph scoping everything extracted about one IRI. provenance[i]
// is the dataset that contributed statements[i].
struct EntityGraph {
  Iri graph_iri;
  Iri entity;
  std::vector<Statement> statements;
  std::vector<std::string> provenance;

  friend bool operator==(const EntityGraph&, const EntityGraph&) = default;
};

struct Cluster {
  std::vector<Iri> members;  // sorted, unique
  std::optional<Iri> minted;
  std::set<std::string> categories;
  std::map<std::string, std::vector<std::string>> per_source_labels;

  friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct EquivalencePartition {
  std::vector<Cluster> clusters;  // ordered by first member
};

struct AttributeValue {
  Term value;
  std::string dataset_id;
  Iri member;

  friend auto operator<=>(const AttributeValue&, const AttributeValue&) = default;
};

struct MergedEntity {
  Iri minted;
  std::string display_label;
  std::vector<std::string> all_labels;
  std::set<std::string> categories;
  std::set<std::string> sources;
  std::vector<Iri> members;
  std::map<std::string, std::vector<AttributeValue>> attributes;
  std::map<std::string, std::set<std::string>> member_sources;  // member IRI -> dataset ids

  // 16-hex suffix of the minted IRI.
  std::string id() const;

  friend bool operator==(const MergedEntity&, const MergedEntity&) = default;
};

struct Linkset {
  std::vector<Statement> statements;  // (minted, owl:sameAs, member), sorted

  std::string to_ntriples() const;
};

struct ClusterConflict {
  std::string minted;
  std::string dataset_id;
  std::string category_id;
  std::vector<std::string> members;
};

struct ReconcileStats {
  std::size_t records = 0;
  std::size_t entity_graphs = 0;
  std::size_t equivalence_statements = 0;
  std::size_t clusters = 0;
  std::size_t linkset_size = 0;
  std::vector<std::string> multi_source_iris;
  std::vector<ClusterConflict> conflicts;
  std::vector<std::string> lookup_errors;
};

struct ReconciledStore {
  std::string base_iri;
  std::map<std::string, MergedEntity> entities;  // minted IRI -> entity
  Linkset linkset;
  std::vector<EntityGraph> graphs;
  std::map<std::string, std::string> member_to_minted;
  ReconcileStats stats;

  const MergedEntity* find(std::string_view minted) const;
  const MergedEntity* find_by_id(std::string_view hex_id) const;
};

std::string percent_encode(std::string_view text);

std::vector<EntityGraph> build_entity_graphs(const IngestionSnapshot& snapshot, const std::string& base_iri);

// Lookup SELECT for equivalents of `subject` in either direction.
std::string equivalence_lookup_query(const Iri& subject, std::span<const std::string> predicates);

// Per-lookup failures are appended to `errors` (when given) and otherwise
// ignored.
std::vector<EquivalenceStatement> collect_equivalences(const IngestionSnapshot& snapshot, const PortalConfig& cfg,
                                                       const FetchOptions& opts, ResultsFetcher& fetcher,
                                                       std::vector<std::string>* errors = nullptr);

// Connected components over entities plus statement endpoints.
EquivalencePartition close_equivalences(std::span<const Iri> entities,
                                        std::span<const EquivalenceStatement> statements);

Iri mint_identity(std::span<const Iri> members, const std::string& base_iri);

MergedEntity merge_records(const Cluster& cluster, std::span<const ExtractionRecord> records,
                           const std::map<std::string, int>& dataset_priority);

Linkset build_linkset(const EquivalencePartition& partition);

ReconciledStore reconcile(const IngestionSnapshot& snapshot, const PortalConfig& cfg, const FetchOptions& opts,
                          ResultsFetcher& fetcher);

nlohmann::json entity_to_json(const MergedEntity& entity);
MergedEntity entity_from_json(const nlohmann::json& j);

inline constexpr int kStoreSchemaVersion = 1;

// Store directory: entities.ndjson, linkset.nt, graphs.nq, stats.json.
void save_store(const ReconciledStore& store, const std::filesystem::path& dir);
ReconciledStore load_store(const std::filesystem::path& dir);

}  // namespace lodweaver
