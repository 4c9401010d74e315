#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lodweaver/config.hpp"
#include "lodweaver/ingestion.hpp"
#include "lodweaver/rdf.hpp"
#include "lodweaver/reconciliation.hpp"

namespace lodweaver {

enum class Direction { Outgoing, Incoming };

std::string_view to_string(Direction d);

struct Relation {
  Iri subject;  // minted
  Iri predicate;
  std::string predicate_label;
  Term object;
  std::optional<Iri> object_entity;  // minted IRI when the object reconciles
  std::optional<std::string> object_category;
  std::string object_label;  // display label of object_entity, else the raw value
  std::string source;        // dataset id or endpoint URL
  bool transitive = false;
  std::optional<Iri> via;    // intermediate entity of a transitive relation
  Direction direction = Direction::Outgoing;

  friend bool operator==(const Relation&, const Relation&) = default;
};

// Absent fields match everything; present fields are combined with AND.
struct RelationFilter {
  std::optional<std::string> relation_type;  // predicate IRI
  std::optional<std::string> category;
  std::optional<std::string> source;

  bool matches(const Relation& r) const;
};

std::vector<Relation> filter_relations(std::span<const Relation> relations, const RelationFilter& filter);

// cfg.predicate_labels, then built-in labels, then the IRI's local name.
std::string predicate_label(const Iri& predicate, const PortalConfig& cfg);

// Outgoing and incoming IRI-valued triples of one IRI, tagged with ?dir;
// rdf:type is left out.
std::string relation_lookup_query(const Iri& member);

// Direct relations of every member from each expansion endpoint of the
// entity's categories, plus (when include_transitive) the outgoing
// relations of entities reached by an outgoing direct relation. Objects that are members of a
// known cluster are rewritten to the cluster's minted IRI. Per-source
// failures go to `errors` and do not abort the expansion.
std::vector<Relation> expand_relations(const Iri& entity, const ReconciledStore& store, const PortalConfig& cfg,
                                       const FetchOptions& opts, ResultsFetcher& fetcher,
                                       std::vector<std::string>* errors = nullptr, bool include_transitive = true);

struct MediaItem {
  std::string url;
  std::optional<std::string> label;
  std::string media_type;  // "image/*", "audio/*", "video/*" or "" when unknown

  friend bool operator==(const MediaItem&, const MediaItem&) = default;
};

struct LinkItem {
  std::string label;
  std::string url;

  friend bool operator==(const LinkItem&, const LinkItem&) = default;
};

struct RenderedBlock {
  BlockKind kind;
  std::string title;
  std::optional<std::string> description;
  BlockSize size;
  std::vector<std::string> texts;
  std::vector<MediaItem> media;
  std::vector<LinkItem> links;
  std::vector<Relation> relations;
  std::optional<std::string> error_note;

  std::size_t item_count() const;
};

struct InsightCard {
  Iri entity;
  std::string title;
  std::vector<RenderedBlock> blocks;
};

// First template whose category is one of the entity's categories, in
// configuration order.
const InsightTemplate* find_template(const MergedEntity& entity, const PortalConfig& cfg);

std::string guess_media_type(std::string_view url);

// Block failures are reported through RenderedBlock::error_note; only
// UnknownEntity and NoTemplate are thrown.
InsightCard assemble_insight(const Iri& entity, const InsightTemplate& tmpl, const ReconciledStore& store,
                             const PortalConfig& cfg, const FetchOptions& opts, ResultsFetcher& fetcher);

}  // namespace lodweaver
