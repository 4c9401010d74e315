#include "lodweaver/relations.hpp"

#include <algorithm>
#include <climits>
#include <set>

#include "lodweaver/error.hpp"

namespace lodweaver {

namespace {

const std::map<std::string, std::string, std::less<>>& builtin_predicate_labels() {
  static const std::map<std::string, std::string, std::less<>> kLabels{
      {"http://www.w3.org/2000/01/rdf-schema#label", "label"},
      {"http://www.w3.org/2000/01/rdf-schema#seeAlso", "see also"},
      {"http://www.w3.org/1999/02/22-rdf-syntax-ns#type", "type"},
      {"http://www.w3.org/2002/07/owl#sameAs", "same as"},
      {"http://www.w3.org/2004/02/skos/core#exactMatch", "exact match"},
      {"http://www.w3.org/2004/02/skos/core#related", "related"},
      {"http://xmlns.com/foaf/0.1/homepage", "homepage"},
      {"http://xmlns.com/foaf/0.1/depiction", "depiction"},
      {"http://schema.org/genre", "genre"},
      {"http://schema.org/location", "location"},
      {"http://dbpedia.org/ontology/genre", "genre"},
      {"http://dbpedia.org/ontology/hometown", "hometown"},
      {"http://dbpedia.org/ontology/birthPlace", "birth place"},
      {"http://dbpedia.org/ontology/instrument", "instrument"},
      {"http://dbpedia.org/ontology/artist", "artist"},
      {"http://dbpedia.org/ontology/musicalArtist", "musical artist"},
      {"http://dbpedia.org/ontology/associatedMusicalArtist", "associated musical artist"},
      {"http://dbpedia.org/ontology/stylisticOrigin", "stylistic origin"},
      {"http://www.wikidata.org/prop/direct/P136", "genre"},
      {"http://www.wikidata.org/prop/direct/P31", "instance of"},
      {"http://www.wikidata.org/prop/direct/P18", "image"},
      {"http://xmlns.com/foaf/0.1/isPrimaryTopicOf", "primary topic of"},
      {"http://xmlns.com/foaf/0.1/page", "page"},
      {"http://www.wikidata.org/prop/direct/P175", "performer"},
      {"http://www.wikidata.org/prop/direct/P19", "place of birth"},
      {"http://www.wikidata.org/prop/direct/P740", "location of formation"},
      {"http://www.wikidata.org/prop/direct/P1303", "instrument"},
      {"http://www.wikidata.org/prop/direct/P86", "composer"},
      {"http://www.wikidata.org/prop/direct/P131", "located in"},
  };
  return kLabels;
}

std::string local_name(std::string_view iri) {
  auto cut = iri.find_last_of("#/");
  if (cut == std::string_view::npos || cut + 1 >= iri.size()) return std::string(iri);
  return std::string(iri.substr(cut + 1));
}

std::string term_display(const Term& t) {
  if (const auto* i = as_iri(t)) return i->str();
  if (const auto* l = as_literal(t)) return l->lexical;
  return "_:" + std::get<BlankNode>(t).label;
}

// Primary category of an entity: first configured category it belongs to.
std::optional<std::string> primary_category(const MergedEntity& e, const PortalConfig& cfg) {
  for (const auto& c : cfg.categories) {
    if (e.categories.count(c.id)) return c.id;
  }
  if (!e.categories.empty()) return *e.categories.begin();
  return std::nullopt;
}

struct Source {
  std::string name;      // dataset id or URL as configured
  std::string endpoint;  // resolved URL
};

std::vector<Source> expansion_sources(const MergedEntity& e, const PortalConfig& cfg,
                                      std::set<std::string>& equivalence_predicates) {
  std::vector<Source> out;
  for (const auto& def : cfg.indexes) {
    if (!e.categories.count(def.category_id)) continue;
    equivalence_predicates.insert(def.equivalence_predicates.begin(), def.equivalence_predicates.end());
    for (const auto& ep : def.expansion_endpoints) {
      if (std::none_of(out.begin(), out.end(), [&](const Source& s) { return s.name == ep; })) {
        out.push_back({ep, cfg.resolve_endpoint(ep)});
      }
    }
  }
  return out;
}

class RelationBuilder {
 public:
  RelationBuilder(const MergedEntity& subject, const ReconciledStore& store, const PortalConfig& cfg)
      : subject_(subject), store_(store), cfg_(cfg) {}

  // Returns nullopt for self-links back into the subject's own cluster.
  std::optional<Relation> make(const Iri& predicate, const Term& object, const std::string& source,
                               Direction dir) const {
    Relation r{subject_.minted, predicate, predicate_label(predicate, cfg_), object, std::nullopt, std::nullopt,
               term_display(object), source, false, std::nullopt, dir};
    if (const Iri* iri = as_iri(object)) {
      auto it = store_.member_to_minted.find(iri->str());
      if (it != store_.member_to_minted.end()) {
        if (it->second == subject_.minted.str()) return std::nullopt;
        if (const MergedEntity* target = store_.find(it->second)) {
          r.object_entity = target->minted;
          r.object_category = primary_category(*target, cfg_);
          r.object_label = target->display_label;
        }
      }
    }
    return r;
  }

 private:
  const MergedEntity& subject_;
  const ReconciledStore& store_;
  const PortalConfig& cfg_;
};

std::string dedup_key(const Relation& r) {
  std::string key = std::string(to_string(r.direction)) + '\x1f' + r.predicate.str() + '\x1f';
  key += r.object_entity ? r.object_entity->str() : to_ntriples(r.object);
  key += '\x1f' + r.source;
  return key;
}

int member_priority(const MergedEntity& e, const Iri& member, const PortalConfig& cfg) {
  auto it = e.member_sources.find(member.str());
  if (it == e.member_sources.end()) return INT_MAX;
  int best = INT_MAX;
  for (const auto& ds : it->second) {
    if (const auto* d = cfg.find_dataset(ds)) best = std::min(best, d->priority);
  }
  return best;
}

}  // namespace

std::string_view to_string(Direction d) { return d == Direction::Outgoing ? "outgoing" : "incoming"; }

bool RelationFilter::matches(const Relation& r) const {
  if (relation_type && r.predicate.str() != *relation_type) return false;
  if (category && r.object_category != category) return false;
  if (source && r.source != *source) return false;
  return true;
}

std::vector<Relation> filter_relations(std::span<const Relation> relations, const RelationFilter& filter) {
  std::vector<Relation> out;
  std::copy_if(relations.begin(), relations.end(), std::back_inserter(out),
               [&](const Relation& r) { return filter.matches(r); });
  return out;
}

std::string predicate_label(const Iri& predicate, const PortalConfig& cfg) {
  if (auto it = cfg.predicate_labels.find(predicate.str()); it != cfg.predicate_labels.end()) return it->second;
  const auto& builtin = builtin_predicate_labels();
  if (auto it = builtin.find(predicate.str()); it != builtin.end()) return it->second;
  return local_name(predicate.str());
}

std::string relation_lookup_query(const Iri& member) {
  const std::string m = "<" + member.str() + ">";
  return "SELECT ?p ?o ?dir WHERE { { " + m + " ?p ?o BIND(\"out\" AS ?dir) } UNION { ?o ?p " + m +
         " BIND(\"in\" AS ?dir) } FILTER(isIRI(?o)) FILTER(?p != <" + std::string(vocab::kRdfType) + ">) }";
}

std::vector<Relation> expand_relations(const Iri& entity, const ReconciledStore& store, const PortalConfig& cfg,
                                       const FetchOptions& opts, ResultsFetcher& fetcher,
                                       std::vector<std::string>* errors, bool include_transitive) {
  const MergedEntity* subject = store.find(entity.str());
  if (!subject) throw Error(ErrorCode::UnknownEntity, "UnknownEntity(" + entity.str() + ")");

  std::set<std::string> equivalence;
  const auto sources = expansion_sources(*subject, cfg, equivalence);
  const RelationBuilder builder(*subject, store, cfg);
  const std::vector<std::string> order{"dir", "p", "o"};

  std::vector<Relation> out;
  std::set<std::string> seen;
  auto fetch_member = [&](const Iri& member, const Source& src, auto&& emit) {
    BindingTable table;
    try {
      table = execute_select(src.endpoint, relation_lookup_query(member), opts, fetcher, order);
    } catch (const std::exception& e) {
      if (errors) errors->push_back(member.str() + " @ " + src.name + ": " + e.what());
      return;
    }
    for (const auto& row : table.rows) {
      auto p = row.find("p");
      auto o = row.find("o");
      if (p == row.end() || o == row.end()) continue;
      const Iri* pred = as_iri(p->second);
      if (!pred || equivalence.count(pred->str())) continue;
      Direction dir = Direction::Outgoing;
      if (auto d = row.find("dir"); d != row.end()) {
        if (const auto* lit = as_literal(d->second); lit && lit->lexical == "in") dir = Direction::Incoming;
      }
      emit(*pred, o->second, dir);
    }
  };

  for (const auto& member : subject->members) {
    for (const auto& src : sources) {
      fetch_member(member, src, [&](const Iri& pred, const Term& obj, Direction dir) {
        auto r = builder.make(pred, obj, src.name, dir);
        if (r && seen.insert(dedup_key(*r)).second) out.push_back(std::move(*r));
      });
    }
  }

  if (include_transitive) {
    std::vector<Iri> hops;
    for (const auto& r : out) {
      if (r.direction == Direction::Outgoing && r.object_entity && std::find(hops.begin(), hops.end(), *r.object_entity) == hops.end()) {
        hops.push_back(*r.object_entity);
      }
    }
    for (const auto& via : hops) {
      const MergedEntity* mid = store.find(via.str());
      if (!mid) continue;
      for (const auto& member : mid->members) {
        for (const auto& src : sources) {
          fetch_member(member, src, [&](const Iri& pred, const Term& obj, Direction dir) {
            if (dir != Direction::Outgoing) return;
            auto r = builder.make(pred, obj, src.name, dir);
            if (!r || (r->object_entity && *r->object_entity == via)) return;
            r->transitive = true;
            r->via = via;
            if (seen.insert(dedup_key(*r)).second) out.push_back(std::move(*r));
          });
        }
      }
    }
  }
  return out;
}

std::size_t RenderedBlock::item_count() const {
  return texts.size() + media.size() + links.size() + relations.size();
}

const InsightTemplate* find_template(const MergedEntity& entity, const PortalConfig& cfg) {
  for (const auto& t : cfg.insights) {
    if (entity.categories.count(t.category_id)) return &t;
  }
  return nullptr;
}

std::string guess_media_type(std::string_view url) {
  auto q = url.find_first_of("?#");
  std::string path(url.substr(0, q));
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos || path.find('/', dot) != std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  static const std::set<std::string> kImage{"jpg", "jpeg", "png", "gif", "svg", "webp", "tif", "tiff"};
  static const std::set<std::string> kAudio{"mp3", "ogg", "oga", "wav", "flac", "m4a", "opus"};
  static const std::set<std::string> kVideo{"mp4", "webm", "ogv", "mov"};
  if (kImage.count(ext)) return "image/*";
  if (kAudio.count(ext)) return "audio/*";
  if (kVideo.count(ext)) return "video/*";
  return "";
}

InsightCard assemble_insight(const Iri& entity, const InsightTemplate& tmpl, const ReconciledStore& store,
                             const PortalConfig& cfg, const FetchOptions& opts, ResultsFetcher& fetcher) {
  const MergedEntity* subject = store.find(entity.str());
  if (!subject) throw Error(ErrorCode::UnknownEntity, "UnknownEntity(" + entity.str() + ")");
  if (!subject->categories.count(tmpl.category_id)) {
    throw Error(ErrorCode::NoTemplate, "NoTemplate(" + tmpl.category_id + " not a category of " + entity.str() + ")");
  }

  std::vector<Iri> members = subject->members;
  std::stable_sort(members.begin(), members.end(), [&](const Iri& a, const Iri& b) {
    return member_priority(*subject, a, cfg) < member_priority(*subject, b, cfg);
  });

  std::vector<const DatasetDescriptor*> by_priority;
  for (const auto& d : cfg.datasets) by_priority.push_back(&d);
  std::stable_sort(by_priority.begin(), by_priority.end(),
                   [](const auto* a, const auto* b) { return a->priority < b->priority; });

  auto targets_for = [&](const InsightBlock& block, const Iri& member) {
    std::vector<const DatasetDescriptor*> out;
    if (block.target_dataset != "all") {
      if (const auto* d = cfg.find_dataset(block.target_dataset)) out.push_back(d);
      return out;
    }
    auto it = subject->member_sources.find(member.str());
    for (const auto* d : by_priority) {
      if (it == subject->member_sources.end() || it->second.count(d->id)) out.push_back(d);
    }
    return out;
  };

  const RelationBuilder builder(*subject, store, cfg);
  InsightCard card{subject->minted, subject->display_label, {}};
  for (const auto& block : tmpl.blocks) {
    RenderedBlock rb{block.kind, block.title, block.description, block.size, {}, {}, {}, {}, std::nullopt};
    std::vector<std::string> failures;
    std::size_t attempts = 0;
    bool filled = false;

    for (const auto& member : members) {
      if (filled) break;
      for (const auto* ds : targets_for(block, member)) {
        ++attempts;
        BindingTable table;
        try {
          auto query = render_query(block.query, {{"ENTITY", member.str()}});
          table = execute_select(ds->endpoint, query, opts, fetcher);
        } catch (const std::exception& e) {
          failures.push_back(member.str() + " @ " + ds->id + ": " + e.what());
          continue;
        }
        for (const auto& row : table.rows) {
          const Literal* first_literal = nullptr;
          const Iri* first_iri = nullptr;
          for (const auto& var : table.vars) {
            auto it = row.find(var);
            if (it == row.end()) continue;
            if (!first_literal) first_literal = as_literal(it->second);
            if (!first_iri) first_iri = as_iri(it->second);
          }
          switch (block.kind) {
            case BlockKind::Text:
              if (first_literal && std::find(rb.texts.begin(), rb.texts.end(), first_literal->lexical) == rb.texts.end()) {
                rb.texts.push_back(first_literal->lexical);
              }
              break;
            case BlockKind::Media:
              if (first_iri) {
                std::string type;
                if (auto t = row.find("type"); t != row.end() && as_literal(t->second)) {
                  type = as_literal(t->second)->lexical;
                } else {
                  type = guess_media_type(first_iri->str());
                }
                MediaItem item{first_iri->str(),
                               first_literal && first_literal->lexical != type
                                   ? std::optional<std::string>(first_literal->lexical)
                                   : std::nullopt,
                               type};
                if (std::find(rb.media.begin(), rb.media.end(), item) == rb.media.end()) rb.media.push_back(item);
              }
              break;
            case BlockKind::Links:
              if (first_iri) {
                LinkItem item{first_literal ? first_literal->lexical : first_iri->str(), first_iri->str()};
                if (std::find(rb.links.begin(), rb.links.end(), item) == rb.links.end()) rb.links.push_back(item);
              }
              break;
            case BlockKind::Relations: {
              auto p = row.find("p");
              auto o = row.find("o");
              if (p == row.end() || o == row.end() || !as_iri(p->second)) break;
              auto r = builder.make(*as_iri(p->second), o->second, ds->id, Direction::Outgoing);
              if (r && std::find(rb.relations.begin(), rb.relations.end(), *r) == rb.relations.end()) {
                rb.relations.push_back(std::move(*r));
              }
              break;
            }
          }
        }
        if (rb.item_count() > 0) {
          filled = true;
          break;
        }
      }
    }
    if (!filled && !failures.empty()) {
      rb.error_note = std::to_string(failures.size()) + " of " + std::to_string(attempts) +
                      " source queries failed; first: " + failures.front();
    }
    card.blocks.push_back(std::move(rb));
  }
  return card;
}

}  // namespace lodweaver
