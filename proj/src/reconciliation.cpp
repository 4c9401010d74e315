#include "lodweaver/reconciliation.hpp"

#include <algorithm>
#include <climits>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "lodweaver/hash.hpp"
#include "lodweaver/text.hpp"
#include "lodweaver/union_find.hpp"
#include "parallel.hpp"

namespace lodweaver {

namespace {

constexpr std::size_t kMintedHexChars = 16;

std::size_t code_points(std::string_view s) { return utf8_boundaries(s).size(); }

// Lowest priority number wins, then fewer code points, then bytes.
bool better_label(int pa, const std::string& a, int pb, const std::string& b) {
  if (pa != pb) return pa < pb;
  auto la = code_points(a), lb = code_points(b);
  if (la != lb) return la < lb;
  return a < b;
}

}  // namespace

std::string MergedEntity::id() const {
  const auto& s = minted.str();
  return s.size() >= kMintedHexChars ? s.substr(s.size() - kMintedHexChars) : s;
}

std::string Linkset::to_ntriples() const { return serialize_linkset_ntriples(statements); }

const MergedEntity* ReconciledStore::find(std::string_view minted) const {
  auto it = entities.find(std::string(minted));
  return it == entities.end() ? nullptr : &it->second;
}

const MergedEntity* ReconciledStore::find_by_id(std::string_view hex_id) const {
  if (hex_id.size() != kMintedHexChars) return nullptr;
  return find(base_iri + "entity/" + std::string(hex_id));
}

std::string percent_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 0xF];
    }
  }
  return out;
}

std::vector<EntityGraph> build_entity_graphs(const IngestionSnapshot& snapshot, const std::string& base_iri) {
  std::map<std::string, EntityGraph> graphs;
  const Iri label_pred = parse_iri(vocab::kRdfsLabel);
  for (const auto& r : snapshot.records) {
    auto it = graphs.find(r.entity.str());
    if (it == graphs.end()) {
      Iri g = parse_iri(base_iri + "graph/" + percent_encode(r.entity.str()));
      it = graphs.emplace(r.entity.str(), EntityGraph{g, r.entity, {}, {}}).first;
    }
    EntityGraph& eg = it->second;
    auto add = [&](Iri pred, Term obj) {
      Statement st{eg.entity, std::move(pred), std::move(obj), eg.graph_iri};
      for (std::size_t i = 0; i < eg.statements.size(); ++i) {
        if (eg.statements[i] == st && eg.provenance[i] == r.dataset_id) return;
      }
      eg.statements.push_back(std::move(st));
      eg.provenance.push_back(r.dataset_id);
    };
    add(label_pred, Literal{r.label, {}, {}});
    for (const auto& [var, values] : r.attributes) {
      Iri pred = var == "label" ? label_pred : parse_iri(base_iri + "attribute/" + percent_encode(var));
      for (const auto& v : values) add(pred, v);
    }
  }
  std::vector<EntityGraph> out;
  out.reserve(graphs.size());
  for (auto& [k, g] : graphs) out.push_back(std::move(g));
  return out;
}

std::string equivalence_lookup_query(const Iri& subject, std::span<const std::string> predicates) {
  std::string preds;
  for (const auto& p : predicates) {
    if (!preds.empty()) preds += ", ";
    preds += "<" + parse_iri(p).str() + ">";
  }
  const std::string u = "<" + subject.str() + ">";
  return "SELECT DISTINCT ?o ?p WHERE { { " + u + " ?p ?o } UNION { ?o ?p " + u + " } FILTER(?p IN (" + preds +
         ")) FILTER(isIRI(?o)) }";
}

std::vector<EquivalenceStatement> collect_equivalences(const IngestionSnapshot& snapshot, const PortalConfig& cfg,
                                                       const FetchOptions& opts, ResultsFetcher& fetcher,
                                                       std::vector<std::string>* errors) {
  struct Lookup {
    std::string provenance;
    std::string endpoint;
    std::vector<std::string> predicates;
    Iri subject;
    int hop;
  };
  struct Outcome {
    std::vector<EquivalenceStatement> found;
    std::optional<std::string> error;
  };

  PoliteFetcher polite(fetcher);
  const std::vector<std::string> order{"o", "p"};
  std::set<std::string> ingested;
  for (const auto& r : snapshot.records) ingested.insert(r.entity.str());

  // (endpoint, predicates, subject) already issued, shared across indexes.
  std::set<std::tuple<std::string, std::vector<std::string>, std::string>> issued;
  std::vector<EquivalenceStatement> all;
  std::vector<std::string> errs;

  auto run = [&](std::vector<Lookup>& lookups) {
    std::vector<Outcome> outcomes(lookups.size());
    detail::run_bounded(lookups.size(), opts.parallelism, [&](std::size_t i) {
      const Lookup& l = lookups[i];
      try {
        auto table = execute_select(l.endpoint, equivalence_lookup_query(l.subject, l.predicates), opts, polite,
                                    order);
        for (const auto& row : table.rows) {
          auto o = row.find("o");
          auto p = row.find("p");
          if (o == row.end() || p == row.end()) continue;
          const Iri* other = as_iri(o->second);
          const Iri* pred = as_iri(p->second);
          if (!other || !pred || *other == l.subject) continue;
          if (std::find(l.predicates.begin(), l.predicates.end(), pred->str()) == l.predicates.end()) continue;
          outcomes[i].found.push_back({l.subject, *other, *pred, l.provenance, l.hop});
        }
      } catch (const std::exception& e) {
        outcomes[i].error = l.subject.str() + " @ " + l.provenance + ": " + e.what();
      }
    });
    std::vector<EquivalenceStatement> found;
    for (auto& o : outcomes) {
      if (o.error) errs.push_back(*o.error);
      std::move(o.found.begin(), o.found.end(), std::back_inserter(found));
    }
    return found;
  };

  for (const auto& def : cfg.indexes) {
    std::set<std::string> frontier;
    for (const auto& r : snapshot.records) {
      if (r.category_id == def.category_id) frontier.insert(r.entity.str());
    }
    std::set<std::string> seen = frontier;
    for (int hop = 0; hop <= def.expansion_depth && !frontier.empty(); ++hop) {
      std::vector<Lookup> lookups;
      for (const auto& subject : frontier) {
        for (const auto& ep : def.expansion_endpoints) {
          std::string endpoint = cfg.resolve_endpoint(ep);
          if (!issued.emplace(endpoint, def.equivalence_predicates, subject).second) continue;
          lookups.push_back({ep, endpoint, def.equivalence_predicates, parse_iri(subject), hop});
        }
      }
      auto found = run(lookups);
      std::set<std::string> next;
      for (const auto& st : found) {
        const auto& other = st.right.str();
        if (!ingested.count(other) && seen.insert(other).second) next.insert(other);
      }
      std::move(found.begin(), found.end(), std::back_inserter(all));
      frontier = std::move(next);
    }
  }

  // Undirected: orient each statement so left < right, keep the lowest hop.
  for (auto& st : all) {
    if (st.right < st.left) std::swap(st.left, st.right);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return std::tie(a.left, a.right, a.predicate, a.hop, a.provenance) <
           std::tie(b.left, b.right, b.predicate, b.hop, b.provenance);
  });
  all.erase(std::unique(all.begin(), all.end(),
                        [](const auto& a, const auto& b) {
                          return a.left == b.left && a.right == b.right && a.predicate == b.predicate;
                        }),
            all.end());

  std::sort(errs.begin(), errs.end());
  for (const auto& e : errs) spdlog::warn("equivalence lookup failed: {}", e);
  if (errors) std::move(errs.begin(), errs.end(), std::back_inserter(*errors));
  return all;
}

EquivalencePartition close_equivalences(std::span<const Iri> entities,
                                        std::span<const EquivalenceStatement> statements) {
  std::vector<Iri> nodes(entities.begin(), entities.end());
  for (const auto& st : statements) {
    nodes.push_back(st.left);
    nodes.push_back(st.right);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  auto index_of = [&](const Iri& iri) {
    return static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), iri) - nodes.begin());
  };
  DisjointSet<std::size_t> dsu(nodes.size());
  for (const auto& st : statements) dsu.unite(index_of(st.left), index_of(st.right));

  // Nodes are visited in sorted order, so member lists come out sorted
  // and clusters ordered by their first member.
  std::vector<std::size_t> slot(nodes.size(), SIZE_MAX);
  EquivalencePartition partition;
  partition.clusters.reserve(dsu.set_count());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::size_t root = dsu.find(i);
    if (slot[root] == SIZE_MAX) {
      slot[root] = partition.clusters.size();
      partition.clusters.emplace_back();
    }
    partition.clusters[slot[root]].members.push_back(nodes[i]);
  }
  return partition;
}

Iri mint_identity(std::span<const Iri> members, const std::string& base_iri) {
  std::vector<std::string> sorted;
  sorted.reserve(members.size());
  for (const auto& m : members) sorted.push_back(m.str());
  if (!std::is_sorted(sorted.begin(), sorted.end())) std::sort(sorted.begin(), sorted.end());
  std::string joined;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i) joined += '\n';
    joined += sorted[i];
  }
  return parse_iri(base_iri + "entity/" + sha256_hex(joined).substr(0, kMintedHexChars));
}

MergedEntity merge_records(const Cluster& cluster, std::span<const ExtractionRecord> records,
                           const std::map<std::string, int>& dataset_priority) {
  if (cluster.members.empty() || !cluster.minted) {
    throw Error(ErrorCode::EmptyCluster, "EmptyCluster(cluster has no members or no minted IRI)");
  }
  auto priority = [&](const std::string& ds) {
    auto it = dataset_priority.find(ds);
    return it == dataset_priority.end() ? INT_MAX : it->second;
  };

  MergedEntity e{*cluster.minted, {}, {}, {}, {}, cluster.members, {}, {}};
  std::map<std::string, int> label_rank;  // label -> best priority seen
  int best_priority = INT_MAX;
  for (const auto& r : records) {
    if (!std::binary_search(cluster.members.begin(), cluster.members.end(), r.entity)) continue;
    int p = priority(r.dataset_id);
    auto [it, inserted] = label_rank.emplace(r.label, p);
    if (!inserted) it->second = std::min(it->second, p);
    if (e.display_label.empty() || better_label(p, r.label, best_priority, e.display_label)) {
      e.display_label = r.label;
      best_priority = p;
    }
    e.categories.insert(r.category_id);
    e.sources.insert(r.dataset_id);
    e.member_sources[r.entity.str()].insert(r.dataset_id);
    for (const auto& [name, values] : r.attributes) {
      auto& dst = e.attributes[name];
      for (const auto& v : values) {
        AttributeValue av{v, r.dataset_id, r.entity};
        if (std::find(dst.begin(), dst.end(), av) == dst.end()) dst.push_back(std::move(av));
      }
    }
  }
  if (e.sources.empty()) {
    throw Error(ErrorCode::EmptyCluster, "EmptyCluster(no records for " + e.minted.str() + ")");
  }
  for (const auto& [label, p] : label_rank) e.all_labels.push_back(label);
  std::sort(e.all_labels.begin(), e.all_labels.end(), [&](const auto& a, const auto& b) {
    return better_label(label_rank[a], a, label_rank[b], b);
  });
  for (auto& [name, values] : e.attributes) std::sort(values.begin(), values.end());
  return e;
}

Linkset build_linkset(const EquivalencePartition& partition) {
  Linkset ls;
  const Iri same_as = parse_iri(vocab::kOwlSameAs);
  for (const auto& c : partition.clusters) {
    if (!c.minted) throw Error(ErrorCode::EmptyCluster, "EmptyCluster(cluster without minted IRI)");
    for (const auto& m : c.members) ls.statements.push_back(Statement{*c.minted, same_as, m, std::nullopt});
  }
  std::sort(ls.statements.begin(), ls.statements.end());
  return ls;
}

ReconciledStore reconcile(const IngestionSnapshot& snapshot, const PortalConfig& cfg, const FetchOptions& opts,
                          ResultsFetcher& fetcher) {
  if (snapshot.records.empty()) {
    throw Error(ErrorCode::NoUsablePairs, "NoUsablePairs(snapshot has no records)");
  }
  ReconciledStore store;
  store.base_iri = cfg.base_iri;
  store.stats.records = snapshot.records.size();

  store.graphs = build_entity_graphs(snapshot, cfg.base_iri);
  store.stats.entity_graphs = store.graphs.size();

  auto statements = collect_equivalences(snapshot, cfg, opts, fetcher, &store.stats.lookup_errors);
  store.stats.equivalence_statements = statements.size();

  std::vector<Iri> entities;
  entities.reserve(store.graphs.size());
  for (const auto& g : store.graphs) entities.push_back(g.entity);
  EquivalencePartition partition = close_equivalences(entities, statements);

  // Records grouped by IRI; an IRI seen in several datasets is one node.
  std::map<std::string, std::vector<const ExtractionRecord*>> by_iri;
  for (const auto& r : snapshot.records) by_iri[r.entity.str()].push_back(&r);
  for (const auto& [iri, recs] : by_iri) {
    std::set<std::string> ds;
    for (const auto* r : recs) ds.insert(r->dataset_id);
    if (ds.size() > 1) store.stats.multi_source_iris.push_back(iri);
  }

  const auto priorities = cfg.dataset_priorities();
  std::set<std::string> minted_seen;
  for (auto& cluster : partition.clusters) {
    cluster.minted = mint_identity(cluster.members, cfg.base_iri);
    if (!minted_seen.insert(cluster.minted->str()).second) {
      throw Error(ErrorCode::MintCollision, "MintCollision(" + cluster.minted->str() + ")");
    }
    std::vector<ExtractionRecord> recs;
    std::map<std::pair<std::string, std::string>, std::set<std::string>> slot_members;
    for (const auto& m : cluster.members) {
      auto it = by_iri.find(m.str());
      if (it == by_iri.end()) continue;
      for (const auto* r : it->second) {
        recs.push_back(*r);
        cluster.categories.insert(r->category_id);
        cluster.per_source_labels[r->dataset_id].push_back(r->label);
        slot_members[{r->dataset_id, r->category_id}].insert(m.str());
      }
    }
    for (const auto& [slot, members] : slot_members) {
      if (members.size() > 1) {
        store.stats.conflicts.push_back({cluster.minted->str(), slot.first, slot.second,
                                         std::vector<std::string>(members.begin(), members.end())});
      }
    }
    MergedEntity merged = merge_records(cluster, recs, priorities);
    for (const auto& m : cluster.members) store.member_to_minted.emplace(m.str(), cluster.minted->str());
    store.entities.emplace(cluster.minted->str(), std::move(merged));
  }
  store.stats.clusters = partition.clusters.size();
  store.linkset = build_linkset(partition);
  store.stats.linkset_size = store.linkset.statements.size();
  return store;
}

}  // namespace lodweaver
