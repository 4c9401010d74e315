#include <fstream>
#include <sstream>

#include "lodweaver/error.hpp"
#include "lodweaver/reconciliation.hpp"

namespace lodweaver {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "IoError(cannot write " + p.string() + ")");
  return out;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "IoError(cannot read " + p.string() + ")");
  return in;
}

json stats_to_json(const ReconcileStats& s) {
  json conflicts = json::array();
  for (const auto& c : s.conflicts) {
    conflicts.push_back(
        {{"minted", c.minted}, {"dataset_id", c.dataset_id}, {"category_id", c.category_id}, {"members", c.members}});
  }
  return {{"records", s.records},
          {"entity_graphs", s.entity_graphs},
          {"equivalence_statements", s.equivalence_statements},
          {"clusters", s.clusters},
          {"linkset_size", s.linkset_size},
          {"multi_source_iris", s.multi_source_iris},
          {"conflicts", conflicts},
          {"lookup_errors", s.lookup_errors}};
}

ReconcileStats stats_from_json(const json& j) {
  ReconcileStats s;
  s.records = j.at("records").get<std::size_t>();
  s.entity_graphs = j.at("entity_graphs").get<std::size_t>();
  s.equivalence_statements = j.at("equivalence_statements").get<std::size_t>();
  s.clusters = j.at("clusters").get<std::size_t>();
  s.linkset_size = j.at("linkset_size").get<std::size_t>();
  s.multi_source_iris = j.at("multi_source_iris").get<std::vector<std::string>>();
  for (const auto& c : j.at("conflicts")) {
    s.conflicts.push_back({c.at("minted").get<std::string>(), c.at("dataset_id").get<std::string>(),
                           c.at("category_id").get<std::string>(), c.at("members").get<std::vector<std::string>>()});
  }
  s.lookup_errors = j.at("lookup_errors").get<std::vector<std::string>>();
  return s;
}

}  // namespace

json entity_to_json(const MergedEntity& e) {
  std::vector<std::string> members;
  for (const auto& m : e.members) members.push_back(m.str());
  json attrs = json::object();
  for (const auto& [name, values] : e.attributes) {
    json arr = json::array();
    for (const auto& v : values) {
      arr.push_back({{"value", term_to_json(v.value)}, {"dataset_id", v.dataset_id}, {"member", v.member.str()}});
    }
    attrs[name] = std::move(arr);
  }
  return {{"minted", e.minted.str()},
          {"id", e.id()},
          {"display_label", e.display_label},
          {"all_labels", e.all_labels},
          {"categories", e.categories},
          {"sources", e.sources},
          {"members", members},
          {"member_sources", e.member_sources},
          {"attributes", attrs}};
}

MergedEntity entity_from_json(const json& j) {
  MergedEntity e{parse_iri(j.at("minted").get<std::string>()), j.at("display_label").get<std::string>(),
                 j.at("all_labels").get<std::vector<std::string>>(),
                 j.at("categories").get<std::set<std::string>>(),
                 j.at("sources").get<std::set<std::string>>(),
                 {},
                 {},
                 j.at("member_sources").get<std::map<std::string, std::set<std::string>>>()};
  for (const auto& m : j.at("members")) e.members.push_back(parse_iri(m.get<std::string>()));
  for (const auto& [name, values] : j.at("attributes").items()) {
    auto& dst = e.attributes[name];
    for (const auto& v : values) {
      dst.push_back({term_from_json(v.at("value")), v.at("dataset_id").get<std::string>(),
                     parse_iri(v.at("member").get<std::string>())});
    }
  }
  return e;
}

void save_store(const ReconciledStore& store, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "entities.ndjson");
    out << json{{"format", "lodweaver-store"}, {"schema_version", kStoreSchemaVersion}, {"base_iri", store.base_iri}}
               .dump()
        << '\n';
    for (const auto& [minted, e] : store.entities) out << entity_to_json(e).dump() << '\n';
    out << json{{"type", "end"}, {"entities", store.entities.size()}}.dump() << '\n';
  }
  {
    auto out = open_out(dir / "linkset.nt");
    out << store.linkset.to_ntriples();
  }
  {
    auto out = open_out(dir / "graphs.nq");
    for (const auto& g : store.graphs) {
      for (std::size_t i = 0; i < g.statements.size(); ++i) {
        out << format_nquad(g.statements[i]) << " # source=" << g.provenance[i] << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "stats.json");
    out << stats_to_json(store.stats).dump(2) << '\n';
  }
}

ReconciledStore load_store(const fs::path& dir) {
  ReconciledStore store;
  auto fail = [&](const std::string& file, const std::string& why) {
    return Error(ErrorCode::IoError, "IoError(" + (dir / file).string() + ", " + why + ")");
  };

  {
    auto in = open_in(dir / "entities.ndjson");
    std::string line;
    if (!std::getline(in, line)) {
      throw Error(ErrorCode::SchemaVersionMismatch, "SchemaVersionMismatch(entities.ndjson, missing header)");
    }
    json header = json::parse(line, nullptr, false);
    if (!header.is_object() || header.value("format", "") != "lodweaver-store" ||
        header.value("schema_version", -1) != kStoreSchemaVersion) {
      throw Error(ErrorCode::SchemaVersionMismatch, "SchemaVersionMismatch(entities.ndjson)");
    }
    store.base_iri = header.at("base_iri").get<std::string>();
    bool ended = false;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        json j = json::parse(line);
        if (j.contains("type") && j["type"] == "end") {
          if (j.at("entities").get<std::size_t>() != store.entities.size()) throw fail("entities.ndjson", "count mismatch");
          ended = true;
          break;
        }
        MergedEntity e = entity_from_json(j);
        auto key = e.minted.str();
        store.entities.emplace(std::move(key), std::move(e));
      } catch (const json::exception& e) {
        throw fail("entities.ndjson", e.what());
      }
    }
    if (!ended) throw fail("entities.ndjson", "truncated (no end marker)");
  }

  {
    auto in = open_in(dir / "linkset.nt");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Statement st = parse_nquad(line);
      const auto* minted = std::get_if<Iri>(&st.subject);
      const auto* member = as_iri(st.object);
      if (!minted || !member || st.predicate.str() != vocab::kOwlSameAs) throw fail("linkset.nt", "unexpected triple");
      store.member_to_minted.emplace(member->str(), minted->str());
      store.linkset.statements.push_back(std::move(st));
    }
  }
  for (const auto& [minted, e] : store.entities) {
    for (const auto& m : e.members) {
      auto it = store.member_to_minted.find(m.str());
      if (it == store.member_to_minted.end() || it->second != minted) {
        throw fail("linkset.nt", "linkset disagrees with entities for " + m.str());
      }
    }
  }

  {
    auto in = open_in(dir / "graphs.nq");
    std::string line;
    std::map<std::string, std::size_t> slot;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::string comment;
      Statement st = parse_nquad(line, &comment);
      const auto* subject = std::get_if<Iri>(&st.subject);
      if (!st.graph || !subject) throw fail("graphs.nq", "quad without graph or IRI subject");
      auto source = comment.find("source=");
      std::string ds = source == std::string::npos ? std::string{} : comment.substr(source + 7);
      auto [it, inserted] = slot.emplace(st.graph->str(), store.graphs.size());
      if (inserted) store.graphs.push_back(EntityGraph{*st.graph, *subject, {}, {}});
      store.graphs[it->second].statements.push_back(std::move(st));
      store.graphs[it->second].provenance.push_back(ds);
    }
  }

  {
    auto in = open_in(dir / "stats.json");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      store.stats = stats_from_json(json::parse(buf.str()));
    } catch (const json::exception& e) {
      throw fail("stats.json", e.what());
    }
  }
  return store;
}

}  // namespace lodweaver
