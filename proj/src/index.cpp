#include "lodweaver/index.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "lodweaver/error.hpp"
#include "lodweaver/text.hpp"

namespace lodweaver {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(MatchClass c) {
  return c == MatchClass::LabelPrefix ? "label_prefix" : "token_prefix";
}

std::set<std::string> IndexEntry::normalized_keys() const {
  std::set<std::string> out = label_keys;
  out.insert(token_keys.begin(), token_keys.end());
  return out;
}

CategoryIndex::CategoryIndex(std::string category_id, std::uint64_t generation, std::vector<IndexEntry> entries)
    : category_id_(std::move(category_id)), generation_(generation), entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.minted < b.minted; });
  for (std::uint32_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    for (const auto& k : e.label_keys) keys_.push_back({k, i, MatchClass::LabelPrefix});
    for (const auto& k : e.token_keys) {
      if (!e.label_keys.count(k)) keys_.push_back({k, i, MatchClass::TokenPrefix});
    }
  }
  std::sort(keys_.begin(), keys_.end(),
            [](const auto& a, const auto& b) { return std::tie(a.key, a.entry) < std::tie(b.key, b.entry); });
}

IndexMap build_indexes(std::span<const MergedEntity> entities, const PortalConfig& cfg, std::uint64_t generation) {
  std::map<std::string, std::vector<IndexEntry>> per_category;
  for (const auto& c : cfg.categories) per_category[c.id];

  for (const auto& e : entities) {
    IndexEntry base{e.minted, e.display_label, {}, e.sources, {}, {}};
    for (const auto& label : e.all_labels) {
      auto norm = normalize_label(label);
      if (norm.empty()) continue;
      base.label_keys.insert(norm);
      for (auto& t : label_tokens(norm)) base.token_keys.insert(std::move(t));
    }
    if (base.label_keys.empty()) continue;
    for (const auto& cat : e.categories) {
      auto it = per_category.find(cat);
      if (it == per_category.end()) continue;
      IndexEntry entry = base;
      entry.category_id = cat;
      it->second.push_back(std::move(entry));
    }
  }

  IndexMap out;
  for (auto& [cat, entries] : per_category) out.emplace(cat, CategoryIndex(cat, generation, std::move(entries)));
  return out;
}

IndexMap build_indexes(const ReconciledStore& store, const PortalConfig& cfg, std::uint64_t generation) {
  std::vector<MergedEntity> entities;
  entities.reserve(store.entities.size());
  for (const auto& [k, e] : store.entities) entities.push_back(e);
  return build_indexes(entities, cfg, generation);
}

std::vector<Suggestion> suggest(const CategoryIndex& index, std::string_view q, std::size_t limit) {
  const std::string nq = normalize_label(q);
  if (nq.empty()) throw Error(ErrorCode::EmptyQuery, "EmptyQuery");
  if (limit == 0) return {};

  const auto& keys = index.keys();
  auto it = std::lower_bound(keys.begin(), keys.end(), nq,
                             [](const IndexKey& k, const std::string& v) { return k.key < v; });
  std::unordered_map<std::uint32_t, MatchClass> best;
  for (; it != keys.end() && it->key.starts_with(nq); ++it) {
    auto [slot, inserted] = best.emplace(it->entry, it->match);
    if (!inserted && it->match == MatchClass::LabelPrefix) slot->second = MatchClass::LabelPrefix;
  }

  std::vector<std::pair<std::uint32_t, MatchClass>> hits(best.begin(), best.end());
  const auto& entries = index.entries();
  auto cp = [](const std::string& s) { return utf8_boundaries(s).size(); };
  std::sort(hits.begin(), hits.end(), [&](const auto& a, const auto& b) {
    const IndexEntry& ea = entries[a.first];
    const IndexEntry& eb = entries[b.first];
    if (a.second != b.second) return a.second == MatchClass::LabelPrefix;
    if (ea.source_count() != eb.source_count()) return ea.source_count() > eb.source_count();
    auto la = cp(ea.display_label), lb = cp(eb.display_label);
    if (la != lb) return la < lb;
    if (ea.display_label != eb.display_label) return ea.display_label < eb.display_label;
    return ea.minted < eb.minted;
  });
  if (hits.size() > limit) hits.resize(limit);

  std::vector<Suggestion> out;
  out.reserve(hits.size());
  for (const auto& [i, cls] : hits) {
    const IndexEntry& e = entries[i];
    out.push_back(Suggestion{e.minted, e.display_label, e.category_id, e.sources, cls});
  }
  return out;
}

void save_indexes(const IndexMap& indexes, const fs::path& dir) {
  fs::create_directories(dir);
  std::uint64_t generation = 0;
  json categories = json::array();
  for (const auto& [cat, index] : indexes) {
    generation = std::max(generation, index.generation());
    categories.push_back(cat);
    std::ofstream out(dir / (cat + ".index.ndjson"), std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "IoError(cannot write index for " + cat + ")");
    out << json{{"format", "lodweaver-index"},
                {"version", kIndexFormatVersion},
                {"category_id", cat},
                {"generation", index.generation()},
                {"entries", index.size()},
                {"keys", index.keys().size()}}
               .dump()
        << '\n';
    for (std::size_t i = 0; i < index.entries().size(); ++i) {
      const auto& e = index.entries()[i];
      out << json{{"entry", i},
                  {"minted", e.minted.str()},
                  {"display_label", e.display_label},
                  {"sources", e.sources},
                  {"label_keys", e.label_keys},
                  {"token_keys", e.token_keys}}
                 .dump()
          << '\n';
    }
    for (const auto& k : index.keys()) {
      out << json{{"key", k.key}, {"entry", k.entry}, {"match", to_string(k.match)}}.dump() << '\n';
    }
  }
  std::ofstream manifest(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  manifest << json{{"format", "lodweaver-index"},
                   {"version", kIndexFormatVersion},
                   {"generation", generation},
                   {"categories", categories}}
                  .dump(2)
           << '\n';
}

std::uint64_t read_index_generation(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) return 0;
  std::stringstream buf;
  buf << in.rdbuf();
  json j = json::parse(buf.str(), nullptr, false);
  if (!j.is_object() || !j.contains("generation") || !j["generation"].is_number_unsigned()) return 0;
  return j["generation"].get<std::uint64_t>();
}

IndexMap load_indexes(const fs::path& dir) {
  std::ifstream min(dir / "manifest.json", std::ios::binary);
  if (!min) throw Error(ErrorCode::IoError, "IoError(missing " + (dir / "manifest.json").string() + ")");
  std::stringstream mbuf;
  mbuf << min.rdbuf();
  json manifest = json::parse(mbuf.str(), nullptr, false);
  if (!manifest.is_object() || manifest.value("version", -1) != kIndexFormatVersion) {
    throw Error(ErrorCode::SchemaVersionMismatch, "SchemaVersionMismatch(index manifest)");
  }

  IndexMap out;
  for (const auto& cat_json : manifest.at("categories")) {
    const auto cat = cat_json.get<std::string>();
    const auto path = dir / (cat + ".index.ndjson");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "IoError(cannot read " + path.string() + ")");
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::SchemaVersionMismatch, "SchemaVersionMismatch(empty index)");
    json header = json::parse(line, nullptr, false);
    if (!header.is_object() || header.value("version", -1) != kIndexFormatVersion) {
      throw Error(ErrorCode::SchemaVersionMismatch, "SchemaVersionMismatch(" + path.string() + ")");
    }
    try {
      const auto n_entries = header.at("entries").get<std::size_t>();
      const auto n_keys = header.at("keys").get<std::size_t>();
      std::vector<IndexEntry> entries;
      for (std::size_t i = 0; i < n_entries; ++i) {
        if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "IoError(" + path.string() + " truncated)");
        json j = json::parse(line);
        entries.push_back(IndexEntry{parse_iri(j.at("minted").get<std::string>()),
                                     j.at("display_label").get<std::string>(), cat,
                                     j.at("sources").get<std::set<std::string>>(),
                                     j.at("label_keys").get<std::set<std::string>>(),
                                     j.at("token_keys").get<std::set<std::string>>()});
      }
      CategoryIndex index(cat, header.at("generation").get<std::uint64_t>(), std::move(entries));
      // The key section must agree with what the entries imply.
      std::size_t seen = 0;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (seen >= index.keys().size() || index.keys()[seen].key != j.at("key").get<std::string>()) {
          throw Error(ErrorCode::IoError, "IoError(" + path.string() + " key section does not match entries)");
        }
        ++seen;
      }
      if (seen != n_keys || seen != index.keys().size()) {
        throw Error(ErrorCode::IoError, "IoError(" + path.string() + " truncated key section)");
      }
      out.emplace(cat, std::move(index));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::IoError, "IoError(" + path.string() + ": " + e.what() + ")");
    }
  }
  return out;
}

}  // namespace lodweaver
