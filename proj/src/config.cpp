#include "lodweaver/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "lodweaver/error.hpp"
#include "lodweaver/rdf.hpp"

namespace lodweaver {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::Text: return "text";
    case BlockKind::Media: return "media";
    case BlockKind::Links: return "links";
    case BlockKind::Relations: return "relations";
  }
  return "text";
}

std::string_view to_string(BlockSize size) {
  switch (size) {
    case BlockSize::Small: return "small";
    case BlockSize::Medium: return "medium";
    case BlockSize::Large: return "large";
  }
  return "medium";
}

namespace {

// Reads typed fields out of a JSON object, reporting failures as
// ParseError(file, json-pointer: reason). Consumed keys are tracked so the
// remainder can be preserved as `extra`.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string file, std::string path)
      : obj_(obj), file_(std::move(file)), path_(std::move(path)) {
    if (!obj_.is_object()) fail("", "expected an object");
  }

  [[noreturn]] void fail(std::string_view key, std::string_view reason) const {
    std::string where = path_;
    if (!key.empty()) where += "/" + std::string(key);
    if (where.empty()) where = "/";
    throw ConfigError(ErrorCode::ParseError, file_, where, std::string(reason));
  }

  const json* find(std::string_view key) {
    seen_.insert(std::string(key));
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string str(std::string_view key, std::optional<std::string> fallback = std::nullopt) {
    const json* v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      fail(key, "missing required string");
    }
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
  }

  std::optional<std::string> opt_str(std::string_view key) {
    const json* v = find(key);
    if (!v || v->is_null()) return std::nullopt;
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
  }

  int integer(std::string_view key, std::optional<int> fallback = std::nullopt) {
    const json* v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      fail(key, "missing required integer");
    }
    if (!v->is_number_integer()) fail(key, "expected an integer");
    return v->get<int>();
  }

  std::vector<std::string> str_list(std::string_view key, std::vector<std::string> fallback = {}) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_array()) fail(key, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *v) {
      if (!e.is_string()) fail(key, "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  std::map<std::string, std::string> str_map(std::string_view key) {
    const json* v = find(key);
    if (!v) return {};
    if (!v->is_object()) fail(key, "expected an object of strings");
    std::map<std::string, std::string> out;
    for (const auto& [k, e] : v->items()) {
      if (!e.is_string()) fail(std::string(key) + "/" + k, "expected a string");
      out.emplace(k, e.get<std::string>());
    }
    return out;
  }

  const json& array(std::string_view key) {
    const json* v = find(key);
    if (!v) return empty_array();
    if (!v->is_array()) fail(key, "expected an array");
    return *v;
  }

  json rest() const {
    json out = json::object();
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) out[k] = v;
    }
    return out;
  }

  std::string child(std::string_view key, std::size_t index) const {
    return path_ + "/" + std::string(key) + "/" + std::to_string(index);
  }

  const std::string& file() const { return file_; }

 private:
  static const json& empty_array() {
    static const json kEmpty = json::array();
    return kEmpty;
  }

  const json& obj_;
  std::string file_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

json read_json_file(const fs::path& root, std::string_view name) {
  fs::path p = root / name;
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError(ErrorCode::MissingFile, std::string(name), "", "");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(ErrorCode::ParseError, std::string(name), "byte " + std::to_string(e.byte),
                      e.what());
  }
}

void merge_extra(json& target, const json& extra) {
  for (const auto& [k, v] : extra.items()) target[k] = v;
}

BlockKind parse_kind(ObjectReader& r) {
  auto s = r.str("kind");
  if (s == "text") return BlockKind::Text;
  if (s == "media") return BlockKind::Media;
  if (s == "links") return BlockKind::Links;
  if (s == "relations") return BlockKind::Relations;
  r.fail("kind", "must be one of text, media, links, relations");
}

BlockSize parse_size(ObjectReader& r) {
  auto s = r.str("size", "medium");
  if (s == "small") return BlockSize::Small;
  if (s == "medium") return BlockSize::Medium;
  if (s == "large") return BlockSize::Large;
  r.fail("size", "must be one of small, medium, large");
}

void load_datasets(const json& doc, PortalConfig& cfg) {
  ObjectReader top(doc, "datasets.json", "");
  cfg.base_iri = top.str("base_iri");
  cfg.cors_origins = top.str_list("cors_origins");
  const json& arr = top.array("datasets");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    ObjectReader r(arr[i], top.file(), top.child("datasets", i));
    DatasetDescriptor d;
    d.id = r.str("id");
    d.label = r.str("label", d.id);
    d.endpoint = r.str("endpoint");
    d.priority = r.integer("priority", 0);
    if (const json* m = r.find("metadata")) {
      if (!m->is_object()) r.fail("metadata", "expected an object");
      d.metadata = *m;
    }
    merge_extra(d.metadata, r.rest());
    cfg.datasets.push_back(std::move(d));
  }
}

void load_categories(const json& doc, PortalConfig& cfg) {
  ObjectReader top(doc, "categories.json", "");
  const json& arr = top.array("categories");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    ObjectReader r(arr[i], top.file(), top.child("categories", i));
    CategoryDef c;
    c.id = r.str("id");
    c.label = r.str("label", c.id);
    c.color = r.str("color");
    c.sound_url = r.opt_str("sound_url");
    c.extraction_queries = r.str_map("extraction_queries");
    c.extra = r.rest();
    cfg.categories.push_back(std::move(c));
  }
}

void load_indexes(const json& doc, PortalConfig& cfg) {
  ObjectReader top(doc, "indexes.json", "");
  cfg.predicate_labels = top.str_map("predicate_labels");
  const json& arr = top.array("indexes");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    ObjectReader r(arr[i], top.file(), top.child("indexes", i));
    IndexDef x;
    x.category_id = r.str("category_id");
    x.equivalence_predicates = r.str_list(
        "equivalence_predicates",
        {std::string(vocab::kOwlSameAs), std::string(vocab::kSkosExactMatch)});
    x.expansion_endpoints = r.str_list("expansion_endpoints");
    x.expansion_depth = r.integer("expansion_depth", 1);
    x.extra = r.rest();
    cfg.indexes.push_back(std::move(x));
  }
}

void load_highlights(const json& doc, PortalConfig& cfg) {
  ObjectReader top(doc, "highlights.json", "");
  if (const json* intro = top.find("intro")) {
    ObjectReader r(*intro, top.file(), "/intro");
    cfg.intro.title = r.str("title", "");
    cfg.intro.message = r.str("message", "");
  }
  const json& boxes = top.array("carousel");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    ObjectReader r(boxes[i], top.file(), top.child("carousel", i));
    CarouselBox b;
    b.title = r.str("title");
    b.description = r.str("description", "");
    b.link = r.str("link");
    b.image = r.opt_str("image");
    b.extra = r.rest();
    cfg.carousel.push_back(std::move(b));
  }
  const json& arr = top.array("highlights");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    ObjectReader r(arr[i], top.file(), top.child("highlights", i));
    HighlightDef h;
    h.category_id = r.str("category_id");
    h.entity_iri = r.str("entity_iri");
    h.caption = r.str("caption", "");
    h.linked_to = r.opt_str("linked_to");
    h.extra = r.rest();
    cfg.highlights.push_back(std::move(h));
  }
}

void load_insights(const json& doc, PortalConfig& cfg) {
  ObjectReader top(doc, "insights.json", "");
  const json& arr = top.array("templates");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    ObjectReader r(arr[i], top.file(), top.child("templates", i));
    InsightTemplate t;
    t.category_id = r.str("category_id");
    const json& blocks = r.array("blocks");
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      ObjectReader br(blocks[j], top.file(), r.child("blocks", j));
      InsightBlock b;
      b.kind = parse_kind(br);
      b.title = br.str("title", "");
      b.description = br.opt_str("description");
      b.size = parse_size(br);
      b.query = br.str("query");
      b.target_dataset = br.str("target_dataset", "all");
      b.extra = br.rest();
      t.blocks.push_back(std::move(b));
    }
    t.extra = r.rest();
    cfg.insights.push_back(std::move(t));
  }
}

void check_references(const PortalConfig& cfg) {
  auto dangling = [](const char* file, const char* field, const std::string& value) {
    throw ConfigError(ErrorCode::InvalidReference, file, field, value);
  };
  for (const auto& c : cfg.categories) {
    for (const auto& [ds, q] : c.extraction_queries) {
      if (!cfg.find_dataset(ds)) dangling("categories.json", "extraction_queries", ds);
    }
  }
  for (const auto& x : cfg.indexes) {
    if (!cfg.find_category(x.category_id)) dangling("indexes.json", "category_id", x.category_id);
    for (const auto& e : x.expansion_endpoints) {
      if (!cfg.find_dataset(e) && !is_absolute_http_url(e)) {
        dangling("indexes.json", "expansion_endpoints", e);
      }
    }
  }
  for (const auto& h : cfg.highlights) {
    if (!cfg.find_category(h.category_id)) dangling("highlights.json", "category_id", h.category_id);
  }
  for (const auto& t : cfg.insights) {
    if (!cfg.find_category(t.category_id)) dangling("insights.json", "category_id", t.category_id);
    for (const auto& b : t.blocks) {
      if (b.target_dataset != "all" && !cfg.find_dataset(b.target_dataset)) {
        dangling("insights.json", "target_dataset", b.target_dataset);
      }
    }
  }
}

void write_json_file(const fs::path& root, std::string_view name, const json& doc) {
  std::ofstream out(root / name, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "IoError(cannot write " + (root / name).string() + ")");
  out << doc.dump(2) << '\n';
}

json with_extra(json obj, const json& extra) {
  for (const auto& [k, v] : extra.items()) {
    if (!obj.contains(k)) obj[k] = v;
  }
  return obj;
}

bool is_hex_color(std::string_view s) {
  if (s.size() != 7 || s[0] != '#') return false;
  return std::all_of(s.begin() + 1, s.end(), [](unsigned char c) { return std::isxdigit(c); });
}

bool contains_var(std::string_view query, std::string_view var) {
  std::size_t pos = 0;
  while ((pos = query.find(var, pos)) != std::string_view::npos) {
    std::size_t end = pos + var.size();
    if (end >= query.size() || !(std::isalnum(static_cast<unsigned char>(query[end])) || query[end] == '_')) {
      return true;
    }
    pos = end;
  }
  return false;
}

}  // namespace

const DatasetDescriptor* PortalConfig::find_dataset(std::string_view id) const {
  auto it = std::find_if(datasets.begin(), datasets.end(), [&](const auto& d) { return d.id == id; });
  return it == datasets.end() ? nullptr : &*it;
}

const CategoryDef* PortalConfig::find_category(std::string_view id) const {
  auto it = std::find_if(categories.begin(), categories.end(), [&](const auto& c) { return c.id == id; });
  return it == categories.end() ? nullptr : &*it;
}

const IndexDef* PortalConfig::find_index(std::string_view category_id) const {
  auto it = std::find_if(indexes.begin(), indexes.end(),
                         [&](const auto& x) { return x.category_id == category_id; });
  return it == indexes.end() ? nullptr : &*it;
}

std::string PortalConfig::resolve_endpoint(std::string_view dataset_or_url) const {
  if (const auto* d = find_dataset(dataset_or_url)) return d->endpoint;
  return std::string(dataset_or_url);
}

std::map<std::string, int> PortalConfig::dataset_priorities() const {
  std::map<std::string, int> out;
  for (const auto& d : datasets) out.emplace(d.id, d.priority);
  return out;
}

bool is_absolute_http_url(std::string_view text) {
  std::string_view rest;
  if (text.starts_with("http://")) rest = text.substr(7);
  else if (text.starts_with("https://")) rest = text.substr(8);
  else return false;
  if (rest.empty() || rest[0] == '/') return false;
  return std::none_of(text.begin(), text.end(), [](unsigned char c) { return c <= 0x20; });
}

PortalConfig load_portal_config(const fs::path& root_dir) {
  // Check presence of all five before parsing any, so the first missing
  // file is reported in a stable order.
  for (auto name : kConfigFiles) {
    if (!fs::is_regular_file(root_dir / name)) {
      throw ConfigError(ErrorCode::MissingFile, std::string(name), "", "");
    }
  }
  PortalConfig cfg;
  load_datasets(read_json_file(root_dir, "datasets.json"), cfg);
  load_categories(read_json_file(root_dir, "categories.json"), cfg);
  load_indexes(read_json_file(root_dir, "indexes.json"), cfg);
  load_highlights(read_json_file(root_dir, "highlights.json"), cfg);
  load_insights(read_json_file(root_dir, "insights.json"), cfg);
  check_references(cfg);
  return cfg;
}

void write_portal_config(const PortalConfig& cfg, const fs::path& root_dir) {
  fs::create_directories(root_dir);

  json datasets = json::array();
  for (const auto& d : cfg.datasets) {
    datasets.push_back({{"id", d.id},
                        {"label", d.label},
                        {"endpoint", d.endpoint},
                        {"priority", d.priority},
                        {"metadata", d.metadata}});
  }
  write_json_file(root_dir, "datasets.json",
                  {{"base_iri", cfg.base_iri}, {"cors_origins", cfg.cors_origins}, {"datasets", datasets}});

  json categories = json::array();
  for (const auto& c : cfg.categories) {
    json j{{"id", c.id}, {"label", c.label}, {"color", c.color}, {"extraction_queries", c.extraction_queries}};
    if (c.sound_url) j["sound_url"] = *c.sound_url;
    categories.push_back(with_extra(std::move(j), c.extra));
  }
  write_json_file(root_dir, "categories.json", {{"categories", categories}});

  json indexes = json::array();
  for (const auto& x : cfg.indexes) {
    indexes.push_back(with_extra({{"category_id", x.category_id},
                                  {"equivalence_predicates", x.equivalence_predicates},
                                  {"expansion_endpoints", x.expansion_endpoints},
                                  {"expansion_depth", x.expansion_depth}},
                                 x.extra));
  }
  write_json_file(root_dir, "indexes.json",
                  {{"indexes", indexes}, {"predicate_labels", cfg.predicate_labels}});

  json carousel = json::array();
  for (const auto& b : cfg.carousel) {
    json j{{"title", b.title}, {"description", b.description}, {"link", b.link}};
    if (b.image) j["image"] = *b.image;
    carousel.push_back(with_extra(std::move(j), b.extra));
  }
  json highlights = json::array();
  for (const auto& h : cfg.highlights) {
    json j{{"category_id", h.category_id}, {"entity_iri", h.entity_iri}, {"caption", h.caption}};
    if (h.linked_to) j["linked_to"] = *h.linked_to;
    highlights.push_back(with_extra(std::move(j), h.extra));
  }
  write_json_file(root_dir, "highlights.json",
                  {{"intro", {{"title", cfg.intro.title}, {"message", cfg.intro.message}}},
                   {"carousel", carousel},
                   {"highlights", highlights}});

  json templates = json::array();
  for (const auto& t : cfg.insights) {
    json blocks = json::array();
    for (const auto& b : t.blocks) {
      json j{{"kind", to_string(b.kind)},
             {"title", b.title},
             {"size", to_string(b.size)},
             {"query", b.query},
             {"target_dataset", b.target_dataset}};
      if (b.description) j["description"] = *b.description;
      blocks.push_back(with_extra(std::move(j), b.extra));
    }
    templates.push_back(with_extra({{"category_id", t.category_id}, {"blocks", blocks}}, t.extra));
  }
  write_json_file(root_dir, "insights.json", {{"templates", templates}});
}

bool ValidationReport::has_errors() const { return error_count() > 0; }

std::size_t ValidationReport::error_count() const {
  return static_cast<std::size_t>(std::count_if(findings.begin(), findings.end(),
                                                 [](const Finding& f) { return f.severity == Severity::Error; }));
}

ValidationReport validate_config(const PortalConfig& cfg) {
  ValidationReport report;
  auto error = [&](const char* file, std::string msg) {
    report.findings.push_back({Severity::Error, file, std::move(msg)});
  };
  auto warn = [&](const char* file, std::string msg) {
    report.findings.push_back({Severity::Warning, file, std::move(msg)});
  };

  if (!is_valid_iri(cfg.base_iri)) error("datasets.json", "base_iri '" + cfg.base_iri + "' is not a valid IRI");
  else if (!cfg.base_iri.ends_with('/')) error("datasets.json", "base_iri must end with '/'");

  std::set<std::string> ids;
  for (const auto& d : cfg.datasets) {
    if (d.id.empty()) error("datasets.json", "dataset id is empty");
    if (!ids.insert(d.id).second) error("datasets.json", "duplicate dataset id '" + d.id + "'");
    if (!is_absolute_http_url(d.endpoint)) {
      error("datasets.json", "dataset '" + d.id + "' endpoint '" + d.endpoint + "' is not an absolute HTTP(S) URL");
    }
    if (d.priority < 0) error("datasets.json", "dataset '" + d.id + "' priority must be >= 0");
  }

  ids.clear();
  for (const auto& c : cfg.categories) {
    if (c.id.empty()) error("categories.json", "category id is empty");
    if (!ids.insert(c.id).second) error("categories.json", "duplicate category id '" + c.id + "'");
    if (!is_hex_color(c.color)) {
      error("categories.json", "category '" + c.id + "' color '" + c.color + "' does not match #RRGGBB");
    }
    if (c.sound_url && !is_absolute_http_url(*c.sound_url)) {
      error("categories.json", "category '" + c.id + "' sound_url is not an absolute URL");
    }
    for (const auto& [ds, q] : c.extraction_queries) {
      if (!cfg.find_dataset(ds)) {
        error("categories.json", "category '" + c.id + "' references unknown dataset '" + ds + "'");
      }
      if (!contains_var(q, "?entity") || !contains_var(q, "?label")) {
        error("categories.json",
              "category '" + c.id + "' query for '" + ds + "' must project ?entity and ?label");
      }
    }
    for (const auto& d : cfg.datasets) {
      if (!c.extraction_queries.count(d.id)) {
        warn("categories.json", "category '" + c.id + "' has no extraction query for dataset '" + d.id +
                                    "'; pair skipped");
      }
    }
  }

  for (const auto& x : cfg.indexes) {
    if (!cfg.find_category(x.category_id)) {
      error("indexes.json", "index references unknown category '" + x.category_id + "'");
    }
    if (x.equivalence_predicates.empty()) {
      error("indexes.json", "index '" + x.category_id + "' has no equivalence predicates");
    }
    for (const auto& p : x.equivalence_predicates) {
      if (!is_valid_iri(p)) error("indexes.json", "index '" + x.category_id + "' predicate '" + p + "' is not an IRI");
    }
    for (const auto& e : x.expansion_endpoints) {
      if (!cfg.find_dataset(e) && !is_absolute_http_url(e)) {
        error("indexes.json", "index '" + x.category_id + "' expansion endpoint '" + e +
                                  "' is neither a dataset id nor an absolute URL");
      }
    }
    if (x.expansion_depth < 0 || x.expansion_depth > 3) {
      error("indexes.json", "index '" + x.category_id + "' expansion_depth must be within 0..3");
    }
  }

  std::set<std::string> highlight_categories;
  std::set<std::string> highlight_iris;
  for (const auto& h : cfg.highlights) highlight_iris.insert(h.entity_iri);
  for (const auto& h : cfg.highlights) {
    if (!cfg.find_category(h.category_id)) {
      error("highlights.json", "highlight references unknown category '" + h.category_id + "'");
    }
    if (!highlight_categories.insert(h.category_id).second) {
      error("highlights.json", "more than one highlight for category '" + h.category_id + "'");
    }
    if (!is_valid_iri(h.entity_iri)) error("highlights.json", "highlight entity_iri '" + h.entity_iri + "' is not an IRI");
    if (h.linked_to && !highlight_iris.count(*h.linked_to)) {
      error("highlights.json", "highlight linked_to '" + *h.linked_to + "' is not another highlight's entity_iri");
    }
  }
  for (const auto& b : cfg.carousel) {
    if (b.title.empty()) error("highlights.json", "carousel box has an empty title");
    if (!is_absolute_http_url(b.link) && !b.link.starts_with("/") && !b.link.starts_with("#")) {
      error("highlights.json", "carousel box '" + b.title + "' link '" + b.link + "' is not a URL");
    }
  }

  for (const auto& t : cfg.insights) {
    if (!cfg.find_category(t.category_id)) {
      error("insights.json", "template references unknown category '" + t.category_id + "'");
    }
    for (const auto& b : t.blocks) {
      if (b.query.find("{ENTITY}") == std::string::npos) {
        error("insights.json", "block '" + b.title + "' query lacks the {ENTITY} placeholder");
      }
      if (b.target_dataset != "all" && !cfg.find_dataset(b.target_dataset)) {
        error("insights.json", "block '" + b.title + "' targets unknown dataset '" + b.target_dataset + "'");
      }
    }
  }
  return report;
}

std::string render_query(std::string_view tmpl, const std::map<std::string, std::string>& substitutions) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{' && i + 1 < tmpl.size() && std::isupper(static_cast<unsigned char>(tmpl[i + 1]))) {
      std::size_t j = i + 1;
      while (j < tmpl.size() &&
             (std::isupper(static_cast<unsigned char>(tmpl[j])) || std::isdigit(static_cast<unsigned char>(tmpl[j])) ||
              tmpl[j] == '_')) {
        ++j;
      }
      if (j < tmpl.size() && tmpl[j] == '}') {
        std::string name(tmpl.substr(i + 1, j - i - 1));
        auto it = substitutions.find(name);
        if (it == substitutions.end()) {
          throw Error(ErrorCode::UnboundPlaceholder, "UnboundPlaceholder(" + name + ")");
        }
        out += "<" + parse_iri(it->second).str() + ">";
        i = j + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

}  // namespace lodweaver
