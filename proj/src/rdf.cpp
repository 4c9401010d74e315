#include "lodweaver/rdf.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>

#include "lodweaver/error.hpp"

namespace lodweaver {

namespace {

std::string invalid_iri_reason(std::string_view text) {
  if (text.empty()) return "empty";
  for (unsigned char c : text) {
    if (c <= 0x20) return "contains whitespace or control character";
    switch (c) {
      case '<': case '>': case '"': case '{': case '}':
      case '|': case '^': case '`': case '\\':
        return std::string("contains forbidden character '") + static_cast<char>(c) + "'";
      default:
        break;
    }
  }
  auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0) return "missing scheme";
  if (!std::isalpha(static_cast<unsigned char>(text[0]))) return "scheme must start with a letter";
  for (std::size_t i = 1; i < colon; ++i) {
    unsigned char c = text[i];
    if (!std::isalnum(c) && c != '+' && c != '-' && c != '.') return "invalid scheme character";
  }
  return {};
}

[[noreturn]] void malformed(std::string_view where, std::string_view reason) {
  throw Error(ErrorCode::MalformedResults,
              "MalformedResults(" + std::string(where) + ", " + std::string(reason) + ")");
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string escape_literal(std::string_view lex) {
  std::string out;
  out.reserve(lex.size() + 2);
  for (unsigned char c : lex) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (c < 0x20 || c == 0x7F) {
          static constexpr char kHex[] = "0123456789ABCDEF";
          out += "\\u00";
          out += kHex[c >> 4];
          out += kHex[c & 0xF];
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

class LineParser {
 public:
  explicit LineParser(std::string_view line) : s_(line) {}

  Statement parse(std::string* comment) {
    skip_ws();
    Subject subject = parse_subject();
    skip_ws();
    Iri predicate = parse_iri_ref();
    skip_ws();
    Term object = parse_term();
    skip_ws();
    std::optional<Iri> graph;
    if (peek() == '<') {
      graph = parse_iri_ref();
      skip_ws();
    }
    expect('.');
    skip_ws();
    if (!eof()) {
      if (peek() != '#') fail("trailing characters");
      if (comment) {
        auto rest = s_.substr(pos_ + 1);
        rest.remove_prefix(std::min(rest.size(), rest.find_first_not_of(" \t")));
        *comment = std::string(rest);
      }
      pos_ = s_.size();
    }
    return Statement{std::move(subject), std::move(predicate), std::move(object), std::move(graph)};
  }

 private:
  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }

  [[noreturn]] void fail(std::string_view reason) const {
    throw Error(ErrorCode::ParseError,
                "N-Quads parse error at column " + std::to_string(pos_) + ": " + std::string(reason));
  }

  void skip_ws() {
    while (!eof() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  Iri parse_iri_ref() {
    expect('<');
    auto end = s_.find('>', pos_);
    if (end == std::string_view::npos) fail("unterminated IRI");
    std::string_view body = s_.substr(pos_, end - pos_);
    pos_ = end + 1;
    try {
      return parse_iri(body);
    } catch (const Error& e) {
      fail(e.what());
    }
  }

  BlankNode parse_bnode() {
    expect('_');
    expect(':');
    std::size_t start = pos_;
    while (!eof() && s_[pos_] != ' ' && s_[pos_] != '\t' && s_[pos_] != '.') ++pos_;
    if (start == pos_) fail("empty blank node label");
    return BlankNode{std::string(s_.substr(start, pos_ - start))};
  }

  Subject parse_subject() {
    if (peek() == '<') return parse_iri_ref();
    if (peek() == '_') return parse_bnode();
    fail("expected subject");
  }

  std::uint32_t parse_hex(int digits) {
    if (pos_ + digits > s_.size()) fail("truncated escape");
    std::uint32_t v = 0;
    for (int i = 0; i < digits; ++i) {
      char c = s_[pos_++];
      v <<= 4;
      if (c >= '0' && c <= '9') v |= c - '0';
      else if (c >= 'a' && c <= 'f') v |= c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') v |= c - 'A' + 10;
      else fail("bad hex digit");
    }
    return v;
  }

  Term parse_term() {
    if (peek() == '<') return parse_iri_ref();
    if (peek() == '_') return parse_bnode();
    if (peek() != '"') fail("expected object term");
    ++pos_;
    Literal lit;
    for (;;) {
      if (eof()) fail("unterminated literal");
      char c = s_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        lit.lexical += c;
        continue;
      }
      if (eof()) fail("dangling escape");
      char e = s_[pos_++];
      switch (e) {
        case 't': lit.lexical += '\t'; break;
        case 'b': lit.lexical += '\b'; break;
        case 'n': lit.lexical += '\n'; break;
        case 'r': lit.lexical += '\r'; break;
        case 'f': lit.lexical += '\f'; break;
        case '"': lit.lexical += '"'; break;
        case '\'': lit.lexical += '\''; break;
        case '\\': lit.lexical += '\\'; break;
        case 'u': append_utf8(lit.lexical, parse_hex(4)); break;
        case 'U': append_utf8(lit.lexical, parse_hex(8)); break;
        default: fail("unknown escape");
      }
    }
    if (peek() == '@') {
      ++pos_;
      std::size_t start = pos_;
      while (!eof() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-')) ++pos_;
      if (start == pos_) fail("empty language tag");
      lit.lang = std::string(s_.substr(start, pos_ - start));
    } else if (peek() == '^') {
      ++pos_;
      expect('^');
      lit.datatype = parse_iri_ref();
    }
    return lit;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Iri parse_iri(std::string_view text) {
  auto reason = invalid_iri_reason(text);
  if (!reason.empty()) {
    throw Error(ErrorCode::InvalidIri, "InvalidIri(" + std::string(text) + ", " + reason + ")");
  }
  return Iri(std::string(text));
}

bool is_valid_iri(std::string_view text) { return invalid_iri_reason(text).empty(); }

Term term_from_json(const nlohmann::json& j) {
  if (!j.is_object()) malformed("term", "binding value is not an object");
  auto type_it = j.find("type");
  auto value_it = j.find("value");
  if (type_it == j.end() || !type_it->is_string()) malformed("term", "missing string 'type'");
  if (value_it == j.end() || !value_it->is_string()) malformed("term", "missing string 'value'");
  const auto& type = type_it->get_ref<const std::string&>();
  const auto& value = value_it->get_ref<const std::string&>();

  if (type == "uri") {
    try {
      return parse_iri(value);
    } catch (const Error& e) {
      malformed("term", e.what());
    }
  }
  if (type == "bnode") {
    if (value.empty()) malformed("term", "empty blank node label");
    return BlankNode{value};
  }
  if (type == "literal" || type == "typed-literal") {
    Literal lit{value, std::nullopt, std::nullopt};
    if (auto it = j.find("xml:lang"); it != j.end()) {
      if (!it->is_string()) malformed("term", "'xml:lang' is not a string");
      lit.lang = it->get<std::string>();
    }
    if (auto it = j.find("datatype"); it != j.end()) {
      if (!it->is_string()) malformed("term", "'datatype' is not a string");
      if (lit.lang) malformed("term", "literal has both xml:lang and datatype");
      try {
        lit.datatype = parse_iri(it->get_ref<const std::string&>());
      } catch (const Error& e) {
        malformed("term", e.what());
      }
    } else if (type == "typed-literal") {
      malformed("term", "typed-literal without datatype");
    }
    return lit;
  }
  malformed("term", "unknown term type '" + type + "'");
}

nlohmann::json term_to_json(const Term& term) {
  return std::visit(
      [](const auto& t) -> nlohmann::json {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Iri>) {
          return {{"type", "uri"}, {"value", t.str()}};
        } else if constexpr (std::is_same_v<T, BlankNode>) {
          return {{"type", "bnode"}, {"value", t.label}};
        } else {
          nlohmann::json j{{"type", "literal"}, {"value", t.lexical}};
          if (t.lang) j["xml:lang"] = *t.lang;
          if (t.datatype) j["datatype"] = t.datatype->str();
          return j;
        }
      },
      term);
}

BindingTable parse_sparql_results(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    malformed("byte " + std::to_string(e.byte), e.what());
  }
  if (!doc.is_object()) malformed("/", "document is not an object");

  BindingTable table;
  auto head = doc.find("head");
  if (head == doc.end() || !head->is_object()) malformed("/head", "missing head object");
  if (auto vars = head->find("vars"); vars != head->end()) {
    if (!vars->is_array()) malformed("/head/vars", "not an array");
    for (const auto& v : *vars) {
      if (!v.is_string()) malformed("/head/vars", "variable name is not a string");
      table.vars.push_back(v.get<std::string>());
    }
  }
  if (doc.contains("boolean")) malformed("/boolean", "ASK results are not supported");

  auto results = doc.find("results");
  if (results == doc.end() || !results->is_object()) malformed("/results", "missing results object");
  auto bindings = results->find("bindings");
  if (bindings == results->end() || !bindings->is_array()) {
    malformed("/results/bindings", "missing bindings array");
  }

  table.rows.reserve(bindings->size());
  for (std::size_t i = 0; i < bindings->size(); ++i) {
    const auto& b = (*bindings)[i];
    std::string where = "/results/bindings/" + std::to_string(i);
    if (!b.is_object()) malformed(where, "binding is not an object");
    BindingRow row;
    for (const auto& [var, value] : b.items()) {
      if (std::find(table.vars.begin(), table.vars.end(), var) == table.vars.end()) {
        malformed(where, "variable '" + var + "' not declared in head.vars");
      }
      try {
        row.emplace(var, term_from_json(value));
      } catch (const Error& e) {
        malformed(where + "/" + var, e.what());
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

nlohmann::json results_to_json(const BindingTable& table) {
  nlohmann::json bindings = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json b = nlohmann::json::object();
    for (const auto& [var, term] : row) b[var] = term_to_json(term);
    bindings.push_back(std::move(b));
  }
  return {{"head", {{"vars", table.vars}}}, {"results", {{"bindings", std::move(bindings)}}}};
}

std::string to_ntriples(const Term& term) {
  return std::visit(
      [](const auto& t) -> std::string {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Iri>) {
          return "<" + t.str() + ">";
        } else if constexpr (std::is_same_v<T, BlankNode>) {
          return "_:" + t.label;
        } else {
          std::string out = "\"" + escape_literal(t.lexical) + "\"";
          if (t.lang) out += "@" + *t.lang;
          else if (t.datatype) out += "^^<" + t.datatype->str() + ">";
          return out;
        }
      },
      term);
}

std::string to_ntriples(const Subject& subject) {
  return std::visit([](const auto& s) { return to_ntriples(Term{s}); }, subject);
}

std::string format_nquad(const Statement& st) {
  std::string line = to_ntriples(st.subject);
  line += ' ';
  line += "<" + st.predicate.str() + ">";
  line += ' ';
  line += to_ntriples(st.object);
  if (st.graph) line += " <" + st.graph->str() + ">";
  line += " .";
  return line;
}

Statement parse_nquad(std::string_view line, std::string* comment) {
  return LineParser(line).parse(comment);
}

std::string serialize_linkset_ntriples(std::span<const Statement> statements) {
  std::vector<std::string> lines;
  lines.reserve(statements.size());
  for (const auto& st : statements) {
    if (std::holds_alternative<BlankNode>(st.subject) || std::holds_alternative<BlankNode>(st.object)) {
      throw Error(ErrorCode::UnsupportedTerm, "UnsupportedTerm(blank node in linkset)");
    }
    if (st.graph) {
      throw Error(ErrorCode::UnsupportedTerm, "UnsupportedTerm(named graph in linkset)");
    }
    lines.push_back(format_nquad(st));
  }
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

}  // namespace lodweaver
