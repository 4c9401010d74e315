#pragma once

#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace lodweaver {

// Absolute IRI. Only constructible through parse_iri, so every instance
// is non-empty, whitespace-free, and starts with a scheme.
class Iri {
 public:
  const std::string& str() const noexcept { return value_; }

  friend auto operator<=>(const Iri&, const Iri&) = default;
  friend bool operator==(const Iri&, const Iri&) = default;

 private:
  explicit Iri(std::string value) : value_(std::move(value)) {}
  friend Iri parse_iri(std::string_view text);

  std::string value_;
};

Iri parse_iri(std::string_view text);
bool is_valid_iri(std::string_view text);

struct BlankNode {
  std::string label;

  friend auto operator<=>(const BlankNode&, const BlankNode&) = default;
};

// datatype and lang are mutually exclusive; lexical form is kept verbatim.
struct Literal {
  std::string lexical;
  std::optional<Iri> datatype;
  std::optional<std::string> lang;

  friend auto operator<=>(const Literal&, const Literal&) = default;
};

using Term = std::variant<Iri, Literal, BlankNode>;
using Subject = std::variant<Iri, BlankNode>;

inline const Iri* as_iri(const Term& t) { return std::get_if<Iri>(&t); }
inline const Literal* as_literal(const Term& t) { return std::get_if<Literal>(&t); }

using BindingRow = std::map<std::string, Term, std::less<>>;

struct BindingTable {
  std::vector<std::string> vars;
  std::vector<BindingRow> rows;

  friend bool operator==(const BindingTable&, const BindingTable&) = default;
};

struct Statement {
  Subject subject;
  Iri predicate;
  Term object;
  std::optional<Iri> graph;

  friend auto operator<=>(const Statement&, const Statement&) = default;
};

namespace vocab {
inline constexpr std::string_view kOwlSameAs = "http://www.w3.org/2002/07/owl#sameAs";
inline constexpr std::string_view kSkosExactMatch = "http://www.w3.org/2004/02/skos/core#exactMatch";
inline constexpr std::string_view kRdfType = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
inline constexpr std::string_view kRdfsLabel = "http://www.w3.org/2000/01/rdf-schema#label";
inline constexpr std::string_view kXsdString = "http://www.w3.org/2001/XMLSchema#string";
}  // namespace vocab

// SPARQL 1.1 Query Results JSON.
BindingTable parse_sparql_results(std::string_view bytes);
nlohmann::json results_to_json(const BindingTable& table);

// Term <-> SPARQL-results term object ({"type":..., "value":...}).
nlohmann::json term_to_json(const Term& term);
Term term_from_json(const nlohmann::json& j);

// N-Triples term syntax: <iri>, "lex"@lang, "lex"^^<dt>, _:label.
std::string to_ntriples(const Term& term);
std::string to_ntriples(const Subject& subject);

// One "s p o [g] ." line without the trailing newline.
std::string format_nquad(const Statement& st);

// Parses a single N-Triples / N-Quads line (a trailing comment is allowed
// and returned through `comment` when non-null). Only what format_nquad
// emits is guaranteed to round-trip.
Statement parse_nquad(std::string_view line, std::string* comment = nullptr);

// Flat, sorted, deduplicated N-Triples. Rejects blank nodes and named graphs.
std::string serialize_linkset_ntriples(std::span<const Statement> statements);

}  // namespace lodweaver
