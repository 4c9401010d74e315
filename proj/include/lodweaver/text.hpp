#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lodweaver {

// NFKD, combining marks dropped, full case folding, whitespace runs
// collapsed to one space and trimmed. Punctuation is kept. Idempotent.
std::string normalize_label(std::string_view text);

// Splits an already-normalized label on single spaces.
std::vector<std::string> label_tokens(std::string_view normalized);

// Code-point boundaries of a UTF-8 string (byte offsets, excluding 0,
// including size()). Invalid bytes count as one code point each.
std::vector<std::size_t> utf8_boundaries(std::string_view text);

}  // namespace lodweaver
