#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "garmentsynth/lexicon.hpp"

namespace garmentsynth {

struct Token {
  std::string text;   // lowercased
  std::size_t begin;  // [begin, end) in the source prompt
  std::size_t end;

  friend bool operator==(const Token&, const Token&) = default;
};

// A run of attribute adjectives followed by the part noun they modify.
struct AttributePhrase {
  std::vector<Token> adjectives;
  Token noun;

  // Adjectives followed by the noun, i.e. all tokens whose attention maps are bundled.
  std::vector<Token> tokens() const;
  std::size_t token_count() const { return adjectives.size() + 1; }
  bool same_words(const AttributePhrase& other) const;

  friend bool operator==(const AttributePhrase&, const AttributePhrase&) = default;
};

struct APTree {
  std::string full_prompt;
  std::vector<AttributePhrase> aps;
  std::string category;

  nlohmann::json to_json() const;
  static APTree from_json(const nlohmann::json& j);

  friend bool operator==(const APTree&, const APTree&) = default;
};

std::vector<Token> tokenize(std::string_view text);

// Greedy left-to-right chunking of adjective runs into attribute phrases.
APTree parse_aps(std::string_view full_prompt, const std::vector<Token>& tokens, const Lexicon& lexicon);

// tokenize + parse_aps.
APTree parse_prompt(std::string_view prompt, const Lexicon& lexicon);

// Indices of attribute phrases whose words differ between two trees of the same shape.
std::set<std::size_t> diff_aps(const APTree& w, const APTree& w_star);

// Canonical text for a tree: phrases joined by "with" / "and".
std::string regenerate_prompt(const APTree& tree);

}  // namespace garmentsynth
