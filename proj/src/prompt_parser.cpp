#include "garmentsynth/prompt_parser.hpp"

#include <cctype>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

using nlohmann::json;

std::vector<Token> AttributePhrase::tokens() const {
  std::vector<Token> out = adjectives;
  out.push_back(noun);
  return out;
}

bool AttributePhrase::same_words(const AttributePhrase& other) const {
  if (adjectives.size() != other.adjectives.size() || noun.text != other.noun.text) return false;
  for (std::size_t i = 0; i < adjectives.size(); ++i) {
    if (adjectives[i].text != other.adjectives[i].text) return false;
  }
  return true;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t begin = i;
    std::string word;
    while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
      ++i;
    }
    if (!word.empty()) tokens.push_back({std::move(word), begin, i});
  }
  if (tokens.empty()) throw Error(ErrorCode::kEmptyPrompt, "prompt contains no words");
  return tokens;
}

APTree parse_aps(std::string_view full_prompt, const std::vector<Token>& tokens, const Lexicon& lexicon) {
  if (tokens.empty()) throw Error(ErrorCode::kEmptyPrompt, "no tokens to parse");
  APTree tree;
  tree.full_prompt = std::string(full_prompt);
  std::vector<Token> run;
  for (const Token& tok : tokens) {
    if (lexicon.is_adjective(tok.text)) {
      run.push_back(tok);
      continue;
    }
    const bool is_category = lexicon.is_category_noun(tok.text);
    if (is_category || lexicon.is_part_noun(tok.text)) {
      if (is_category && tree.category.empty()) tree.category = lexicon.category_nouns.at(tok.text);
      tree.aps.push_back({std::move(run), tok});
      run.clear();
      continue;
    }
    // Conjunction or unknown function word: only legal between phrases.
    if (!run.empty()) {
      throw Error(ErrorCode::kUnknownPartNoun,
                  "adjectives '" + run.front().text + "...' are followed by '" + tok.text + "', not a known noun");
    }
  }
  if (!run.empty()) {
    throw Error(ErrorCode::kUnknownPartNoun, "prompt ends with adjective '" + run.back().text + "' and no noun");
  }
  if (tree.category.empty()) throw Error(ErrorCode::kNoCategory, "no garment category noun in prompt");
  return tree;
}

APTree parse_prompt(std::string_view prompt, const Lexicon& lexicon) {
  return parse_aps(prompt, tokenize(prompt), lexicon);
}

std::set<std::size_t> diff_aps(const APTree& w, const APTree& w_star) {
  if (w.category != w_star.category) {
    throw Error(ErrorCode::kStructureMismatch, "category '" + w.category + "' vs '" + w_star.category + "'");
  }
  if (w.aps.size() != w_star.aps.size()) {
    throw Error(ErrorCode::kStructureMismatch, "phrase counts differ");
  }
  std::set<std::size_t> changed;
  for (std::size_t i = 0; i < w.aps.size(); ++i) {
    if (!w.aps[i].same_words(w_star.aps[i])) changed.insert(i);
  }
  return changed;
}

std::string regenerate_prompt(const APTree& tree) {
  std::string out;
  for (std::size_t i = 0; i < tree.aps.size(); ++i) {
    if (i == 1) out += " with ";
    else if (i > 1) out += " and ";
    for (const Token& adj : tree.aps[i].adjectives) out += adj.text + " ";
    out += tree.aps[i].noun.text;
  }
  return out;
}

json APTree::to_json() const {
  json aps_json = json::array();
  for (const auto& ap : aps) {
    json adjs = json::array();
    for (const auto& a : ap.adjectives) adjs.push_back(a.text);
    const std::size_t begin = ap.adjectives.empty() ? ap.noun.begin : ap.adjectives.front().begin;
    aps_json.push_back({{"adjectives", adjs}, {"noun", ap.noun.text}, {"span", {begin, ap.noun.end}}});
  }
  return {{"full_prompt", full_prompt}, {"category", category}, {"aps", aps_json}};
}

APTree APTree::from_json(const json& j) {
  // Token spans are recovered by re-tokenizing the stored prompt.
  APTree tree;
  tree.full_prompt = j.at("full_prompt").get<std::string>();
  tree.category = j.at("category").get<std::string>();
  const auto tokens = tokenize(tree.full_prompt);
  for (const auto& ap_json : j.at("aps")) {
    const auto span = ap_json.at("span").get<std::vector<std::size_t>>();
    AttributePhrase ap;
    const auto adjs = ap_json.at("adjectives").get<std::vector<std::string>>();
    std::vector<Token> in_span;
    for (const auto& t : tokens) {
      if (t.begin >= span.at(0) && t.end <= span.at(1)) in_span.push_back(t);
    }
    if (in_span.size() != adjs.size() + 1) {
      throw Error(ErrorCode::kStructureMismatch, "span does not match phrase tokens");
    }
    ap.adjectives.assign(in_span.begin(), in_span.end() - 1);
    ap.noun = in_span.back();
    for (std::size_t i = 0; i < adjs.size(); ++i) {
      if (ap.adjectives[i].text != adjs[i]) throw Error(ErrorCode::kStructureMismatch, "adjective mismatch");
    }
    if (ap.noun.text != ap_json.at("noun").get<std::string>()) {
      throw Error(ErrorCode::kStructureMismatch, "noun mismatch");
    }
    tree.aps.push_back(std::move(ap));
  }
  return tree;
}

}  // namespace garmentsynth
