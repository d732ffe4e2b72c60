#include "verifree/patchtok.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace verifree {

ToyTokenizer::ToyTokenizer(std::string alphabet,
                           std::vector<std::pair<std::string, std::string>> merges,
                           std::string boundary, char closing)
    : alphabet_(std::move(alphabet)),
      merges_(std::move(merges)),
      boundary_(std::move(boundary)),
      closing_(closing) {
  for (char c : alphabet_) vocab_.push_back(std::string(1, c));
  for (const auto& [left, right] : merges_) vocab_.push_back(left + right);
  const auto it = std::find(vocab_.begin(), vocab_.end(), boundary_);
  if (it == vocab_.end()) {
    throw std::invalid_argument("boundary string \"" + boundary_ + "\" is not a vocab token");
  }
  boundary_token_ = static_cast<TokenId>(it - vocab_.begin());
  validate_boundary();
}

void ToyTokenizer::validate_boundary() const {
  // The pair (boundary, closing) must stay unmergeable: no rule consumes the
  // boundary token from the left, and the two-character seam pattern never
  // occurs inside any vocab token.
  const std::string seam = std::string(1, boundary_.back()) + std::string(1, closing_);
  for (const auto& [left, right] : merges_) {
    if (left == boundary_) {
      throw std::invalid_argument("merge table consumes the boundary token \"" + boundary_ +
                                  "\" from the left; the split point would not be stable");
    }
  }
  for (const std::string& token : vocab_) {
    if (token.find(seam) != std::string::npos) {
      throw std::invalid_argument("vocab token \"" + token + "\" contains the seam pattern \"" +
                                  seam + "\"; the split point would not be stable");
    }
  }
}

ToyTokenizer ToyTokenizer::fixture() {
  std::vector<std::pair<std::string, std::string>> merges = {
      {"<", "a"},      {"<a", "n"},    {"<an", "s"},   {"<ans", "w"},
      {"<answ", "e"},  {"<answe", "r"},
      {"<", "/"},      {"</", "a"},    {"</a", "n"},   {"</an", "s"},
      {"</ans", "w"},  {"</answ", "e"}, {"</answe", "r"},
      {">", "7"},      // drift fixture: makes text-level splitting unstable
      {"t", "h"},      {"th", "e"},
      {"4", "2"},
  };
  return ToyTokenizer("abcdefghijklmnopqrstuvwxyz0123456789 <>/", std::move(merges), "<answer",
                      '>');
}

TokenSeq ToyTokenizer::tokenize(const std::string& text) const {
  std::unordered_map<char, TokenId> base;
  for (std::size_t i = 0; i < alphabet_.size(); ++i) base[alphabet_[i]] = static_cast<TokenId>(i);

  TokenSeq tokens;
  tokens.reserve(text.size());
  for (char c : text) {
    const auto it = base.find(c);
    if (it == base.end()) {
      throw std::invalid_argument(std::string("character '") + c + "' is not in the base alphabet");
    }
    tokens.push_back(it->second);
  }

  for (std::size_t rule = 0; rule < merges_.size(); ++rule) {
    const TokenId merged = static_cast<TokenId>(alphabet_.size() + rule);
    const std::string& left = merges_[rule].first;
    const std::string& right = merges_[rule].second;
    TokenSeq next;
    next.reserve(tokens.size());
    std::size_t i = 0;
    while (i < tokens.size()) {
      if (i + 1 < tokens.size() && vocab_[static_cast<size_t>(tokens[i])] == left &&
          vocab_[static_cast<size_t>(tokens[i + 1])] == right) {
        next.push_back(merged);
        i += 2;
      } else {
        next.push_back(tokens[i]);
        ++i;
      }
    }
    tokens.swap(next);
  }
  return tokens;
}

std::string ToyTokenizer::detokenize(const TokenSeq& tokens) const {
  std::string out;
  for (TokenId t : tokens) out += token_string(t);
  return out;
}

const std::string& ToyTokenizer::token_string(TokenId t) const {
  if (t < 0 || t >= vocab_size()) {
    throw std::invalid_argument("token index " + std::to_string(t) + " out of range");
  }
  return vocab_[static_cast<size_t>(t)];
}

std::vector<std::pair<std::string, std::string>> load_merge_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open merge table file: " + path);
  std::vector<std::pair<std::string, std::string>> merges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string left, right, extra;
    if (!(fields >> left >> right) || (fields >> extra)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected exactly \"left right\"");
    }
    merges.emplace_back(left, right);
  }
  return merges;
}

SplitResponse split_at_boundary(const ToyTokenizer& tok, const TokenSeq& response) {
  SplitResponse split;
  const auto it = std::find(response.begin(), response.end(), tok.boundary_token());
  if (it == response.end()) {
    split.trace_tokens = response;
    split.format_ok = false;
    return split;
  }
  split.trace_tokens.assign(response.begin(), it + 1);
  split.answer_region_tokens.assign(it + 1, response.end());
  split.format_ok = !split.answer_region_tokens.empty() &&
                    tok.token_string(split.answer_region_tokens.front()).front() ==
                        tok.closing_char();
  return split;
}

SplitResponse split_at_text(const ToyTokenizer& tok, const TokenSeq& response) {
  const std::string text = tok.detokenize(response);
  const std::string marker = tok.boundary_string() + std::string(1, tok.closing_char());
  SplitResponse split;
  const std::size_t pos = text.find(marker);
  if (pos == std::string::npos) {
    split.trace_tokens = response;
    split.format_ok = false;
    return split;
  }
  // The human-readable convention: cut after the full marker and re-tokenize
  // both halves. The marker's closing character can merge into the answer
  // text in the sampled sequence but not here, so the halves need not
  // reassemble into the response tokens.
  split.trace_tokens = tok.tokenize(text.substr(0, pos + marker.size()));
  split.answer_region_tokens = tok.tokenize(text.substr(pos + marker.size()));
  split.format_ok = true;
  return split;
}

TokenSeq patch_reference(const ToyTokenizer& tok, const SplitResponse& split,
                         const TokenSeq& reference_region) {
  (void)tok;
  TokenSeq out = split.trace_tokens;
  out.insert(out.end(), reference_region.begin(), reference_region.end());
  return out;
}

TokenSeq make_reference_region(const ToyTokenizer& tok, const std::string& answer_text,
                               bool include_closing_wrapper) {
  std::string region = std::string(1, tok.closing_char()) + answer_text;
  if (include_closing_wrapper) {
    // "<answer" -> " </answer>"
    const std::string& open = tok.boundary_string();
    region += " " + open.substr(0, 1) + "/" + open.substr(1) + std::string(1, tok.closing_char());
  }
  return tok.tokenize(region);
}

}  // namespace verifree
