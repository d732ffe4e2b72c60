#pragma once

#include <string>
#include <utility>
#include <vector>

#include "verifree/seq.hpp"

namespace verifree {

/// Greedy ordered-merge tokenizer over a character alphabet. Merges apply in
/// rule order, each with a single left-to-right pass. The boundary token is
/// the answer-opening marker without its closing character (for marker
/// "<answer>": token "<answer", closing character '>'), and the table must
/// keep that pair unmergeable so a trace that stops at the boundary token
/// splices back into the same token sequence.
class ToyTokenizer {
 public:
  ToyTokenizer(std::string alphabet, std::vector<std::pair<std::string, std::string>> merges,
               std::string boundary, char closing);

  /// The standard fixture table: marker "<answer>", closing "</answer>",
  /// plus a ">"+"7" merge that makes text-level splitting drift.
  static ToyTokenizer fixture();

  TokenSeq tokenize(const std::string& text) const;
  std::string detokenize(const TokenSeq& tokens) const;

  const std::string& token_string(TokenId t) const;
  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  TokenId boundary_token() const { return boundary_token_; }
  const std::string& boundary_string() const { return boundary_; }
  char closing_char() const { return closing_; }

 private:
  void validate_boundary() const;

  std::string alphabet_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::vector<std::string> vocab_;  // base tokens first, then one per merge
  TokenId boundary_token_ = -1;
  std::string boundary_;
  char closing_ = '>';
};

/// One merge per line, "left right", order significant. '#' starts a comment.
std::vector<std::pair<std::string, std::string>> load_merge_table(const std::string& path);

/// A response split at the first boundary token. format_ok requires the
/// boundary to be present and the answer region to open with the closing
/// character of the marker.
struct SplitResponse {
  TokenSeq trace_tokens;
  TokenSeq answer_region_tokens;
  bool format_ok = false;
};

SplitResponse split_at_boundary(const ToyTokenizer& tok, const TokenSeq& response);

/// Text-level ablation: split the detokenized string at the full marker
/// (boundary string + closing char) and re-tokenize both halves. Subject to
/// drift; kept to demonstrate why the split is done in token space.
SplitResponse split_at_text(const ToyTokenizer& tok, const TokenSeq& response);

/// trace_tokens ++ reference answer-region tokens. The reference region is
/// supplied in token space (its canonical tokenization), so the patched
/// sequence re-tokenizes to itself.
TokenSeq patch_reference(const ToyTokenizer& tok, const SplitResponse& split,
                         const TokenSeq& reference_region);

/// Canonical token sequence for an answer region "> {answer}" with, by
/// default, the closing wrapper appended.
TokenSeq make_reference_region(const ToyTokenizer& tok, const std::string& answer_text,
                               bool include_closing_wrapper = true);

}  // namespace verifree
