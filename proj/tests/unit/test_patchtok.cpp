#include <doctest.h>

#include <fstream>
#include <random>

#include "verifree/patchtok.hpp"

using namespace verifree;

namespace {

std::string random_word(std::mt19937_64& rng, int max_len = 6) {
  static const std::string letters = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, letters.size() - 1);
  std::string word;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) word += letters[pick(rng)];
  return word;
}

std::string random_response(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> words(1, 5);
  std::string text;
  const int n = words(rng);
  for (int i = 0; i < n; ++i) {
    if (i) text += " ";
    text += random_word(rng);
  }
  text += "<answer>" + random_word(rng, 3) + " </answer>";
  return text;
}

}  // namespace

TEST_CASE("single base characters tokenize to single base tokens") {
  const ToyTokenizer tok = ToyTokenizer::fixture();
  const TokenSeq tokens = tok.tokenize("q");
  REQUIRE(tokens.size() == 1);
  CHECK(tok.token_string(tokens[0]) == "q");
}

TEST_CASE("the answer marker splits into the boundary token plus the closing character") {
  // greedy merges assemble "<answer" left to right; no rule joins it to ">"
  const ToyTokenizer tok = ToyTokenizer::fixture();
  const TokenSeq tokens = tok.tokenize("<answer>");
  REQUIRE(tokens.size() == 2);
  CHECK(tokens[0] == tok.boundary_token());
  CHECK(tok.token_string(tokens[1]) == ">");
}

TEST_CASE("out-of-alphabet characters are rejected by name") {
  const ToyTokenizer tok = ToyTokenizer::fixture();
  CHECK_THROWS_WITH_AS(tok.tokenize("ok!"), doctest::Contains("'!'"), std::invalid_argument);
}

TEST_CASE("tokenize/detokenize round-trips on a random corpus") {
  const ToyTokenizer tok = ToyTokenizer::fixture();
  std::mt19937_64 rng(2025);
  for (int i = 0; i < 1000; ++i) {
    const std::string text = random_response(rng);
    CHECK(tok.detokenize(tok.tokenize(text)) == text);
  }
}

TEST_CASE("token-level split semantics") {
  const ToyTokenizer tok = ToyTokenizer::fixture();

  SUBCASE("boundary at index 5 yields an inclusive 6-token trace") {
    const TokenSeq response = tok.tokenize("abcde<answer>x </answer>");
    REQUIRE(response[5] == tok.boundary_token());
    const SplitResponse split = split_at_boundary(tok, response);
    CHECK(split.trace_tokens.size() == 6);
    CHECK(split.trace_tokens.back() == tok.boundary_token());
    CHECK(split.format_ok);
  }

  SUBCASE("missing boundary marks the format broken") {
    const SplitResponse split = split_at_boundary(tok, tok.tokenize("no marker"));
    CHECK(!split.format_ok);
    CHECK(split.answer_region_tokens.empty());
    CHECK(split.trace_tokens == tok.tokenize("no marker"));
  }
}

TEST_CASE("text-level splitting drifts on the adversarial fixture") {
  const ToyTokenizer tok = ToyTokenizer::fixture();
  // ">7" merges in the sampled sequence, but the text split puts ">" in the
  // trace half, so re-tokenization cannot reproduce the original tokens
  const TokenSeq response = tok.tokenize("they sum to seven<answer>7 </answer>");
  const SplitResponse token_split = split_at_boundary(tok, response);
  const SplitResponse text_split = split_at_text(tok, response);

  TokenSeq token_joined = token_split.trace_tokens;
  token_joined.insert(token_joined.end(), token_split.answer_region_tokens.begin(),
                      token_split.answer_region_tokens.end());
  CHECK(token_joined == response);

  TokenSeq text_joined = text_split.trace_tokens;
  text_joined.insert(text_joined.end(), text_split.answer_region_tokens.begin(),
                     text_split.answer_region_tokens.end());
  CHECK(text_joined != response);
}

TEST_CASE("patching the reference answer") {
  const ToyTokenizer tok = ToyTokenizer::fixture();
  const TokenSeq reference_region = make_reference_region(tok, "42");

  SUBCASE("an already-correct response patches to itself") {
    const TokenSeq response = tok.tokenize("count them<answer>42 </answer>");
    const SplitResponse split = split_at_boundary(tok, response);
    CHECK(patch_reference(tok, split, reference_region) == response);
  }

  SUBCASE("a differing answer keeps the trace prefix bit-for-bit") {
    const TokenSeq response = tok.tokenize("count them<answer>13 </answer>");
    const SplitResponse split = split_at_boundary(tok, response);
    const TokenSeq patched = patch_reference(tok, split, reference_region);
    REQUIRE(patched.size() >= split.trace_tokens.size());
    for (std::size_t i = 0; i < split.trace_tokens.size(); ++i) {
      CHECK(patched[i] == split.trace_tokens[i]);
    }
    CHECK(patched != response);
  }

  SUBCASE("splice-then-retokenize is the identity on random fixtures") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 1000; ++i) {
      const std::string text = random_response(rng);
      const SplitResponse split = split_at_boundary(tok, tok.tokenize(text));
      REQUIRE(split.format_ok);
      const TokenSeq region = make_reference_region(tok, random_word(rng, 3));
      const TokenSeq patched = patch_reference(tok, split, region);
      CHECK(tok.tokenize(tok.detokenize(patched)) == patched);
    }
  }
}

TEST_CASE("boundary safety is validated at construction") {
  // a rule consuming the boundary token from the left must be rejected
  CHECK_THROWS_AS(ToyTokenizer("answer<>",
                               {{"<", "a"},
                                {"<a", "n"},
                                {"<an", "s"},
                                {"<ans", "w"},
                                {"<answ", "e"},
                                {"<answe", "r"},
                                {"<answer", ">"}},
                               "<answer", '>'),
                  std::invalid_argument);
  // so must a vocab token containing the seam pattern "r>"
  CHECK_THROWS_AS(ToyTokenizer("answer<>",
                               {{"<", "a"},
                                {"<a", "n"},
                                {"<an", "s"},
                                {"<ans", "w"},
                                {"<answ", "e"},
                                {"<answe", "r"},
                                {"r", ">"}},
                               "<answer", '>'),
                  std::invalid_argument);
  // and a boundary string that never became a token
  CHECK_THROWS_AS(ToyTokenizer("ab<>", {{"a", "b"}}, "<answer", '>'), std::invalid_argument);
}

TEST_CASE("merge tables load from the one-pair-per-line format") {
  const std::string path = "/tmp/verifree_merges_test.txt";
  {
    std::ofstream out(path);
    out << "# comment line\n";
    out << "t h\n";
    out << "th e\n";
    out << "\n";
  }
  const auto merges = load_merge_table(path);
  REQUIRE(merges.size() == 2);
  CHECK(merges[0] == std::pair<std::string, std::string>("t", "h"));
  CHECK(merges[1] == std::pair<std::string, std::string>("th", "e"));

  {
    std::ofstream out(path);
    out << "a b c\n";
  }
  CHECK_THROWS_WITH_AS(load_merge_table(path), doctest::Contains(":1"), std::runtime_error);
}
