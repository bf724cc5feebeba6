#include <doctest.h>

#include <cmath>
#include <functional>

#include "parg/textmetrics.hpp"
#include "support.hpp"

using namespace parg;

namespace {

Tokens toks(const char* s) { return tokenize(s); }

// Plain recursion, exponential; keep inputs short.
std::size_t edit_recursive(const Tokens& a, std::size_t i, const Tokens& b, std::size_t j) {
  if (i == 0) return j;
  if (j == 0) return i;
  const std::size_t sub = edit_recursive(a, i - 1, b, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1);
  return std::min({edit_recursive(a, i - 1, b, j) + 1, edit_recursive(a, i, b, j - 1) + 1, sub});
}

}  // namespace

TEST_CASE("sentence bleu of identical sequences is one") {
  CHECK(sentence_bleu(toks("i want a cheap restaurant ."), toks("i want a cheap restaurant .")) ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("sentence bleu without unigram overlap is zero") {
  CHECK(sentence_bleu(toks("a b c d"), toks("e f g h")) == 0.0);
}

TEST_CASE("sentence bleu hand computed") {
  // hyp "the cat sat" vs ref "the cat sat down": p1 = 1, p2 = 1, p3 = 1,
  // p4 smoothed = 1 / (0 + 1), bp = exp(1 - 4/3).
  const double expected = std::exp(1.0 - 4.0 / 3.0);
  CHECK(sentence_bleu(toks("the cat sat"), toks("the cat sat down")) == doctest::Approx(expected).epsilon(1e-12));
  // Unsmoothed the missing 4-gram order zeroes the score.
  CHECK(sentence_bleu(toks("the cat sat"), toks("the cat sat down"), BleuConfig::corpus()) == 0.0);
}

TEST_CASE("sentence bleu rejects empty input") {
  CHECK_THROWS_AS(sentence_bleu({}, toks("a")), ValidationError);
  CHECK_THROWS_AS(sentence_bleu(toks("a"), {}), ValidationError);
}

TEST_CASE("bleu config validation") {
  BleuConfig cfg;
  cfg.max_order = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.max_order = 5;
  CHECK_THROWS_AS(sentence_bleu(toks("a"), toks("a"), cfg), ValidationError);
}

TEST_CASE("corpus bleu pools statistics") {
  const std::vector<Tokens> hyps{toks("a b c d"), toks("x y")};
  const std::vector<Tokens> refs{toks("a b c d"), toks("x y z")};
  NgramStats s = ngram_stats(hyps[0], refs[0], 4);
  s += ngram_stats(hyps[1], refs[1], 4);
  CHECK(s.hyp_length == 6);
  CHECK(s.ref_length == 7);
  CHECK(corpus_bleu(hyps, refs) == doctest::Approx(bleu_from_stats(s, BleuConfig::corpus())).epsilon(1e-15));
  CHECK_THROWS_AS(corpus_bleu(hyps, {refs[0]}), ValidationError);
  CHECK(corpus_bleu({Tokens{}}, {toks("a")}) == 0.0);
}

TEST_CASE("bleu matches the frozen reference values") {
  const auto doc = test::read_json(test::data("textmetrics_cases.json"));
  std::vector<Tokens> hyps, refs;
  for (const auto& c : doc.at("cases")) {
    const auto hyp = c.at("hyp").get<Tokens>();
    const auto ref = c.at("ref").get<Tokens>();
    CAPTURE(join(hyp));
    CAPTURE(join(ref));
    CHECK(std::abs(sentence_bleu(hyp, ref) - c.at("sentence_bleu").get<double>()) < 1e-9);
    CHECK(std::abs(sentence_bleu(hyp, ref, BleuConfig::corpus()) - c.at("unsmoothed_bleu").get<double>()) < 1e-9);
    CHECK(edit_distance(hyp, ref) == c.at("edit_distance").get<std::size_t>());
    hyps.push_back(hyp);
    refs.push_back(ref);
  }
  CHECK(hyps.size() == 100);
  CHECK(std::abs(corpus_bleu(hyps, refs) - doc.at("corpus_bleu").get<double>()) < 1e-9);
  hyps.resize(50);
  refs.resize(50);
  CHECK(std::abs(corpus_bleu(hyps, refs) - doc.at("corpus_bleu_first_half").get<double>()) < 1e-9);
}

TEST_CASE("edit distance examples") {
  CHECK(edit_distance(toks("a b c"), toks("a b c")) == 0);
  CHECK(edit_distance(toks(""), toks("a b")) == 2);
  CHECK(edit_distance(toks("kitten sat"), toks("sitting sat")) == 1);
  CHECK(edit_distance(toks("a b c d"), toks("b c d e")) == 2);
}

TEST_CASE("edit distance agrees with plain recursion") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Tokens a = test::random_tokens(rng, 0, 7, 4), b = test::random_tokens(rng, 0, 7, 4);
    CHECK(edit_distance(a, b) == edit_recursive(a, a.size(), b, b.size()));
  }
}

TEST_CASE("edit distance is a metric") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const Tokens a = test::random_tokens(rng, 0, 12), b = test::random_tokens(rng, 0, 12),
                 c = test::random_tokens(rng, 0, 12);
    const auto ab = edit_distance(a, b), ba = edit_distance(b, a);
    CHECK(ab == ba);
    CHECK(edit_distance(a, a) == 0);
    CHECK(edit_distance(a, c) <= ab + edit_distance(b, c));
    const auto lo = a.size() > b.size() ? a.size() - b.size() : b.size() - a.size();
    CHECK(ab >= lo);
    CHECK(ab <= std::max(a.size(), b.size()));
  }
}

TEST_CASE("bleu stays in the unit interval and is one only for identical input") {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const Tokens h = test::random_tokens(rng, 1, 10, 5), r = test::random_tokens(rng, 1, 10, 5);
    const double b = sentence_bleu(h, r);
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
    if (h == r) CHECK(b == doctest::Approx(1.0));
    NgramStats s = ngram_stats(h, r, 4);
    for (int n = 0; n < 4; ++n) CHECK(s.matches[static_cast<std::size_t>(n)] <= s.totals[static_cast<std::size_t>(n)]);
  }
}

TEST_CASE("diversity reads the delexicalized tokens") {
  DelexUtterance a{toks("i want [food] food"), {}}, b{toks("[food] food please"), {}};
  CHECK(diversity(a, b) == 3.0);
  CHECK(diversity(a, a) == 0.0);
}
