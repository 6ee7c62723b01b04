// BLEU, paired-randomization significance, the Model 1 aligner, and the
// pronoun-focused metrics.

#include <algorithm>
#include <cmath>

#include "docmt/align.hpp"
#include "docmt/bleu.hpp"
#include "docmt/error.hpp"
#include "docmt/pronouns.hpp"
#include "doctest.h"

using namespace docmt;

TEST_CASE("bleu perfect match is exactly 100") {
  std::vector<Sentence> corpus = {
      {"the", "cat", "sat", "on", "the", "mat"},
      {"a", "longer", "second", "sentence", "for", "good", "measure"},
  };
  BleuReport report = bleu(corpus, corpus);
  CHECK(report.bleu == 100.0);
  CHECK(report.brevity_penalty == 1.0);

  // short sentences leave the high orders without candidates; the identity
  // must hold regardless
  std::vector<Sentence> shorts = {{"hi"}, {"yes", "no"}};
  CHECK(bleu(shorts, shorts).bleu == 100.0);
}

TEST_CASE("bleu clips repeated candidate n-grams") {
  BleuReport report = bleu({{"the", "the", "the", "the"}},
                           {{"the", "cat", "sat"}});
  CHECK(report.precisions[0] == doctest::Approx(0.25));
  CHECK(report.bleu == 0.0);  // no 2-gram match
}

TEST_CASE("bleu matches a hand-computed example") {
  // p1=5/6, p2=3/5, p3=2/4, p4=1/3, BP=1
  // 100*(5/6 * 3/5 * 1/2 * 1/3)^(1/4) = 100*(1/12)^(1/4) = 53.7285
  BleuReport report = bleu({{"the", "cat", "sat", "on", "the", "mat"}},
                           {{"the", "cat", "sat", "on", "a", "mat"}});
  CHECK(report.precisions[0] == doctest::Approx(5.0 / 6.0));
  CHECK(report.precisions[1] == doctest::Approx(3.0 / 5.0));
  CHECK(report.precisions[2] == doctest::Approx(0.5));
  CHECK(report.precisions[3] == doctest::Approx(1.0 / 3.0));
  CHECK(report.brevity_penalty == 1.0);
  CHECK(report.bleu == doctest::Approx(53.728497).epsilon(1e-6));
}

TEST_CASE("bleu brevity penalty for short candidates") {
  BleuReport report = bleu({{"the", "cat", "sat"}},
                           {{"the", "cat", "sat", "on", "a", "mat"}});
  CHECK(report.brevity_penalty == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("bleu is invariant under sentence reordering") {
  std::vector<Sentence> cands = {{"a", "b", "c", "d"},
                                 {"e", "f", "g"},
                                 {"h", "i", "j", "k", "l"}};
  std::vector<Sentence> refs = {{"a", "b", "x", "d"},
                                {"e", "f", "g"},
                                {"h", "y", "j", "k", "l"}};
  double forward = bleu(cands, refs).bleu;
  std::vector<Sentence> cands_rev(cands.rbegin(), cands.rend());
  std::vector<Sentence> refs_rev(refs.rbegin(), refs.rend());
  CHECK(bleu(cands_rev, refs_rev).bleu == doctest::Approx(forward));
}

TEST_CASE("bleu rejects empty and mismatched corpora") {
  CHECK_THROWS_AS(bleu({}, {}), ConfigError);
  CHECK_THROWS_AS(bleu({{"a"}}, {{"a"}, {"b"}}), ConfigError);
}

TEST_CASE("significance of a system against itself is exactly 1") {
  std::vector<Sentence> outputs = {{"der", "hund", "bellt"},
                                   {"die", "katze", "schläft"},
                                   {"das", "kind", "lacht"}};
  std::vector<Sentence> refs = {{"der", "hund", "bellt", "laut"},
                                {"die", "katze", "schläft"},
                                {"ein", "kind", "lacht"}};
  SignificanceReport report = paired_significance(outputs, outputs, refs, 500, 7);
  CHECK(report.p_value == 1.0);
  CHECK(report.observed_delta == 0.0);
}

TEST_CASE("significance separates a perfect system from noise") {
  std::vector<Sentence> refs;
  std::vector<Sentence> noise;
  for (int i = 0; i < 50; ++i) {
    Sentence ref, junk;
    for (int k = 0; k < 8; ++k) {
      ref.push_back("w" + std::to_string(i * 8 + k));
      junk.push_back("junk" + std::to_string(k * 50 + i));
    }
    refs.push_back(ref);
    noise.push_back(junk);
  }
  SignificanceReport report = paired_significance(refs, noise, refs, 10000, 3);
  CHECK(report.bleu_a == 100.0);
  CHECK(report.p_value < 0.005);
}

TEST_CASE("significance of a one-sentence difference is 1") {
  std::vector<Sentence> refs, sys_a, sys_b;
  for (int i = 0; i < 1000; ++i) {
    Sentence s = {"tok" + std::to_string(i), "a", "b", "c"};
    refs.push_back(s);
    sys_a.push_back(s);
    sys_b.push_back(s);
  }
  sys_b[500] = {"different", "x", "y", "z"};
  SignificanceReport report = paired_significance(sys_a, sys_b, refs, 2000, 5);
  // identical pairs cancel, so every trial reproduces |observed|
  CHECK(report.p_value == 1.0);
}

TEST_CASE("significance rejects mismatched lengths") {
  CHECK_THROWS_AS(paired_significance({{"a"}}, {{"a"}, {"b"}}, {{"a"}}, 10, 1),
                  ConfigError);
}

TEST_CASE("aligner converges on the degenerate single-pair corpus") {
  AlignmentModel model = train_aligner({{{"a"}, {"x"}}}, 5);
  CHECK(model.prob("a", "x") == doctest::Approx(1.0));
}

TEST_CASE("aligner resolves the crossing corpus") {
  // two-word vocabulary with one crossing pair; expected numbers from an
  // independent run of the same EM recipe (uniform init over {x, y},
  // NULL word, likelihood recorded entering each iteration)
  std::vector<std::pair<Sentence, Sentence>> pairs = {
      {{"a", "b"}, {"y", "x"}}, {{"a"}, {"y"}}, {{"b"}, {"x"}}};
  AlignmentModel model = train_aligner(pairs, 5);

  REQUIRE(model.log_likelihood.size() == 5);
  CHECK(model.log_likelihood[0] == doctest::Approx(-2.7725887222).epsilon(1e-9));
  CHECK(model.log_likelihood[1] == doctest::Approx(-2.3842766934).epsilon(1e-9));
  CHECK(model.log_likelihood[4] == doctest::Approx(-2.0151528355).epsilon(1e-9));
  CHECK(model.prob("a", "y") == doctest::Approx(0.9800704666).epsilon(1e-9));
  CHECK(model.prob("b", "x") == doctest::Approx(0.9800704666).epsilon(1e-9));

  std::vector<int> links = align({"a", "b"}, {"y", "x"}, model);
  REQUIRE(links.size() == 2);
  CHECK(links[0] == 0);  // y -> a
  CHECK(links[1] == 1);  // x -> b
}

TEST_CASE("aligner likelihood never decreases") {
  std::vector<std::pair<Sentence, Sentence>> pairs = {
      {{"the", "dog"}, {"der", "hund"}},
      {{"the", "cat"}, {"die", "katze"}},
      {{"a", "dog"}, {"ein", "hund"}},
      {{"the", "dog", "barks"}, {"der", "hund", "bellt"}},
  };
  AlignmentModel model = train_aligner(pairs, 10);
  for (size_t i = 1; i < model.log_likelihood.size(); ++i)
    CHECK(model.log_likelihood[i] >= model.log_likelihood[i - 1] - 1e-12);
}

TEST_CASE("pronoun lexicons ship as files matching the builtins") {
  for (const std::string lang : {"en", "de", "pt"}) {
    PronounLexicon from_file =
        PronounLexicon::load_file(lang, "data/pronouns/" + lang + ".txt");
    CHECK(from_file.forms() == PronounLexicon::builtin(lang).forms());
  }
  CHECK(PronounLexicon::builtin("en").forms().size() == 42);
  CHECK(PronounLexicon::builtin("de").forms().size() == 48);
  CHECK(PronounLexicon::builtin("pt").forms().size() == 63);

  PronounLexicon de = PronounLexicon::builtin("de");
  CHECK(de.contains("Er"));
  CHECK(de.contains("sie"));
  CHECK_FALSE(de.contains("hund"));
  CHECK_THROWS_AS(PronounLexicon::builtin("fr"), ConfigError);
}

namespace {

std::vector<std::vector<int>> identity_links(const std::vector<Sentence>& side) {
  std::vector<std::vector<int>> links;
  for (const auto& sent : side) {
    std::vector<int> l(sent.size());
    for (size_t j = 0; j < sent.size(); ++j) l[j] = static_cast<int>(j);
    links.push_back(l);
  }
  return links;
}

}  // namespace

TEST_CASE("apt is 1 when candidate equals reference") {
  PronounLexicon en = PronounLexicon::builtin("en");
  std::vector<Sentence> src = {{"he", "sees", "her"}, {"it", "works"}};
  std::vector<Sentence> out = {{"er", "sieht", "sie"}, {"es", "funktioniert"}};
  auto links = identity_links(out);
  AptReport report = apt(src, out, out, links, links, en);
  CHECK(report.score == doctest::Approx(1.0));
  CHECK(report.pronouns == 3);
}

TEST_CASE("apt scores half for one of two pronouns") {
  PronounLexicon en = PronounLexicon::builtin("en");
  std::vector<Sentence> src = {{"he", "and", "she"}};
  std::vector<Sentence> cand = {{"er", "und", "es"}};
  std::vector<Sentence> ref = {{"er", "und", "sie"}};
  auto cl = identity_links(cand);
  auto rl = identity_links(ref);
  AptReport report = apt(src, cand, ref, cl, rl, en);
  CHECK(report.score == doctest::Approx(0.5));
  CHECK(report.pronouns == 2);
}

TEST_CASE("apt compares case-insensitively and honors the partial hook") {
  PronounLexicon en = PronounLexicon::builtin("en");
  std::vector<Sentence> src = {{"he", "runs"}};
  std::vector<Sentence> cand = {{"Er", "läuft"}};
  std::vector<Sentence> ref = {{"er", "läuft"}};
  auto cl = identity_links(cand);
  auto rl = identity_links(ref);
  CHECK(apt(src, cand, ref, cl, rl, en).score == doctest::Approx(1.0));

  // candidate aligns an extra token to the pronoun: not an exact match,
  // but the overlap earns the configured partial credit
  std::vector<Sentence> cand2 = {{"er", "er", "läuft"}};
  std::vector<std::vector<int>> cl2 = {{0, 0, 1}};
  AptOptions opts;
  CHECK(apt(src, cand2, ref, cl2, rl, en, opts).score == doctest::Approx(0.0));
  opts.partial_weight = 0.5;
  CHECK(apt(src, cand2, ref, cl2, rl, en, opts).score == doctest::Approx(0.5));
}

TEST_CASE("apt requires at least one source pronoun") {
  PronounLexicon en = PronounLexicon::builtin("en");
  std::vector<Sentence> src = {{"dogs", "bark"}};
  std::vector<Sentence> out = {{"hunde", "bellen"}};
  auto links = identity_links(out);
  CHECK_THROWS_AS(apt(src, out, out, links, links, en), ConfigError);
}

TEST_CASE("pronoun prf identity and clipping") {
  PronounLexicon en = PronounLexicon::builtin("en");
  PronounLexicon de = PronounLexicon::builtin("de");

  std::vector<Sentence> src = {{"he", "walks"}};
  std::vector<Sentence> ref = {{"er", "geht"}};
  PrfReport same = pronoun_prf(src, ref, ref, en, de);
  CHECK(same.precision == doctest::Approx(1.0));
  CHECK(same.recall == doctest::Approx(1.0));
  CHECK(same.f1 == doctest::Approx(1.0));

  // candidate {er, er} vs reference {er}: clipped overlap 1
  PrfReport clipped =
      pronoun_prf(src, {{"er", "er", "geht"}}, ref, en, de);
  CHECK(clipped.overlap == 1);
  CHECK(clipped.precision == doctest::Approx(0.5));
  CHECK(clipped.recall == doctest::Approx(1.0));
  CHECK(clipped.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("pronoun prf skips sentences without source pronouns") {
  PronounLexicon en = PronounLexicon::builtin("en");
  PronounLexicon de = PronounLexicon::builtin("de");
  std::vector<Sentence> src = {{"he", "walks"}, {"dogs", "bark"}};
  std::vector<Sentence> cand = {{"er", "geht"}, {"er", "er", "er"}};
  std::vector<Sentence> ref = {{"er", "geht"}, {"hunde", "bellen"}};
  PrfReport report = pronoun_prf(src, cand, ref, en, de);
  // the pronoun-free second sentence must not leak its garbage counts
  CHECK(report.candidate_total == 1);
  CHECK(report.precision == doctest::Approx(1.0));
}

TEST_CASE("pronoun prf flags undefined precision and keeps f1 at zero") {
  PronounLexicon en = PronounLexicon::builtin("en");
  PronounLexicon de = PronounLexicon::builtin("de");
  std::vector<Sentence> src = {{"he", "walks"}};
  PrfReport report = pronoun_prf(src, {{"kein", "treffer"}}, {{"er", "geht"}},
                                 en, de);
  CHECK_FALSE(report.precision_defined);
  CHECK(report.precision == 0.0);
  CHECK(report.f1 == 0.0);
}

TEST_CASE("pronoun prf swaps precision and recall with its arguments") {
  PronounLexicon en = PronounLexicon::builtin("en");
  PronounLexicon de = PronounLexicon::builtin("de");
  std::vector<Sentence> src = {{"he", "and", "she", "walk"}};
  std::vector<Sentence> a = {{"er", "und", "es", "gehen"}};
  std::vector<Sentence> b = {{"er", "geht"}};
  PrfReport fwd = pronoun_prf(src, a, b, en, de);
  PrfReport rev = pronoun_prf(src, b, a, en, de);
  CHECK(fwd.precision == doctest::Approx(rev.recall));
  CHECK(fwd.recall == doctest::Approx(rev.precision));
  CHECK(fwd.f1 == doctest::Approx(rev.f1));
}
