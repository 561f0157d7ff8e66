#include "pcl/term.hpp"

#include <random>

#include "doctest.h"
#include "test_util.hpp"

using namespace pcl;
using pcltest::random_term;
using pcltest::small_terms;

namespace {
SemanticsConfig theory_on() {
  SemanticsConfig c;
  c.dh_theory = true;
  return c;
}
SemanticsConfig theory_off() { return SemanticsConfig{}; }
}  // namespace

TEST_CASE("contains: signature payload, reflexivity, absent leaf") {
  SemanticsConfig cfg;
  TermPtr y = Term::nonce("y");
  TermPtr m = Term::nonce("m");
  TermPtr x_hat = Term::agent("X");
  const TermPtr parts[] = {y, m, x_hat};
  TermPtr sig = Term::sig(Term::tuple(parts), Term::agent("Y"));
  CHECK(contains(sig, m, cfg));
  CHECK(contains(m, m, cfg));

  TermPtr enc = Term::enc(m, Term::sym_key("K"));
  CHECK_FALSE(contains(enc, Term::nonce("other"), cfg));
  // Key positions count as subterm positions.
  CHECK(contains(enc, Term::sym_key("K"), cfg));
  CHECK_THROWS_AS(contains(Term::var("v", Sort::Nonce), m, cfg), std::invalid_argument);
}

TEST_CASE("contains is reflexive and transitive over the small universe") {
  SemanticsConfig cfg;
  for (const auto& t1 : small_terms(2)) {
    CHECK(contains(t1, t1, cfg));
    for (const auto& t2 : subterms(t1)) {
      REQUIRE(contains(t1, t2, cfg));
      for (const auto& t3 : subterms(t2)) CHECK(contains(t1, t3, cfg));
    }
  }
}

TEST_CASE("normalize_dh: symmetry case, identity off, idempotence") {
  TermPtr a = Term::nonce("a");
  TermPtr b = Term::nonce("b");
  CHECK(equal(normalize_dh(Term::dh_h(b, a), theory_on()), Term::dh_h(a, b)));
  CHECK(equal(normalize_dh(Term::dh_h(b, a), theory_off()), Term::dh_h(b, a)));

  for (const auto& t : small_terms(2)) {
    TermPtr once = normalize_dh(t, theory_on());
    CHECK(equal(normalize_dh(once, theory_on()), once));
    CHECK(once->node_count() == t->node_count());
  }
}

TEST_CASE("equal_mod_theory") {
  TermPtr a = Term::nonce("a");
  TermPtr b = Term::nonce("b");
  CHECK(equal_mod_theory(Term::dh_h(a, b), Term::dh_h(b, a), theory_on()));
  CHECK_FALSE(equal_mod_theory(Term::dh_h(a, b), Term::dh_h(b, a), theory_off()));
  CHECK(equal_mod_theory(Term::dh_g(a), Term::dh_g(a), theory_off()));

  // Equivalence relation on the small universe; with the theory off it
  // coincides with syntactic equality.
  auto terms = small_terms(1);
  std::mt19937 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, terms.size() - 1);
  for (int i = 0; i < 2000; ++i) {
    const TermPtr& x = terms[pick(rng)];
    const TermPtr& y = terms[pick(rng)];
    const TermPtr& z = terms[pick(rng)];
    CHECK(equal_mod_theory(x, x, theory_on()));
    CHECK(equal_mod_theory(x, y, theory_on()) == equal_mod_theory(y, x, theory_on()));
    if (equal_mod_theory(x, y, theory_on()) && equal_mod_theory(y, z, theory_on()))
      CHECK(equal_mod_theory(x, z, theory_on()));
    CHECK(equal_mod_theory(x, y, theory_off()) == equal(x, y));
  }
}

TEST_CASE("match_term: simple binding and sort discipline") {
  SemanticsConfig typed;
  SemanticsConfig untyped;
  untyped.typed = false;

  TermPtr xvar = Term::var("x", Sort::Nonce);
  TermPtr n1 = Term::nonce("n1");
  auto m = match_term(xvar, n1, {}, typed);
  REQUIRE(m.has_value());
  CHECK(equal(m->at("x"), n1));

  const TermPtr parts[] = {Term::nonce("y"), Term::nonce("m"), Term::agent("X")};
  TermPtr sig = Term::sig(Term::tuple(parts), Term::agent("Y"));
  CHECK_FALSE(match_term(xvar, sig, {}, typed).has_value());
  auto mu = match_term(xvar, sig, {}, untyped);
  REQUIRE(mu.has_value());
  CHECK(equal(mu->at("x"), sig));
}

TEST_CASE("match_term handles both h() orientations under the theory") {
  SemanticsConfig on = theory_on();
  TermPtr a = Term::nonce("a");
  TermPtr b = Term::nonce("b");
  TermPtr pat = Term::dh_h(Term::var("v", Sort::Nonce), b);
  // Ground term arrives in the opposite orientation.
  auto m = match_term(pat, Term::dh_h(b, a), {}, on);
  REQUIRE(m.has_value());
  CHECK(equal(m->at("v"), a));

  // Brute-force oracle: a single-variable pattern matches iff some ground
  // subterm substituted for the variable makes the two sides equal modulo
  // the theory.
  auto oracle = [&](const TermPtr& p, const TermPtr& g) {
    for (const auto& sub : subterms(g)) {
      Subst s{{"v", sub}};
      if (equal_mod_theory(apply(s, p, on), g, on)) return true;
    }
    return false;
  };
  std::mt19937 rng(11);
  for (int i = 0; i < 500; ++i) {
    TermPtr g = Term::dh_h(random_term(rng, 1), random_term(rng, 1));
    TermPtr p = Term::dh_h(Term::var("v", Sort::Message), random_term(rng, 1));
    CHECK(match_term(p, g, {}, on).has_value() == oracle(p, g));
  }
}

TEST_CASE("apply: substitution, identity, canonical reordering") {
  SemanticsConfig cfg;
  TermPtr n = Term::nonce("n");
  Subst s{{"x", n}};
  TermPtr enc = Term::enc(Term::var("x", Sort::Nonce), Term::sym_key("K"));
  CHECK(equal(apply(s, enc, cfg), Term::enc(n, Term::sym_key("K"))));
  CHECK(equal(apply({}, enc, cfg), enc));
  CHECK_THROWS_AS(apply({}, enc, cfg, true), std::invalid_argument);

  // Substitution then normalization agrees with normalizing the image.
  SemanticsConfig on = theory_on();
  TermPtr n1 = Term::nonce("n1");
  TermPtr n2 = Term::nonce("n2");
  Subst ab{{"a", n2}, {"b", n1}};
  TermPtr h = Term::dh_h(Term::var("a", Sort::Nonce), Term::var("b", Sort::Nonce));
  TermPtr applied = apply(ab, h, on);
  CHECK(equal(applied, normalize_dh(Term::dh_h(n2, n1), on)));
  CHECK(equal(applied, Term::dh_h(n1, n2)));
}

TEST_CASE("match soundness: apply(match(p,g), p) equals g modulo theory") {
  std::mt19937 rng(23);
  SemanticsConfig on = theory_on();
  SemanticsConfig typed_off = theory_off();
  int matched = 0;
  for (int i = 0; i < 2000; ++i) {
    // Build a ground instance by substituting into a pattern.
    TermPtr skeleton = random_term(rng, 2);
    // Punch a variable into a random position by wrapping.
    TermPtr pattern = Term::pair(Term::var("u", Sort::Message), skeleton);
    TermPtr ground = Term::pair(random_term(rng, 1), skeleton);
    for (const auto& cfg : {on, typed_off}) {
      auto m = match_term(pattern, ground, {}, cfg);
      if (m) {
        ++matched;
        CHECK(equal_mod_theory(apply(*m, pattern, cfg), ground, cfg));
      }
    }
  }
  CHECK(matched > 0);
}

TEST_CASE("typed matches are a subset of untyped matches") {
  std::mt19937 rng(31);
  SemanticsConfig typed;
  SemanticsConfig untyped;
  untyped.typed = false;
  const Sort sorts[] = {Sort::Nonce, Sort::SymKey, Sort::Message, Sort::SigVal};
  for (int i = 0; i < 2000; ++i) {
    TermPtr ground = random_term(rng, 2);
    TermPtr pat = Term::var("v", sorts[static_cast<std::size_t>(i) % 4]);
    if (match_term(pat, ground, {}, typed)) CHECK(match_term(pat, ground, {}, untyped));
  }
}

TEST_CASE("tuples right-nest and display flattened") {
  const TermPtr parts[] = {Term::agent("A"), Term::agent("B"), Term::nonce("m")};
  TermPtr t = Term::tuple(parts);
  CHECK(t->kind() == TermKind::Pair);
  CHECK(equal(t, Term::pair(Term::agent("A"), Term::pair(Term::agent("B"), Term::nonce("m")))));
  CHECK(to_string(t) == "(A,B,m)");
}

TEST_CASE("shared keys are unordered") {
  TermPtr kab = Term::shared_key(Term::agent("A"), Term::agent("B"));
  TermPtr kba = Term::shared_key(Term::agent("B"), Term::agent("A"));
  CHECK(equal(kab, kba));
  CHECK(to_string(kab) == "k(A,B)");
}
