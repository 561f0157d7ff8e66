// Shared test utilities: small-term enumeration over a pinned alphabet and
// a seeded random term generator. These live in test code only and stay
// independent of the library's internals.

#pragma once

#include <random>
#include <vector>

#include "pcl/term.hpp"

namespace pcltest {

using pcl::Term;
using pcl::TermPtr;

inline TermPtr atom_nonce() { return Term::nonce("n"); }
inline TermPtr atom_key() { return Term::sym_key("K"); }
inline TermPtr atom_agent() { return Term::agent("A"); }

// All terms of height <= h over the three-atom alphabet {n, K, A} and the
// full constructor set. Pairs and h() take both children from the previous
// level's atoms to keep the universe small but subterm-closed.
inline std::vector<TermPtr> small_terms(int height) {
  std::vector<TermPtr> cur = {atom_nonce(), atom_key(), atom_agent()};
  std::vector<TermPtr> all = cur;
  for (int lv = 0; lv < height; ++lv) {
    std::vector<TermPtr> next;
    for (const auto& t : cur) {
      next.push_back(Term::enc(t, atom_key()));
      next.push_back(Term::sig(t, atom_agent()));
      next.push_back(Term::hash(t, atom_key()));
      next.push_back(Term::dh_g(t));
      for (const auto& u : cur) {
        next.push_back(Term::pair(t, u));
        next.push_back(Term::dh_h(t, u));
      }
    }
    all.insert(all.end(), next.begin(), next.end());
    // Keep growth in check: the next level builds only on atoms and the
    // first few composites.
    cur = {atom_nonce(), atom_key(), atom_agent()};
    for (std::size_t i = 0; i < next.size() && cur.size() < 12; i += 7)
      cur.push_back(next[i]);
  }
  std::sort(all.begin(), all.end(), pcl::TermLess{});
  all.erase(std::unique(all.begin(), all.end(),
                        [](const TermPtr& a, const TermPtr& b) { return equal(a, b); }),
            all.end());
  return all;
}

// Random ground term of bounded height, seeded for reproducibility.
inline TermPtr random_term(std::mt19937& rng, int height) {
  std::uniform_int_distribution<int> pick(0, height > 0 ? 8 : 2);
  switch (pick(rng)) {
    case 0: return atom_nonce();
    case 1: return atom_key();
    case 2: return atom_agent();
    case 3: return Term::enc(random_term(rng, height - 1), atom_key());
    case 4: return Term::sig(random_term(rng, height - 1), atom_agent());
    case 5: return Term::hash(random_term(rng, height - 1), atom_key());
    case 6: return Term::dh_g(random_term(rng, height - 1));
    case 7:
      return Term::pair(random_term(rng, height - 1), random_term(rng, height - 1));
    default:
      return Term::dh_h(random_term(rng, height - 1), random_term(rng, height - 1));
  }
}

}  // namespace pcltest
