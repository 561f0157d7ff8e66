// Symbolic message algebra: names, nonces, keys, tuples, encryptions,
// signatures, keyed hashes and Diffie-Hellman exponentials.
//
// Design notes:
//   - Terms are immutable trees behind shared_ptr; every operation is a
//     pure function, so values can be shared freely across threads.
//   - Tuples are right-nested pairs: (a,b,c) is Pair(a, Pair(b,c)).
//     Printing flattens them again.
//   - Shared symmetric keys k(A,B) are unordered: the factory sorts
//     ground agent arguments into canonical order.
//   - Under the optional equational theory, h(a,b) and h(b,a) denote the
//     same value; normalize_dh rewrites every DhH node so its arguments
//     appear in the canonical term order.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcl/config.hpp"

namespace pcl {

enum class Sort : std::uint8_t {
  Agent,
  Nonce,
  SymKey,
  AsymKey,
  DhPriv,
  DhPub,
  DhShared,
  HashVal,
  SigVal,
  Ciphertext,
  Tuple,
  Message,  // top sort
};

const char* sort_name(Sort s);
std::optional<Sort> sort_from_name(const std::string& name);

// Subsort relation: every sort is below Message, nothing else.
inline bool sort_leq(Sort a, Sort b) { return a == b || b == Sort::Message; }

enum class TermKind : std::uint8_t {
  Agent,       // concrete agent name
  Nonce,       // fresh value, tagged with originating thread and a sort
  Var,         // sorted variable
  SymKey,      // named symmetric key
  SharedKey,   // k(A,B), unordered pair of agent terms
  PubKey,      // pk(A)
  PrivKey,     // sk(A)
  Pair,        // right-nested tuples
  Enc,         // enc{payload}key
  Sig,         // sig{payload}signer-agent
  Hash,        // hash{payload}key, no destructor
  DhG,         // g(a)
  DhH,         // h(a,b)
};

class Term;
using TermPtr = std::shared_ptr<const Term>;

// Thrown by factories when a construction violates term well-formedness
// (e.g. a tuple in a key position). Formula evaluation treats an atom whose
// instantiation is ill-formed as false.
struct TermFormError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class Term {
 public:
  TermKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  int origin() const { return origin_; }
  // Declared sort of a Var or generated Nonce.
  Sort tag_sort() const { return sort_; }
  const TermPtr& left() const { return left_; }
  const TermPtr& right() const { return right_; }

  bool ground() const { return ground_; }
  std::size_t hash() const { return hash_; }
  std::size_t node_count() const { return size_; }
  int height() const { return height_; }

  // Computed sort of the whole term.
  Sort sort() const;

  static TermPtr agent(std::string name);
  static TermPtr nonce(std::string name, int origin = -1, Sort sort = Sort::Nonce);
  static TermPtr var(std::string name, Sort sort);
  static TermPtr sym_key(std::string name);
  static TermPtr shared_key(TermPtr a, TermPtr b);
  static TermPtr pub_key(TermPtr agent);
  static TermPtr priv_key(TermPtr agent);
  static TermPtr pair(TermPtr first, TermPtr rest);
  static TermPtr tuple(std::span<const TermPtr> parts);
  static TermPtr enc(TermPtr payload, TermPtr key);
  static TermPtr sig(TermPtr payload, TermPtr signer);
  static TermPtr hash(TermPtr payload, TermPtr key);
  static TermPtr dh_g(TermPtr exponent);
  static TermPtr dh_h(TermPtr a, TermPtr b);

 private:
  Term(TermKind k, std::string name, int origin, Sort sort, TermPtr l, TermPtr r);
  static TermPtr make(TermKind k, std::string name, int origin, Sort sort,
                      TermPtr l, TermPtr r);

  TermKind kind_;
  Sort sort_;        // declared sort for Var/Nonce, Message otherwise
  int origin_;       // originating thread for nonces, -1 elsewhere
  bool ground_;
  int height_;
  std::size_t size_;
  std::size_t hash_;
  std::string name_;
  TermPtr left_, right_;
};

bool equal(const TermPtr& a, const TermPtr& b);

// Canonical total order: constructor tag, then children, then identifiers.
int compare(const TermPtr& a, const TermPtr& b);

struct TermLess {
  bool operator()(const TermPtr& a, const TermPtr& b) const { return compare(a, b) < 0; }
};
struct TermHash {
  std::size_t operator()(const TermPtr& t) const { return t->hash(); }
};
struct TermEq {
  bool operator()(const TermPtr& a, const TermPtr& b) const { return equal(a, b); }
};

// Rewrites every DhH node into canonical argument order when the theory is
// enabled; identity otherwise. Also restores shared-key canonical order
// after substitutions. Idempotent and size-preserving.
TermPtr normalize_dh(const TermPtr& t, const SemanticsConfig& cfg);

bool equal_mod_theory(const TermPtr& a, const TermPtr& b, const SemanticsConfig& cfg);

// Syntactic subterm relation on ground terms (reflexive; descends through
// key positions and DH arguments). Normalizes both sides first when the
// theory is on. Throws on non-ground input.
bool contains(const TermPtr& outer, const TermPtr& inner, const SemanticsConfig& cfg);

// Finite map from variable names to terms.
using Subst = std::map<std::string, TermPtr>;

// Extends `partial` so that pattern instantiates to `ground_term`, modulo
// the active theory. In typed mode a variable only binds terms of its
// declared sort (or below). Deterministic: DhH and SharedKey arguments are
// tried in canonical orientation order, first success wins.
std::optional<Subst> match_term(const TermPtr& pattern, const TermPtr& ground_term,
                                const Subst& partial, const SemanticsConfig& cfg);

// All matches instead of the first one (the two-orientation cases can
// produce several distinct substitutions).
std::vector<Subst> match_term_all(const TermPtr& pattern, const TermPtr& ground_term,
                                  const Subst& partial, const SemanticsConfig& cfg);

// Homomorphic substitution application; the result is normalized under the
// active theory. With require_ground set, throws std::invalid_argument if
// an unbound variable remains.
TermPtr apply(const Subst& subst, const TermPtr& t, const SemanticsConfig& cfg,
              bool require_ground = false);

// Every distinct subterm of t, in canonical order.
std::vector<TermPtr> subterms(const TermPtr& t);
void collect_subterms(const TermPtr& t, std::vector<TermPtr>& out);

// Display form. Tuples are flattened; variables print without sort
// annotations (see print_pattern for binder-annotated output).
std::string to_string(const TermPtr& t);

// Pattern display: annotates the first occurrence of each variable not yet
// in `declared` with its sort, and inserts it into `declared`.
std::string print_pattern(const TermPtr& t, std::map<std::string, Sort>& declared);

}  // namespace pcl
