// Assertion language over runs: action predicates, knowledge and freshness
// predicates, temporal ordering, quantifiers over threads/terms/agents and
// modal triples  pre [program]_X post.
//
// Thread variables are not terms; the executor of a bound thread variable Y
// can be referenced in term positions via hat(Y), represented internally as
// an agent-sorted variable named "^Y" that evaluation binds automatically.

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcl/protocol.hpp"
#include "pcl/term.hpp"

namespace pcl {

struct Run;  // engine.hpp

enum class AtomKind : std::uint8_t {
  Send,
  Receive,
  Gen,
  Encrypt,
  Decrypt,
  Verify,
  Has,
  Fresh,
  Honest,        // agent argument only
  Contains,      // two term arguments
  ComputesDh,
  ComputesHash,
  Eq,            // term equality modulo theory
};

const char* atom_kind_name(AtomKind k);

struct Atom {
  AtomKind kind;
  std::string thread;  // subject thread variable (empty for Honest/Contains/Eq)
  TermPtr t1, t2;      // Honest/Eq/Contains use t1/t2; others use t1
};

enum class FormulaKind : std::uint8_t {
  True,
  False,
  AtomF,
  Not,
  And,
  Or,
  Implies,
  ForallThread,
  ExistsThread,
  ForallTerm,
  ExistsTerm,
  ForallAgent,
  ExistsAgent,
  Order,   // a < b over two atoms
  Modal,   // pre [program]_X post
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  FormulaKind kind = FormulaKind::True;
  Atom atom;                    // AtomF
  Atom atom2;                   // Order: atom < atom2
  std::vector<FormulaPtr> kids; // Not:1, And/Or:n, Implies:2, quantifiers:1,
                                // Modal: {pre, post}
  std::string var;              // quantifier / modal thread variable
  TermPtr restrict_agent;       // thread quantifier domain restriction (agent term)
  Sort term_sort = Sort::Message;  // term quantifier domain restriction
  std::vector<Action> program;  // Modal

  static FormulaPtr truth();
  static FormulaPtr falsity();
  static FormulaPtr make_atom(Atom a);
  static FormulaPtr negate(FormulaPtr f);
  static FormulaPtr conj(std::vector<FormulaPtr> fs);
  static FormulaPtr disj(std::vector<FormulaPtr> fs);
  static FormulaPtr implies(FormulaPtr lhs, FormulaPtr rhs);
  static FormulaPtr quant(FormulaKind q, std::string var, FormulaPtr body,
                          TermPtr restrict_agent = nullptr,
                          Sort term_sort = Sort::Message);
  static FormulaPtr order(Atom before, Atom after);
  static FormulaPtr modal(FormulaPtr pre, std::vector<Action> program,
                          std::string thread_var, FormulaPtr post);
};

std::string to_string(const FormulaPtr& f);

// Bindings for free thread/term/agent variables plus the evaluation horizon
// (events with index >= horizon are invisible; -1 means the whole run).
struct EvalContext {
  Subst terms;                          // term & agent vars (incl. "^Y" entries)
  std::map<std::string, int> threads;   // thread var -> thread id
  int horizon = -1;
};

// Closed-formula evaluation over a run. Quantified term variables range
// over the subterms occurring in the run; agent variables over the setup
// pool; thread variables over the run's threads.
bool eval_formula(const Run& run, const FormulaPtr& f, const SemanticsConfig& cfg);

// Like eval_formula but reports a falsifying instance for failed universal
// formulas (variable bindings in DSL syntax, plus witness event indices).
struct EvalWitness {
  bool value = true;
  std::vector<std::pair<std::string, std::string>> bindings;
  std::vector<int> events;
};
EvalWitness eval_formula_witness(const Run& run, const FormulaPtr& f,
                                 const SemanticsConfig& cfg);

// Evaluates the body of a top-level forall-thread formula with its variable
// pinned to one thread (the honesty checker's per-basic-sequence subject).
EvalWitness eval_forall_body_for_thread(const Run& run, const FormulaPtr& forall,
                                        int thread_id, const SemanticsConfig& cfg);

bool eval_atom(const Run& run, const Atom& a, const EvalContext& ctx,
               const SemanticsConfig& cfg);

// Computes (DH): X holds one exponent and the other half's public part.
bool eval_computes_dh(const Run& run, int thread, const TermPtr& dh_term,
                      const SemanticsConfig& cfg, int horizon = -1);
// Computes (HASH): X holds both the key and the payload.
bool eval_computes_hash(const Run& run, int thread, const TermPtr& hash_term,
                        const SemanticsConfig& cfg, int horizon = -1);

// All closed instances of a schema whose free variables are the given
// quantifier-less thread/term/agent variables, enumerated over the run's
// domains in deterministic order.
struct SchemaVar {
  enum class Kind { Thread, Term, Agent } kind;
  std::string name;
};
std::vector<FormulaPtr> axiom_instances(const Run& run, const FormulaPtr& schema,
                                        const std::vector<SchemaVar>& vars,
                                        const SemanticsConfig& cfg);

// Substitutes term bindings into every atom of f (used to freeze failing
// instances for witness replay).
FormulaPtr substitute(const FormulaPtr& f, const Subst& terms,
                      const std::map<std::string, int>& threads,
                      const SemanticsConfig& cfg);

}  // namespace pcl
