// Bounded operational semantics: intruder deduction, receive grounding and
// depth-first enumeration of runs.
//
// The network is the adversary: there are no intruder threads. Every sent
// message lands in the intruder's knowledge, and every receive is fed some
// message the intruder can derive. Scheduling is compressed to basic
// sequences (honest agents only block at receives, so the actions that
// follow a receive execute back to back); a step is taken only when its
// whole basic sequence fits inside the run-length bound, which keeps every
// yielded run aligned on basic-sequence boundaries.

#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pcl/protocol.hpp"
#include "pcl/term.hpp"

namespace pcl {

// Saturated intruder (or thread) knowledge: decompositions are applied
// eagerly, construction is checked on demand by derive(). Key terms are
// never constructible, so decryption tests stay inside the analyzed set.
class Knowledge {
 public:
  explicit Knowledge(const SemanticsConfig& cfg) : cfg_(&cfg) {}

  void add(const TermPtr& t);
  bool holds(const TermPtr& t) const;  // member of the analyzed set

  // Goal-directed derivability with at most `depth` constructor
  // applications on top of analyzed terms. Sets *exhausted when a failure
  // is attributable to the depth bound.
  bool derive(const TermPtr& goal, int depth, bool* exhausted = nullptr) const;

  // Analyzed terms in canonical order.
  const std::set<TermPtr, TermLess>& analyzed() const { return analyzed_; }

  const SemanticsConfig& config() const { return *cfg_; }

 private:
  void saturate(const TermPtr& t);
  bool can_invert(const TermPtr& key) const;

  const SemanticsConfig* cfg_;
  std::set<TermPtr, TermLess> analyzed_;
  std::vector<TermPtr> parked_;  // ciphertexts awaiting a usable key
};

// Inverse of an encryption key under the scheme, or null when the key
// cannot be used for decryption at all.
TermPtr decryption_key(const TermPtr& enc_key, const SemanticsConfig& cfg);

struct ThreadInfo {
  int id;
  const Role* role;
  std::string role_name;
  std::string agent;
  bool honest;
  Subst binding;        // final parameter/local assignment
  std::size_t pc = 0;   // final program counter
};

struct Event {
  int index;
  int thread;
  ActionKind kind;
  TermPtr term;        // wire (send/receive), nonce (new), ciphertext
                       // (enc/dec), signature (verify/sign)
  TermPtr key;         // enc/dec/hash key, signer
  TermPtr out;         // decrypted payload / constructed term
  std::size_t post_pc; // thread position after this event
  bool intruder_composed = false;  // receive fed a composed (not replayed) term
  bool synthetic = false;          // parameter-feed events in honesty mode
};

struct Run {
  const Protocol* protocol;
  SemanticsConfig config;
  Bounds bounds;
  std::vector<ThreadInfo> threads;
  std::vector<Event> events;
  // Intruder knowledge additions: (event index, term); index -1 = initial.
  std::vector<std::pair<int, TermPtr>> intruder_additions;
  // Per-thread local knowledge additions, same convention.
  std::vector<std::vector<std::pair<int, TermPtr>>> thread_additions;
  bool depth_exhausted = false;
  bool length_capped = false;

  // Intruder knowledge after the first `horizon` events (-1: all).
  Knowledge intruder_knowledge(int horizon = -1) const;
  // Everything thread `tid` holds after `horizon` events.
  Knowledge thread_knowledge(int tid, int horizon = -1) const;

  std::string trace() const;  // line-oriented, one event per line
};

// Terms every agent starts with: the agent pool, all public keys.
std::vector<TermPtr> public_initial_terms(const Protocol& p);
// The intruder additionally holds setup leaks and its own fresh values.
std::vector<TermPtr> intruder_initial_terms(const Protocol& p);

using RunSink = std::function<bool(const Run&)>;  // return false to stop

// Depth-first enumeration of runs over every thread multiset of up to
// bounds.max_threads_per_role honest threads per role and every agent
// assignment from the setup pool. Deterministic order; runs with identical
// event traces are yielded once (first thread multiset wins).
void enumerate_runs(const Protocol& p, const Bounds& bounds,
                    const SemanticsConfig& cfg, const RunSink& sink);

// Convenience: collect everything (tests, small fixtures only).
std::vector<Run> collect_runs(const Protocol& p, const Bounds& bounds,
                              const SemanticsConfig& cfg);

// Per-thread step alternatives from a partial run: the ground events of the
// thread's next action. Exposed for tests; enumerate_runs drives whole
// basic sequences instead.
struct GroundStep {
  std::vector<Event> events;
  Subst binding;
};
std::vector<GroundStep> enabled_events(const Run& partial, int thread_id);

}  // namespace pcl
