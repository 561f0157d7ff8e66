// Axiom catalogue, bounded counterexample search, the per-basic-sequence
// honesty-style invariant checker and the canned reproduction drivers.
//
// "Holds" always means holds-within-bounds: no counterexample across all
// runs inside the configured limits, never a claim of unbounded validity.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pcl/engine.hpp"
#include "pcl/logic.hpp"

namespace pcl {

struct AxiomEntry {
  std::string name;
  std::string citation;     // where the rule appears in the PCL literature
  std::string description;
  FormulaPtr schema;        // closed formula
  bool needs_dh = false;
};

const std::vector<AxiomEntry>& axiom_catalogue();
const AxiomEntry* find_axiom(const std::string& name);

// The CR signature invariant (gamma-style) used by several drivers.
FormulaPtr cr_signature_invariant();

enum class Outcome : std::uint8_t { HoldsWithinBounds, Counterexample, Error };
const char* outcome_name(Outcome o);

struct CheckStats {
  long runs_explored = 0;
  bool depth_exhausted = false;
  long receives_total = 0;
  long receives_intruder_composed = 0;
  double millis = 0;
};

struct CheckWitness {
  Run run;
  std::string instance;  // failing instance, formula syntax
  std::vector<std::pair<std::string, std::string>> bindings;
  std::vector<int> events;
  // Keeps synthesized protocols alive for witness runs that reference them.
  std::shared_ptr<const Protocol> owner;
};

struct Verdict {
  std::string subject;  // axiom or invariant name
  Outcome outcome = Outcome::HoldsWithinBounds;
  SemanticsConfig config;
  Bounds bounds;
  std::optional<CheckWitness> witness;
  CheckStats stats;
  std::string note;
};

// Evaluates the entry's schema on every enumerated run; first failure (in
// deterministic run order) becomes the counterexample. workers > 1 spreads
// formula evaluation over threads; the verdict is still the first failing
// run in enumeration order.
Verdict check(const Protocol& p, const AxiomEntry& entry, const Bounds& bounds,
              const SemanticsConfig& cfg, int workers = 1);

// Same search for an arbitrary closed invariant.
Verdict check_formula(const Protocol& p, const std::string& name, const FormulaPtr& f,
                      const Bounds& bounds, const SemanticsConfig& cfg, int workers = 1);

// Per-basic-sequence honesty-style check. Every basic sequence of the
// protocol becomes an independent role (free variables fed through a
// synthetic first receive); with cfg.precedence_rule, each sequence instead
// carries its role prefix. The invariant must be a top-level forall-thread
// formula; the verdict for a sequence covers the instances whose subject
// thread executes that sequence.
struct HonestyVerdict {
  std::string role;
  int bs_index = 0;
  Outcome outcome = Outcome::HoldsWithinBounds;
  std::optional<CheckWitness> witness;
};
std::vector<HonestyVerdict> check_invariant_honesty_mode(const Protocol& p,
                                                         const FormulaPtr& invariant,
                                                         const Bounds& bounds,
                                                         const SemanticsConfig& cfg);

// Searches for a run satisfying the given closed formula (typically an
// existentially quantified event-order pattern).
std::optional<Run> executable(const Protocol& p, const FormulaPtr& pattern,
                              const Bounds& bounds, const SemanticsConfig& cfg);

struct ReproReport {
  std::string case_id;
  bool as_expected = false;
  std::string narrative;
  std::vector<Verdict> verdicts;
  std::vector<HonestyVerdict> honesty;
  std::optional<Run> witness_run;
};

std::vector<std::string> repro_case_ids();
ReproReport reproduce(const std::string& case_id, const std::string& fixtures_dir,
                      std::optional<Bounds> bounds_override = std::nullopt,
                      std::optional<SemanticsConfig> config_override = std::nullopt,
                      int workers = 1);

// Stable-ordered structured rendering (JSON); the timing field is always
// the last line so reports stay byte-comparable without it.
std::string verdict_to_json(const Verdict& v);
std::string verdict_to_text(const Verdict& v);
std::string repro_to_json(const ReproReport& r);
std::string repro_to_text(const ReproReport& r);

}  // namespace pcl
