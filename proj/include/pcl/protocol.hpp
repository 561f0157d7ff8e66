// Protocol descriptions: roles as ordered action lists, setup declarations
// and the basic-sequence decomposition used by honesty-style checks.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcl/term.hpp"

namespace pcl {

enum class ActionKind : std::uint8_t { New, Send, Receive, Enc, Dec, Sign, Verify };

const char* action_kind_name(ActionKind k);

// One role action. Field use per kind:
//   New:     out_var (the fresh variable)
//   Send:    from/to optional, payload; wire = (from,to,payload) when present
//   Receive: from/to optional, payload is the match pattern (same wire rule)
//   Enc:     out_var := enc payload, key
//   Dec:     out_var := dec payload, key   (payload names the ciphertext)
//   Sign:    out_var := sign payload, key  (key names the signing agent)
//   Verify:  verify payload_pre, payload, key  (sig term, expected payload, signer)
struct Action {
  ActionKind kind;
  TermPtr from, to;
  TermPtr payload;
  TermPtr key;
  TermPtr out_var;
  TermPtr sig_term;  // Verify only
  // Receives that feed role parameters in honesty-mode checks; their events
  // are marked synthetic and stay invisible to action predicates.
  bool synthetic_feed = false;

  // Full message/pattern as it travels the network (Send/Receive).
  TermPtr wire() const;
};

struct Role {
  std::string name;
  std::vector<TermPtr> params;  // agent variables; params[0] is self
  std::vector<Action> body;

  const TermPtr& self() const { return params.front(); }
};

// Named symmetric key constant with the agents that hold it.
struct NamedKey {
  std::string name;
  std::vector<std::string> holders;
};

struct Setup {
  std::vector<std::string> honest;       // honest agent names
  std::vector<std::string> agents;       // full agent pool (includes honest)
  std::vector<NamedKey> keys;
  std::vector<TermPtr> leaks;            // ground terms the intruder starts with

  bool is_honest(const std::string& a) const;
};

struct Protocol {
  std::string name;
  Setup setup;
  std::vector<Role> roles;

  const Role* find_role(const std::string& name) const;
};

// Contiguous slice [begin,end) of a role body: starts at the role's first
// action or at a receive, and contains no further receives.
struct BasicSequence {
  const Role* role;
  int index;
  std::size_t begin, end;

  std::vector<Action> actions() const {
    return {role->body.begin() + static_cast<long>(begin),
            role->body.begin() + static_cast<long>(end)};
  }
};

std::vector<BasicSequence> basic_sequences(const Role& role);

// Structural checks: distinct params, unique role names, bind-before-use,
// key holder references, self-only signing keys. Throws SemanticError.
void validate(const Protocol& p);

struct SemanticError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// New protocol whose role body is the concatenation of the role's basic
// sequences in the given order (1-based positions of the original
// sequences). Rejects permutations that leave a variable unbound within
// its sequence.
Protocol permute_basic_sequences(const Protocol& p, const std::string& role_name,
                                 const std::vector<int>& order);

// Pretty-print back to the DSL; parse(print(p)) is structurally identical.
std::string print_protocol(const Protocol& p);
std::string print_action(const Action& a, std::map<std::string, Sort>& declared);

}  // namespace pcl
