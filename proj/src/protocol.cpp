#include "pcl/protocol.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace pcl {

const char* action_kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::New: return "new";
    case ActionKind::Send: return "send";
    case ActionKind::Receive: return "receive";
    case ActionKind::Enc: return "enc";
    case ActionKind::Dec: return "dec";
    case ActionKind::Sign: return "sign";
    case ActionKind::Verify: return "verify";
  }
  return "?";
}

TermPtr Action::wire() const {
  if (from && to) {
    const TermPtr parts[] = {from, to, payload};
    return Term::tuple(parts);
  }
  return payload;
}

bool Setup::is_honest(const std::string& a) const {
  return std::find(honest.begin(), honest.end(), a) != honest.end();
}

const Role* Protocol::find_role(const std::string& n) const {
  for (const auto& r : roles)
    if (r.name == n) return &r;
  return nullptr;
}

std::vector<BasicSequence> basic_sequences(const Role& role) {
  std::vector<BasicSequence> out;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= role.body.size(); ++i) {
    if (i == role.body.size() || role.body[i].kind == ActionKind::Receive) {
      out.push_back(BasicSequence{&role, static_cast<int>(out.size()), start, i});
      start = i;
    }
  }
  return out;
}

namespace {

void collect_vars(const TermPtr& t, std::vector<TermPtr>& out) {
  if (!t) return;
  if (t->kind() == TermKind::Var) {
    out.push_back(t);
    return;
  }
  collect_vars(t->left(), out);
  collect_vars(t->right(), out);
}

// Variables an action reads (must be bound already) and binds.
void action_uses(const Action& a, std::vector<TermPtr>& uses, std::vector<TermPtr>& binds) {
  switch (a.kind) {
    case ActionKind::New:
      binds.push_back(a.out_var);
      break;
    case ActionKind::Send:
      collect_vars(a.from, uses);
      collect_vars(a.to, uses);
      collect_vars(a.payload, uses);
      break;
    case ActionKind::Receive: {
      collect_vars(a.from, uses);
      collect_vars(a.to, uses);
      collect_vars(a.payload, binds);  // pattern vars bind; bound ones constrain
      break;
    }
    case ActionKind::Enc:
    case ActionKind::Dec:
    case ActionKind::Sign:
      collect_vars(a.payload, uses);
      collect_vars(a.key, uses);
      binds.push_back(a.out_var);
      break;
    case ActionKind::Verify:
      collect_vars(a.sig_term, uses);
      collect_vars(a.payload, uses);
      collect_vars(a.key, uses);
      break;
  }
}

void check_role_bindings(const Role& role, const Protocol& p) {
  std::set<std::string> bound;
  for (const auto& prm : role.params) {
    if (!bound.insert(prm->name()).second)
      throw SemanticError("role " + role.name + ": duplicate parameter " + prm->name());
  }
  auto known_key = [&](const std::string& n) {
    for (const auto& k : p.setup.keys)
      if (k.name == n) return true;
    return false;
  };
  (void)known_key;
  for (const auto& act : role.body) {
    std::vector<TermPtr> uses, binds;
    action_uses(act, uses, binds);
    for (const auto& v : uses)
      if (!bound.count(v->name()))
        throw SemanticError("role " + role.name + ": variable " + v->name() +
                            " used before being bound");
    for (const auto& v : binds) bound.insert(v->name());
    // Signing is always done with the executing agent's own key.
    if (act.kind == ActionKind::Sign && !equal(act.key, role.self()) &&
        !(act.key->kind() == TermKind::Agent))
      throw SemanticError("role " + role.name + ": sign key must be the role's self agent");
  }
}

void check_setup(const Protocol& p) {
  std::set<std::string> pool(p.setup.agents.begin(), p.setup.agents.end());
  for (const auto& h : p.setup.honest)
    if (!pool.count(h))
      throw SemanticError("setup: honest agent " + h + " not in agent pool");
  for (const auto& k : p.setup.keys)
    for (const auto& h : k.holders)
      if (!pool.count(h))
        throw SemanticError("setup: key " + k.name + " holder " + h + " unknown");
  for (const auto& t : p.setup.leaks)
    if (!t->ground())
      throw SemanticError("setup: leaked terms must be ground");
}

}  // namespace

void validate(const Protocol& p) {
  std::set<std::string> names;
  for (const auto& r : p.roles) {
    if (!names.insert(r.name).second)
      throw SemanticError("duplicate role name: " + r.name);
    if (r.params.empty())
      throw SemanticError("role " + r.name + " needs at least a self parameter");
    check_role_bindings(r, p);
  }
  check_setup(p);
}

Protocol permute_basic_sequences(const Protocol& p, const std::string& role_name,
                                 const std::vector<int>& order) {
  const Role* role = p.find_role(role_name);
  if (!role) throw SemanticError("no such role: " + role_name);
  auto bss = basic_sequences(*role);
  if (order.size() != bss.size())
    throw SemanticError("permutation size does not match basic-sequence count");
  std::vector<bool> seen(bss.size(), false);
  for (int idx : order) {
    if (idx < 1 || idx > static_cast<int>(bss.size()) || seen[idx - 1])
      throw SemanticError("invalid permutation");
    seen[idx - 1] = true;
  }

  Role permuted = *role;
  permuted.body.clear();
  for (int idx : order) {
    auto acts = bss[idx - 1].actions();
    permuted.body.insert(permuted.body.end(), acts.begin(), acts.end());
  }

  Protocol out = p;
  for (auto& r : out.roles)
    if (r.name == role_name) r = permuted;
  // Re-validation catches sequences that consume variables bound elsewhere.
  validate(out);
  return out;
}

namespace {

std::string print_term_list(const TermPtr& from, const TermPtr& to, const TermPtr& payload,
                            std::map<std::string, Sort>& declared) {
  std::ostringstream os;
  if (from && to)
    os << print_pattern(from, declared) << ',' << print_pattern(to, declared) << ',';
  os << print_pattern(payload, declared);
  return os.str();
}

}  // namespace

std::string print_action(const Action& a, std::map<std::string, Sort>& declared) {
  std::ostringstream os;
  switch (a.kind) {
    case ActionKind::New:
      os << "new " << a.out_var->name() << ':' << sort_name(a.out_var->tag_sort());
      declared.emplace(a.out_var->name(), a.out_var->tag_sort());
      break;
    case ActionKind::Send:
      os << "send " << print_term_list(a.from, a.to, a.payload, declared);
      break;
    case ActionKind::Receive:
      os << "receive " << print_term_list(a.from, a.to, a.payload, declared);
      break;
    case ActionKind::Enc:
      os << a.out_var->name() << " := enc " << print_pattern(a.payload, declared) << ", "
         << print_pattern(a.key, declared);
      declared.emplace(a.out_var->name(), a.out_var->tag_sort());
      break;
    case ActionKind::Dec:
      os << a.out_var->name();
      if (a.out_var->tag_sort() != Sort::Message)
        os << ':' << sort_name(a.out_var->tag_sort());
      os << " := dec " << print_pattern(a.payload, declared) << ", "
         << print_pattern(a.key, declared);
      declared.emplace(a.out_var->name(), a.out_var->tag_sort());
      break;
    case ActionKind::Sign:
      os << a.out_var->name() << " := sign " << print_pattern(a.payload, declared) << ", "
         << print_pattern(a.key, declared);
      declared.emplace(a.out_var->name(), a.out_var->tag_sort());
      break;
    case ActionKind::Verify:
      os << "verify " << print_pattern(a.sig_term, declared) << ", "
         << print_pattern(a.payload, declared) << ", " << print_pattern(a.key, declared);
      break;
  }
  os << ';';
  return os.str();
}

std::string print_protocol(const Protocol& p) {
  std::ostringstream os;
  os << "protocol " << p.name << "\n";
  os << "setup {\n";
  if (!p.setup.honest.empty()) {
    os << "  honest";
    for (const auto& h : p.setup.honest) os << ' ' << h;
    os << ";\n";
  }
  // Only list agents beyond the honest ones explicitly.
  std::vector<std::string> extra;
  for (const auto& a : p.setup.agents)
    if (!p.setup.is_honest(a)) extra.push_back(a);
  if (!extra.empty()) {
    os << "  agents";
    for (const auto& a : extra) os << ' ' << a;
    os << ";\n";
  }
  for (const auto& k : p.setup.keys) {
    os << "  key " << k.name;
    if (!k.holders.empty()) {
      os << " holders";
      for (const auto& h : k.holders) os << ' ' << h;
    }
    os << ";\n";
  }
  for (const auto& t : p.setup.leaks) os << "  intruder knows " << to_string(t) << ";\n";
  os << "}\n";
  for (const auto& r : p.roles) {
    os << "role " << r.name << '(';
    for (std::size_t i = 0; i < r.params.size(); ++i) {
      if (i) os << ", ";
      os << r.params[i]->name();
    }
    os << ") {\n";
    std::map<std::string, Sort> declared;
    for (const auto& prm : r.params) declared.emplace(prm->name(), Sort::Agent);
    for (const auto& a : r.body) os << "  " << print_action(a, declared) << '\n';
    os << "}\n";
  }
  return os.str();
}

}  // namespace pcl
