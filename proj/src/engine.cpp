#include "pcl/engine.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace pcl {

// ── keys ──────────────────────────────────────────────────────────────────

TermPtr decryption_key(const TermPtr& enc_key, const SemanticsConfig& cfg) {
  switch (cfg.keys) {
    case KeyScheme::SymmetricOnly:
      return enc_key;
    case KeyScheme::AsymmetricOnly:
      if (enc_key->kind() == TermKind::PubKey) return Term::priv_key(enc_key->left());
      if (enc_key->kind() == TermKind::PrivKey) return Term::pub_key(enc_key->left());
      return nullptr;
    case KeyScheme::Split:
      if (enc_key->kind() == TermKind::PubKey) return Term::priv_key(enc_key->left());
      if (enc_key->kind() == TermKind::PrivKey) return Term::pub_key(enc_key->left());
      if (enc_key->kind() == TermKind::SymKey || enc_key->kind() == TermKind::SharedKey)
        return enc_key;
      return nullptr;  // agent-named keys have no usable inverse
  }
  return nullptr;
}

// ── knowledge ─────────────────────────────────────────────────────────────

void Knowledge::add(const TermPtr& t) {
  saturate(normalize_dh(t, *cfg_));
}

void Knowledge::saturate(const TermPtr& t) {
  if (!analyzed_.insert(t).second) return;
  switch (t->kind()) {
    case TermKind::Pair:
      saturate(t->left());
      saturate(t->right());
      break;
    case TermKind::Sig:
      if (cfg_->sig_reveals_payload) saturate(t->left());
      break;
    case TermKind::Enc: {
      if (can_invert(t->right()))
        saturate(t->left());
      else
        parked_.push_back(t);
      break;
    }
    default:
      break;
  }
  // A new term may unlock parked ciphertexts (it could be, or contain, a key).
  for (std::size_t i = 0; i < parked_.size();) {
    if (analyzed_.count(parked_[i]->left())) {
      parked_.erase(parked_.begin() + static_cast<long>(i));
      continue;
    }
    if (can_invert(parked_[i]->right())) {
      TermPtr payload = parked_[i]->left();
      parked_.erase(parked_.begin() + static_cast<long>(i));
      saturate(payload);
      i = 0;  // restart; saturation may have unlocked more
      continue;
    }
    ++i;
  }
}

bool Knowledge::can_invert(const TermPtr& key) const {
  TermPtr dk = decryption_key(key, *cfg_);
  return dk && analyzed_.count(normalize_dh(dk, *cfg_)) > 0;
}

bool Knowledge::holds(const TermPtr& t) const {
  return analyzed_.count(normalize_dh(t, *cfg_)) > 0;
}

bool Knowledge::derive(const TermPtr& goal_in, int depth, bool* exhausted) const {
  TermPtr goal = normalize_dh(goal_in, *cfg_);
  if (analyzed_.count(goal)) return true;
  bool composite;
  switch (goal->kind()) {
    case TermKind::Pair:
    case TermKind::Enc:
    case TermKind::Sig:
    case TermKind::Hash:
    case TermKind::DhG:
    case TermKind::DhH:
      composite = true;
      break;
    default:
      composite = false;
  }
  if (!composite) return false;  // atoms and keys are never constructed
  if (depth <= 0) {
    if (exhausted) *exhausted = true;
    return false;
  }
  switch (goal->kind()) {
    case TermKind::Pair:
    case TermKind::Hash:
      return derive(goal->left(), depth - 1, exhausted) &&
             derive(goal->right(), depth - 1, exhausted);
    case TermKind::Enc:
      return derive(goal->left(), depth - 1, exhausted) &&
             derive(goal->right(), depth - 1, exhausted);
    case TermKind::Sig: {
      const TermPtr& signer = goal->right();
      TermPtr sig_key =
          signer->kind() == TermKind::Agent ? Term::priv_key(signer) : signer;
      return derive(goal->left(), depth - 1, exhausted) &&
             derive(sig_key, depth - 1, exhausted);
    }
    case TermKind::DhG:
      return derive(goal->left(), depth - 1, exhausted);
    case TermKind::DhH: {
      const TermPtr& a = goal->left();
      const TermPtr& b = goal->right();
      if (derive(a, depth - 1, exhausted) &&
          derive(Term::dh_g(b), depth - 1, exhausted))
        return true;
      if (cfg_->dh_theory && derive(b, depth - 1, exhausted) &&
          derive(Term::dh_g(a), depth - 1, exhausted))
        return true;
      return false;
    }
    default:
      return false;
  }
}

// ── initial knowledge ─────────────────────────────────────────────────────

std::vector<TermPtr> public_initial_terms(const Protocol& p) {
  std::vector<TermPtr> out;
  for (const auto& a : p.setup.agents) {
    out.push_back(Term::agent(a));
    out.push_back(Term::pub_key(Term::agent(a)));
  }
  return out;
}

std::vector<TermPtr> intruder_initial_terms(const Protocol& p) {
  std::vector<TermPtr> out = public_initial_terms(p);
  for (const auto& t : p.setup.leaks) out.push_back(t);
  // The intruder's own fresh-value pool.
  out.push_back(Term::nonce("ni1"));
  out.push_back(Term::nonce("ni2"));
  return out;
}

namespace {

std::vector<TermPtr> thread_initial_terms(const Protocol& p, const std::string& self) {
  std::vector<TermPtr> out = public_initial_terms(p);
  TermPtr me = Term::agent(self);
  out.push_back(Term::priv_key(me));
  for (const auto& a : p.setup.agents)
    if (a != self) out.push_back(Term::shared_key(me, Term::agent(a)));
  for (const auto& k : p.setup.keys) {
    bool held = k.holders.empty()
                    ? p.setup.is_honest(self)
                    : std::find(k.holders.begin(), k.holders.end(), self) != k.holders.end();
    if (held) out.push_back(Term::sym_key(k.name));
  }
  return out;
}

// ── receive grounding ─────────────────────────────────────────────────────

struct Cand {
  Subst sigma;
  TermPtr wire;
};

int compare_subst(const Subst& a, const Subst& b) {
  auto it1 = a.begin();
  auto it2 = b.begin();
  for (; it1 != a.end() && it2 != b.end(); ++it1, ++it2) {
    if (int c = it1->first.compare(it2->first); c != 0) return c < 0 ? -1 : 1;
    if (int c = compare(it1->second, it2->second); c != 0) return c;
  }
  if (it1 != a.end()) return 1;
  if (it2 != b.end()) return -1;
  return 0;
}

void dedupe_cands(std::vector<Cand>& cs) {
  std::sort(cs.begin(), cs.end(), [](const Cand& a, const Cand& b) {
    if (int c = compare(a.wire, b.wire); c != 0) return c < 0;
    return compare_subst(a.sigma, b.sigma) < 0;
  });
  cs.erase(std::unique(cs.begin(), cs.end(),
                       [](const Cand& a, const Cand& b) {
                         return equal(a.wire, b.wire) &&
                                compare_subst(a.sigma, b.sigma) == 0;
                       }),
           cs.end());
}

// All (substitution, ground wire) pairs instantiating `pattern` with a term
// the intruder can derive within `depth` constructor applications.
// Matching against the analyzed closure costs nothing; each synthesized
// constructor level costs one unit of depth.
void ground_pattern(const TermPtr& pattern, const Subst& sigma, const Knowledge& know,
                    int depth, bool* exhausted, std::vector<Cand>& out) {
  const SemanticsConfig& cfg = know.config();
  TermPtr p = apply(sigma, pattern, cfg, false);
  if (p->ground()) {
    if (know.derive(p, depth, exhausted)) out.push_back({sigma, normalize_dh(p, cfg)});
    return;
  }
  // Deliver something already in hand.
  for (const TermPtr& t : know.analyzed())
    for (Subst& m : match_term_all(p, t, sigma, cfg)) out.push_back({std::move(m), t});

  // Compose a fresh term of the pattern's shape.
  if (depth <= 0) {
    if (exhausted) *exhausted = true;
    dedupe_cands(out);
    return;
  }
  switch (p->kind()) {
    case TermKind::Pair:
    case TermKind::Enc:
    case TermKind::Hash:
    case TermKind::Sig: {
      std::vector<Cand> lefts;
      ground_pattern(p->left(), sigma, know, depth - 1, exhausted, lefts);
      for (const Cand& l : lefts) {
        std::vector<Cand> rights;
        ground_pattern(p->right(), l.sigma, know, depth - 1, exhausted, rights);
        for (const Cand& r : rights) {
          if (p->kind() == TermKind::Pair) {
            out.push_back({r.sigma, Term::pair(l.wire, r.wire)});
            continue;
          }
          if (p->kind() == TermKind::Enc) {
            out.push_back({r.sigma, Term::enc(l.wire, r.wire)});
            continue;
          }
          if (p->kind() == TermKind::Hash) {
            out.push_back({r.sigma, Term::hash(l.wire, r.wire)});
            continue;
          }
          // Sig: composing requires the signer's private key.
          TermPtr sig_key = r.wire->kind() == TermKind::Agent
                                ? Term::priv_key(r.wire)
                                : r.wire;
          if (know.derive(sig_key, depth - 1, exhausted))
            out.push_back({r.sigma, Term::sig(l.wire, r.wire)});
        }
      }
      break;
    }
    case TermKind::DhG: {
      std::vector<Cand> exps;
      ground_pattern(p->left(), sigma, know, depth - 1, exhausted, exps);
      for (const Cand& e : exps) out.push_back({e.sigma, Term::dh_g(e.wire)});
      break;
    }
    case TermKind::DhH: {
      // Exponent candidates may also come from public parts g(e) in hand.
      auto child_cands = [&](const TermPtr& cp, const Subst& s) {
        std::vector<Cand> cands;
        ground_pattern(cp, s, know, depth - 1, exhausted, cands);
        for (const TermPtr& t : know.analyzed())
          if (t->kind() == TermKind::DhG)
            for (Subst& m : match_term_all(cp, t->left(), s, cfg))
              cands.push_back({std::move(m), t->left()});
        dedupe_cands(cands);
        return cands;
      };
      for (const Cand& l : child_cands(p->left(), sigma))
        for (const Cand& r : child_cands(p->right(), l.sigma)) {
          TermPtr whole = normalize_dh(Term::dh_h(l.wire, r.wire), cfg);
          if (know.derive(whole, depth, exhausted)) out.push_back({r.sigma, whole});
        }
      break;
    }
    default:
      break;  // bare variables and atoms: analyzed matches only
  }
  dedupe_cands(out);
}

// ── search state ──────────────────────────────────────────────────────────

struct ThreadState {
  int id;
  const Role* role;
  std::string agent;
  bool honest;
  Subst binding;
  std::size_t pc = 0;
  int fresh_seq = 0;
  std::vector<std::pair<int, TermPtr>> additions;
  std::vector<std::size_t> bs_starts;

  std::size_t bs_end(std::size_t from) const {
    for (std::size_t s : bs_starts)
      if (s > from) return s;
    return role->body.size();
  }
};

struct SearchState {
  const Protocol* protocol;
  const SemanticsConfig* cfg;
  const Bounds* bounds;
  std::vector<ThreadState> threads;
  std::vector<Event> events;
  Knowledge intruder;
  std::vector<std::pair<int, TermPtr>> intruder_adds;
  std::set<TermPtr, TermLess> sent_wires;
  bool depth_exhausted = false;
};

// Result of running one whole basic sequence of one thread.
struct StepAlt {
  std::vector<Event> events;
  Subst binding;
  int fresh_seq;
  std::vector<std::pair<int, TermPtr>> additions;       // thread additions
  std::vector<TermPtr> sends;                           // wire per send event
  bool exhausted = false;
};

// Narrow a receive pattern with the verify/dec guards that follow it inside
// the same basic sequence: a variable later verified against
// sig{payload}signer can only ever be such a signature, and a variable
// later decrypted with key K can only be enc{...}K. Returns the rewritten
// pattern plus the variable reconstruction map.
TermPtr narrow_with_guards(const TermPtr& pattern, const Role& role, std::size_t begin,
                           std::size_t end, const Subst& bound,
                           const SemanticsConfig& cfg,
                           std::vector<std::pair<std::string, TermPtr>>& rebuilt) {
  TermPtr p = pattern;
  auto vars_of = [](const TermPtr& t) {
    std::vector<std::string> names;
    std::vector<TermPtr> all;
    collect_subterms(t, all);
    for (const auto& s : all)
      if (s->kind() == TermKind::Var) names.push_back(s->name());
    return names;
  };
  auto occurs = [&](const TermPtr& t, const std::string& name) {
    for (const auto& n : vars_of(t))
      if (n == name) return true;
    return false;
  };
  for (std::size_t i = begin + 1; i < end; ++i) {
    const Action& act = role.body[i];
    TermPtr var, repl;
    std::string fresh_out;  // variable the guard itself introduces
    if (act.kind == ActionKind::Verify && act.sig_term->kind() == TermKind::Var) {
      var = act.sig_term;
      repl = Term::sig(act.payload, act.key);
    } else if (act.kind == ActionKind::Dec && act.payload->kind() == TermKind::Var) {
      var = act.payload;
      repl = Term::enc(act.out_var, act.key);
      fresh_out = act.out_var->name();
    } else {
      continue;
    }
    if (!occurs(p, var->name())) continue;
    // Guard components must be resolvable: already bound, bound by this
    // same receive, or the guard's own output variable.
    bool ok = true;
    for (const auto& n : vars_of(repl))
      if (!bound.count(n) && !occurs(p, n) && n != fresh_out) ok = false;
    if (!ok || occurs(repl, var->name())) continue;
    Subst one{{var->name(), repl}};
    p = apply(one, p, cfg, false);
    rebuilt.emplace_back(var->name(), repl);
  }
  return p;
}

// Execute the thread's next basic sequence; each receive grounding that
// survives the sequence's guards yields one alternative. *saw_exhaustion is
// set when any grounding hit the intruder depth bound.
void run_basic_sequence(const SearchState& st, const ThreadState& th,
                        std::vector<StepAlt>& out, bool* saw_exhaustion) {
  if (th.pc >= th.role->body.size()) return;
  const std::size_t end = th.bs_end(th.pc);
  const int base_index = static_cast<int>(st.events.size());
  const SemanticsConfig& cfg = *st.cfg;

  struct Frame {
    std::size_t pc;
    StepAlt alt;
  };
  std::vector<Frame> stack;
  stack.push_back({th.pc, StepAlt{{}, th.binding, th.fresh_seq, {}, {}, false}});

  while (!stack.empty()) {
    Frame fr = std::move(stack.back());
    stack.pop_back();
    if (fr.pc == end) {
      out.push_back(std::move(fr.alt));
      continue;
    }
    const Action& act = th.role->body[fr.pc];
    const int eidx = base_index + static_cast<int>(fr.alt.events.size());
    auto push_event = [&](Event ev, Frame next) {
      ev.index = eidx;
      ev.thread = th.id;
      ev.post_pc = fr.pc + 1;
      next.alt.events.push_back(std::move(ev));
      next.pc = fr.pc + 1;
      stack.push_back(std::move(next));
    };

    switch (act.kind) {
      case ActionKind::New: {
        Frame next = fr;
        std::string name = act.out_var->name() + "#" + std::to_string(th.id) + "." +
                           std::to_string(next.alt.fresh_seq++);
        TermPtr n = Term::nonce(name, th.id, act.out_var->tag_sort());
        next.alt.binding[act.out_var->name()] = n;
        next.alt.additions.emplace_back(eidx, n);
        push_event(Event{0, 0, ActionKind::New, n, nullptr, nullptr, 0, false, false},
                   std::move(next));
        break;
      }
      case ActionKind::Send: {
        Frame next = fr;
        TermPtr wire = apply(fr.alt.binding, act.wire(), cfg, true);
        next.alt.sends.push_back(wire);
        push_event(Event{0, 0, ActionKind::Send, wire, nullptr, nullptr, 0, false, false},
                   std::move(next));
        break;
      }
      case ActionKind::Receive: {
        std::vector<std::pair<std::string, TermPtr>> rebuilt;
        TermPtr pattern =
            narrow_with_guards(act.wire(), *th.role, fr.pc, end, fr.alt.binding, cfg, rebuilt);
        std::vector<Cand> cands;
        bool exhausted = false;
        ground_pattern(pattern, fr.alt.binding, st.intruder,
                       st.bounds->max_intruder_depth, &exhausted, cands);
        if (exhausted && saw_exhaustion) *saw_exhaustion = true;
        for (const Cand& c : cands) {
          Frame next = fr;
          next.alt.exhausted = next.alt.exhausted || exhausted;
          next.alt.binding = c.sigma;
          for (const auto& [name, repl] : rebuilt)
            next.alt.binding[name] = apply(next.alt.binding, repl, cfg, true);
          next.alt.additions.emplace_back(eidx, c.wire);
          bool replayed = false;
          for (const auto& w : st.sent_wires) replayed = replayed || equal(w, c.wire);
          push_event(Event{0, 0, ActionKind::Receive, c.wire, nullptr, nullptr, 0,
                           !replayed, act.synthetic_feed},
                     std::move(next));
        }
        break;
      }
      case ActionKind::Enc: {
        Frame next = fr;
        TermPtr payload = apply(fr.alt.binding, act.payload, cfg, true);
        TermPtr key = apply(fr.alt.binding, act.key, cfg, true);
        TermPtr ct = Term::enc(payload, key);
        next.alt.binding[act.out_var->name()] = ct;
        next.alt.additions.emplace_back(eidx, ct);
        push_event(Event{0, 0, ActionKind::Enc, ct, key, payload, 0, false, false},
                   std::move(next));
        break;
      }
      case ActionKind::Dec: {
        TermPtr ct = apply(fr.alt.binding, act.payload, cfg, true);
        TermPtr key = apply(fr.alt.binding, act.key, cfg, true);
        if (ct->kind() != TermKind::Enc) break;  // blocked
        TermPtr needed = decryption_key(ct->right(), cfg);
        if (!needed || !equal_mod_theory(needed, key, cfg)) break;  // blocked
        Frame next = fr;
        TermPtr payload = ct->left();
        next.alt.binding[act.out_var->name()] = payload;
        next.alt.additions.emplace_back(eidx, payload);
        push_event(Event{0, 0, ActionKind::Dec, ct, key, payload, 0, false, false},
                   std::move(next));
        break;
      }
      case ActionKind::Sign: {
        Frame next = fr;
        TermPtr payload = apply(fr.alt.binding, act.payload, cfg, true);
        TermPtr signer = apply(fr.alt.binding, act.key, cfg, true);
        TermPtr s = Term::sig(payload, signer);
        next.alt.binding[act.out_var->name()] = s;
        next.alt.additions.emplace_back(eidx, s);
        push_event(Event{0, 0, ActionKind::Sign, s, signer, payload, 0, false, false},
                   std::move(next));
        break;
      }
      case ActionKind::Verify: {
        TermPtr s = apply(fr.alt.binding, act.sig_term, cfg, true);
        TermPtr payload = apply(fr.alt.binding, act.payload, cfg, true);
        TermPtr signer = apply(fr.alt.binding, act.key, cfg, true);
        if (s->kind() != TermKind::Sig) break;                          // blocked
        if (!equal_mod_theory(s->left(), payload, cfg)) break;          // blocked
        if (!equal_mod_theory(s->right(), signer, cfg)) break;          // blocked
        Frame next = fr;
        push_event(Event{0, 0, ActionKind::Verify, s, signer, payload, 0, false, false},
                   std::move(next));
        break;
      }
    }
  }
  // Deterministic order over alternatives (the stack reversed receives).
  std::stable_sort(out.begin(), out.end(), [](const StepAlt& a, const StepAlt& b) {
    if (a.events.size() != b.events.size()) return a.events.size() < b.events.size();
    for (std::size_t i = 0; i < a.events.size(); ++i)
      if (int c = compare(a.events[i].term, b.events[i].term); c != 0) return c < 0;
    return compare_subst(a.binding, b.binding) < 0;
  });
}

// ── run assembly ──────────────────────────────────────────────────────────

Run make_run(const SearchState& st, bool capped) {
  Run r;
  r.protocol = st.protocol;
  r.config = *st.cfg;
  r.bounds = *st.bounds;
  r.events = st.events;
  r.intruder_additions = st.intruder_adds;
  r.depth_exhausted = st.depth_exhausted;
  r.length_capped = capped;
  for (const auto& th : st.threads) {
    ThreadInfo info;
    info.id = th.id;
    info.role = th.role;
    info.role_name = th.role->name;
    info.agent = th.agent;
    info.honest = th.honest;
    info.binding = th.binding;
    info.pc = th.pc;
    r.threads.push_back(std::move(info));
    r.thread_additions.push_back(th.additions);
  }
  return r;
}

struct Enumerator {
  const Protocol& p;
  const Bounds& bounds;
  const SemanticsConfig& cfg;
  const RunSink& sink;
  std::unordered_set<std::string> seen;
  bool stopped = false;

  void dfs(SearchState& st) {
    if (stopped) return;
    bool branched = false;
    bool any_alternative = false;
    for (auto& th : st.threads) {
      if (th.pc >= th.role->body.size()) continue;
      std::vector<StepAlt> alts;
      bool exhausted = false;
      run_basic_sequence(st, th, alts, &exhausted);
      st.depth_exhausted = st.depth_exhausted || exhausted;
      if (!alts.empty()) any_alternative = true;
      for (auto& alt : alts) {
        if (st.events.size() + alt.events.size() >
            static_cast<std::size_t>(bounds.max_run_length))
          continue;
        branched = true;
        apply_step(st, th, alt);
        if (stopped) return;
      }
    }
    if (!branched) yield(st, any_alternative);
  }

  void apply_step(SearchState& st, ThreadState& th, const StepAlt& alt) {
    // Copy-on-branch: cheap at desk scale.
    SearchState next = st;
    ThreadState& nth = next.threads[static_cast<std::size_t>(th.id)];
    nth.binding = alt.binding;
    nth.fresh_seq = alt.fresh_seq;
    nth.pc = alt.events.back().post_pc;
    for (const auto& ev : alt.events) next.events.push_back(ev);
    for (const auto& add : alt.additions) nth.additions.push_back(add);
    for (const auto& ev : alt.events)
      if (ev.kind == ActionKind::Send) {
        next.intruder.add(ev.term);
        next.intruder_adds.emplace_back(ev.index, ev.term);
        next.sent_wires.insert(normalize_dh(ev.term, cfg));
      }
    next.depth_exhausted = next.depth_exhausted || alt.exhausted;
    dfs(next);
  }

  void yield(const SearchState& st, bool any_alternative) {
    Run r = make_run(st, any_alternative);
    std::string key = r.trace();
    if (!seen.insert(key).second) return;
    if (!sink(r)) stopped = true;
  }
};

std::vector<std::vector<Subst>> role_assignments(const Protocol& p) {
  std::vector<std::vector<Subst>> per_role;
  for (const auto& role : p.roles) {
    std::vector<Subst> asgs;
    std::vector<std::size_t> idx(role.params.size(), 0);
    const auto& pool = p.setup.agents;
    if (pool.empty()) {
      per_role.push_back(asgs);
      continue;
    }
    for (;;) {
      Subst s;
      bool ok = true;
      for (std::size_t i = 0; i < role.params.size(); ++i)
        s[role.params[i]->name()] = Term::agent(pool[idx[i]]);
      // Self must be honest and hold every named key the role mentions.
      const std::string& self = pool[idx[0]];
      ok = p.setup.is_honest(self);
      if (ok) {
        for (const auto& k : p.setup.keys) {
          bool uses = false;
          for (const auto& act : role.body) {
            std::vector<TermPtr> all;
            if (act.payload) collect_subterms(act.payload, all);
            if (act.key) collect_subterms(act.key, all);
            if (act.sig_term) collect_subterms(act.sig_term, all);
            for (const auto& t : all)
              uses = uses || (t->kind() == TermKind::SymKey && t->name() == k.name);
          }
          if (!uses) continue;
          bool held = k.holders.empty()
                          ? p.setup.is_honest(self)
                          : std::find(k.holders.begin(), k.holders.end(), self) !=
                                k.holders.end();
          ok = ok && held;
        }
      }
      if (ok) asgs.push_back(std::move(s));
      // Advance odometer.
      std::size_t j = 0;
      for (; j < idx.size(); ++j) {
        if (++idx[j] < pool.size()) break;
        idx[j] = 0;
      }
      if (j == idx.size()) break;
    }
    per_role.push_back(std::move(asgs));
  }
  return per_role;
}

}  // namespace

void enumerate_runs(const Protocol& p, const Bounds& bounds, const SemanticsConfig& cfg,
                    const RunSink& sink) {
  bounds.validate();
  auto per_role = role_assignments(p);

  // Multisets of assignment indices per role, sizes 0..max_threads_per_role.
  std::vector<std::vector<std::vector<int>>> choices_per_role;
  for (const auto& asgs : per_role) {
    std::vector<std::vector<int>> choices;
    std::vector<int> cur;
    std::function<void(int, int)> rec = [&](int start, int remaining) {
      choices.push_back(cur);
      if (remaining == 0) return;
      for (int i = start; i < static_cast<int>(asgs.size()); ++i) {
        cur.push_back(i);
        rec(i, remaining - 1);
        cur.pop_back();
      }
    };
    rec(0, bounds.max_threads_per_role);
    // Smaller thread sets first, then lexicographic.
    std::sort(choices.begin(), choices.end(),
              [](const std::vector<int>& a, const std::vector<int>& b) {
                if (a.size() != b.size()) return a.size() < b.size();
                return a < b;
              });
    choices_per_role.push_back(std::move(choices));
  }

  Enumerator en{p, bounds, cfg, sink, {}, false};

  std::vector<std::size_t> pick(p.roles.size(), 0);
  for (;;) {
    // Build the thread multiset for this combination.
    SearchState st{&p, &cfg, &bounds, {}, {}, Knowledge(cfg), {}, {}, false};
    for (const TermPtr& t : intruder_initial_terms(p)) {
      st.intruder.add(t);
      st.intruder_adds.emplace_back(-1, t);
    }
    int tid = 0;
    for (std::size_t ri = 0; ri < p.roles.size(); ++ri) {
      for (int ai : choices_per_role[ri][pick[ri]]) {
        const Subst& asg = per_role[ri][ai];
        ThreadState th;
        th.id = tid++;
        th.role = &p.roles[ri];
        th.agent = asg.at(p.roles[ri].self()->name())->name();
        th.honest = p.setup.is_honest(th.agent);
        th.binding = asg;
        for (const TermPtr& t : thread_initial_terms(p, th.agent))
          th.additions.emplace_back(-1, t);
        auto bss = basic_sequences(*th.role);
        for (const auto& bs : bss) th.bs_starts.push_back(bs.begin);
        st.threads.push_back(std::move(th));
      }
    }
    en.dfs(st);
    if (en.stopped) return;

    std::size_t j = 0;
    for (; j < pick.size(); ++j) {
      if (++pick[j] < choices_per_role[j].size()) break;
      pick[j] = 0;
    }
    if (j == pick.size()) break;
  }
}

std::vector<Run> collect_runs(const Protocol& p, const Bounds& bounds,
                              const SemanticsConfig& cfg) {
  std::vector<Run> out;
  enumerate_runs(p, bounds, cfg, [&](const Run& r) {
    out.push_back(r);
    return true;
  });
  return out;
}

// ── Run accessors ─────────────────────────────────────────────────────────

Knowledge Run::intruder_knowledge(int horizon) const {
  Knowledge k(config);
  for (const auto& [idx, t] : intruder_additions)
    if (horizon < 0 || idx < horizon) k.add(t);
  return k;
}

Knowledge Run::thread_knowledge(int tid, int horizon) const {
  Knowledge k(config);
  for (const auto& [idx, t] : thread_additions[static_cast<std::size_t>(tid)])
    if (horizon < 0 || idx < horizon) k.add(t);
  return k;
}

std::string Run::trace() const {
  std::ostringstream os;
  for (const auto& ev : events) {
    const ThreadInfo& th = threads[static_cast<std::size_t>(ev.thread)];
    os << '#' << ev.index << "  T" << ev.thread << '(' << th.role_name << ',' << th.agent
       << ")  " << action_kind_name(ev.kind);
    if (ev.synthetic) os << '*';
    os << ' ' << to_string(ev.term);
    if (ev.kind == ActionKind::Dec) os << " -> " << to_string(ev.out);
    os << '\n';
  }
  return os.str();
}

// ── single-action view (tests) ────────────────────────────────────────────

std::vector<GroundStep> enabled_events(const Run& partial, int thread_id) {
  const ThreadInfo& th = partial.threads[static_cast<std::size_t>(thread_id)];
  const SemanticsConfig& cfg = partial.config;
  // Reconstruct the thread's binding/pc by replaying its events.
  Subst binding;
  for (const auto& prm : th.role->params)
    binding[prm->name()] = Term::agent(th.binding.at(prm->name())->name());
  std::size_t pc = 0;
  int fresh_seq = 0;
  for (const auto& ev : partial.events) {
    if (ev.thread != thread_id || ev.synthetic) continue;
    const Action& act = th.role->body[pc];
    switch (act.kind) {
      case ActionKind::New:
        binding[act.out_var->name()] = ev.term;
        ++fresh_seq;
        break;
      case ActionKind::Receive: {
        auto m = match_term(apply(binding, act.wire(), cfg, false), ev.term, binding, cfg);
        if (m) binding = *m;
        break;
      }
      case ActionKind::Enc:
      case ActionKind::Dec:
      case ActionKind::Sign:
        binding[act.out_var->name()] = ev.kind == ActionKind::Dec ? ev.out : ev.term;
        break;
      default:
        break;
    }
    pc = ev.post_pc;
  }
  std::vector<GroundStep> out;
  if (pc >= th.role->body.size()) return out;
  const Action& act = th.role->body[pc];
  Knowledge know = partial.intruder_knowledge();

  auto emit = [&](Event ev, Subst b) {
    ev.index = static_cast<int>(partial.events.size());
    ev.thread = thread_id;
    ev.post_pc = pc + 1;
    out.push_back(GroundStep{{std::move(ev)}, std::move(b)});
  };

  switch (act.kind) {
    case ActionKind::New: {
      std::string name = act.out_var->name() + "#" + std::to_string(thread_id) + "." +
                         std::to_string(fresh_seq);
      TermPtr n = Term::nonce(name, thread_id, act.out_var->tag_sort());
      Subst b = binding;
      b[act.out_var->name()] = n;
      emit(Event{0, 0, ActionKind::New, n, nullptr, nullptr, 0, false, false}, b);
      break;
    }
    case ActionKind::Send: {
      TermPtr wire = apply(binding, act.wire(), cfg, true);
      emit(Event{0, 0, ActionKind::Send, wire, nullptr, nullptr, 0, false, false}, binding);
      break;
    }
    case ActionKind::Receive: {
      std::vector<Cand> cands;
      bool exhausted = false;
      ground_pattern(act.wire(), binding, know, partial.bounds.max_intruder_depth,
                     &exhausted, cands);
      for (const Cand& c : cands)
        emit(Event{0, 0, ActionKind::Receive, c.wire, nullptr, nullptr, 0, false, false},
             c.sigma);
      break;
    }
    case ActionKind::Enc: {
      TermPtr payload = apply(binding, act.payload, cfg, true);
      TermPtr key = apply(binding, act.key, cfg, true);
      TermPtr ct = Term::enc(payload, key);
      Subst b = binding;
      b[act.out_var->name()] = ct;
      emit(Event{0, 0, ActionKind::Enc, ct, key, payload, 0, false, false}, b);
      break;
    }
    case ActionKind::Dec: {
      TermPtr ct = apply(binding, act.payload, cfg, true);
      TermPtr key = apply(binding, act.key, cfg, true);
      if (ct->kind() != TermKind::Enc) break;
      TermPtr needed = decryption_key(ct->right(), cfg);
      if (!needed || !equal_mod_theory(needed, key, cfg)) break;
      Subst b = binding;
      b[act.out_var->name()] = ct->left();
      emit(Event{0, 0, ActionKind::Dec, ct, key, ct->left(), 0, false, false}, b);
      break;
    }
    case ActionKind::Sign: {
      TermPtr payload = apply(binding, act.payload, cfg, true);
      TermPtr signer = apply(binding, act.key, cfg, true);
      TermPtr s = Term::sig(payload, signer);
      Subst b = binding;
      b[act.out_var->name()] = s;
      emit(Event{0, 0, ActionKind::Sign, s, signer, payload, 0, false, false}, b);
      break;
    }
    case ActionKind::Verify: {
      TermPtr s = apply(binding, act.sig_term, cfg, true);
      TermPtr payload = apply(binding, act.payload, cfg, true);
      TermPtr signer = apply(binding, act.key, cfg, true);
      if (s->kind() == TermKind::Sig && equal_mod_theory(s->left(), payload, cfg) &&
          equal_mod_theory(s->right(), signer, cfg))
        emit(Event{0, 0, ActionKind::Verify, s, signer, payload, 0, false, false}, binding);
      break;
    }
  }
  return out;
}

}  // namespace pcl
