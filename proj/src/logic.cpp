// Formula construction and semantic evaluation over runs.
//
// Quantifier evaluation is instantiation-guided where it can be: for a
// universal whose body is premise => rhs (or an existential conjunction),
// candidate bindings for a term variable are read off the events that could
// make a premise atom true, because every other value falsifies the premise
// and the instance holds vacuously. Anything without a usable guide falls
// back to the full run-subterm domain. A plain reference evaluator in the
// test suite checks the two agree.

#include "pcl/logic.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

#include "pcl/engine.hpp"

namespace pcl {

const char* atom_kind_name(AtomKind k) {
  switch (k) {
    case AtomKind::Send: return "Send";
    case AtomKind::Receive: return "Receive";
    case AtomKind::Gen: return "Gen";
    case AtomKind::Encrypt: return "Encrypt";
    case AtomKind::Decrypt: return "Decrypt";
    case AtomKind::Verify: return "Verify";
    case AtomKind::Has: return "Has";
    case AtomKind::Fresh: return "Fresh";
    case AtomKind::Honest: return "Honest";
    case AtomKind::Contains: return "Contains";
    case AtomKind::ComputesDh: return "ComputesDh";
    case AtomKind::ComputesHash: return "ComputesHash";
    case AtomKind::Eq: return "Eq";
  }
  return "?";
}

// ── factories ─────────────────────────────────────────────────────────────

namespace {
FormulaPtr mk(Formula f) { return std::make_shared<const Formula>(std::move(f)); }
}  // namespace

FormulaPtr Formula::truth() { return mk({FormulaKind::True, {}, {}, {}, "", nullptr, {}}); }
FormulaPtr Formula::falsity() { return mk({FormulaKind::False, {}, {}, {}, "", nullptr, {}}); }

FormulaPtr Formula::make_atom(Atom a) {
  Formula f;
  f.kind = FormulaKind::AtomF;
  f.atom = std::move(a);
  return mk(std::move(f));
}

FormulaPtr Formula::negate(FormulaPtr f) {
  Formula r;
  r.kind = FormulaKind::Not;
  r.kids = {std::move(f)};
  return mk(std::move(r));
}

FormulaPtr Formula::conj(std::vector<FormulaPtr> fs) {
  Formula r;
  r.kind = FormulaKind::And;
  r.kids = std::move(fs);
  return mk(std::move(r));
}

FormulaPtr Formula::disj(std::vector<FormulaPtr> fs) {
  Formula r;
  r.kind = FormulaKind::Or;
  r.kids = std::move(fs);
  return mk(std::move(r));
}

FormulaPtr Formula::implies(FormulaPtr lhs, FormulaPtr rhs) {
  Formula r;
  r.kind = FormulaKind::Implies;
  r.kids = {std::move(lhs), std::move(rhs)};
  return mk(std::move(r));
}

FormulaPtr Formula::quant(FormulaKind q, std::string var, FormulaPtr body,
                          TermPtr restrict_agent, Sort term_sort) {
  Formula r;
  r.kind = q;
  r.var = std::move(var);
  r.kids = {std::move(body)};
  r.restrict_agent = std::move(restrict_agent);
  r.term_sort = term_sort;
  return mk(std::move(r));
}

FormulaPtr Formula::order(Atom before, Atom after) {
  Formula r;
  r.kind = FormulaKind::Order;
  r.atom = std::move(before);
  r.atom2 = std::move(after);
  return mk(std::move(r));
}

FormulaPtr Formula::modal(FormulaPtr pre, std::vector<Action> program,
                          std::string thread_var, FormulaPtr post) {
  Formula r;
  r.kind = FormulaKind::Modal;
  r.kids = {std::move(pre), std::move(post)};
  r.program = std::move(program);
  r.var = std::move(thread_var);
  return mk(std::move(r));
}

// ── printing ──────────────────────────────────────────────────────────────

namespace {

std::string atom_to_string(const Atom& a) {
  std::ostringstream os;
  if (a.kind == AtomKind::Eq) {
    os << to_string(a.t1) << " = " << to_string(a.t2);
    return os.str();
  }
  os << atom_kind_name(a.kind) << '(';
  if (a.kind == AtomKind::Honest) {
    os << to_string(a.t1);
  } else if (a.kind == AtomKind::Contains) {
    os << to_string(a.t1) << ", " << to_string(a.t2);
  } else {
    os << a.thread << ", " << to_string(a.t1);
  }
  os << ')';
  return os.str();
}

void fmt(const FormulaPtr& f, std::ostringstream& os) {
  switch (f->kind) {
    case FormulaKind::True: os << "true"; return;
    case FormulaKind::False: os << "false"; return;
    case FormulaKind::AtomF: os << atom_to_string(f->atom); return;
    case FormulaKind::Not:
      os << "~(";
      fmt(f->kids[0], os);
      os << ')';
      return;
    case FormulaKind::And:
    case FormulaKind::Or: {
      os << '(';
      for (std::size_t i = 0; i < f->kids.size(); ++i) {
        if (i) os << (f->kind == FormulaKind::And ? " & " : " | ");
        fmt(f->kids[i], os);
      }
      os << ')';
      return;
    }
    case FormulaKind::Implies:
      os << '(';
      fmt(f->kids[0], os);
      os << " => ";
      fmt(f->kids[1], os);
      os << ')';
      return;
    case FormulaKind::ForallThread:
    case FormulaKind::ExistsThread: {
      os << (f->kind == FormulaKind::ForallThread ? "forall " : "exists ") << f->var
         << ":thread";
      if (f->restrict_agent) os << '@' << to_string(f->restrict_agent);
      os << ". ";
      fmt(f->kids[0], os);
      return;
    }
    case FormulaKind::ForallTerm:
    case FormulaKind::ExistsTerm:
      os << (f->kind == FormulaKind::ForallTerm ? "forall " : "exists ") << f->var
         << ":term. ";
      fmt(f->kids[0], os);
      return;
    case FormulaKind::ForallAgent:
    case FormulaKind::ExistsAgent:
      os << (f->kind == FormulaKind::ForallAgent ? "forall " : "exists ") << f->var
         << ":agent. ";
      fmt(f->kids[0], os);
      return;
    case FormulaKind::Order:
      os << atom_to_string(f->atom) << " < " << atom_to_string(f->atom2);
      return;
    case FormulaKind::Modal: {
      fmt(f->kids[0], os);
      os << " [ ";
      std::map<std::string, Sort> declared;
      for (const auto& a : f->program) os << print_action(a, declared) << ' ';
      os << "]_" << f->var << ' ';
      fmt(f->kids[1], os);
      return;
    }
  }
}

}  // namespace

std::string to_string(const FormulaPtr& f) {
  std::ostringstream os;
  fmt(f, os);
  return os.str();
}

// ── evaluation ────────────────────────────────────────────────────────────

namespace {

int resolve_thread(const std::string& name, const EvalContext& ctx) {
  if (!name.empty() && name[0] == '#') return std::stoi(name.substr(1));
  auto it = ctx.threads.find(name);
  if (it == ctx.threads.end())
    throw std::invalid_argument("unbound thread variable: " + name);
  return it->second;
}

bool event_visible(const Event& ev, int horizon) {
  return !ev.synthetic && (horizon < 0 || ev.index < horizon);
}

struct Evaluator {
  const Run& run;
  const SemanticsConfig& cfg;
  std::vector<TermPtr> term_domain_;
  std::map<std::pair<int, int>, Knowledge> know_cache_;
  bool capture = false;
  bool witness_set = false;
  EvalWitness witness;
  std::vector<std::pair<std::string, std::string>> stack;

  const Knowledge& thread_know(int tid, int horizon) {
    auto key = std::make_pair(tid, horizon);
    auto it = know_cache_.find(key);
    if (it == know_cache_.end())
      it = know_cache_.emplace(key, run.thread_knowledge(tid, horizon)).first;
    return it->second;
  }

  bool atom(const Atom& a, const EvalContext& ctx) {
    try {
      return atom_impl(a, ctx);
    } catch (const TermFormError&) {
      return false;
    }
  }

  bool atom_impl(const Atom& a, const EvalContext& ctx) {
    // Knowledge-backed atoms go through the per-thread cache.
    switch (a.kind) {
      case AtomKind::Has: {
        int tid = resolve_thread(a.thread, ctx);
        TermPtr t = apply(ctx.terms, a.t1, cfg, true);
        return thread_know(tid, ctx.horizon).derive(t, run.bounds.max_intruder_depth);
      }
      case AtomKind::ComputesDh: {
        int tid = resolve_thread(a.thread, ctx);
        TermPtr t = apply(ctx.terms, a.t1, cfg, true);
        if (t->kind() != TermKind::DhH)
          throw std::invalid_argument("ComputesDh expects an h(a,b) term");
        const Knowledge& k = thread_know(tid, ctx.horizon);
        const int d = run.bounds.max_intruder_depth;
        return (k.derive(t->left(), d) && k.derive(Term::dh_g(t->right()), d)) ||
               (k.derive(t->right(), d) && k.derive(Term::dh_g(t->left()), d));
      }
      case AtomKind::ComputesHash: {
        int tid = resolve_thread(a.thread, ctx);
        TermPtr t = apply(ctx.terms, a.t1, cfg, true);
        if (t->kind() != TermKind::Hash)
          throw std::invalid_argument("ComputesHash expects a hash{m}K term");
        const Knowledge& k = thread_know(tid, ctx.horizon);
        const int d = run.bounds.max_intruder_depth;
        return k.derive(t->right(), d) && k.derive(t->left(), d);
      }
      default:
        return eval_atom(run, a, ctx, cfg);
    }
  }

  const std::vector<TermPtr>& term_domain() {
    if (!term_domain_.empty()) return term_domain_;
    std::vector<TermPtr> all;
    for (const auto& ev : run.events) {
      if (ev.term) collect_subterms(ev.term, all);
      if (ev.key) collect_subterms(ev.key, all);
      if (ev.out) collect_subterms(ev.out, all);
    }
    for (const auto& [idx, t] : run.intruder_additions) collect_subterms(t, all);
    for (const auto& adds : run.thread_additions)
      for (const auto& [idx, t] : adds) collect_subterms(t, all);
    std::sort(all.begin(), all.end(), TermLess{});
    all.erase(std::unique(all.begin(), all.end(),
                          [](const TermPtr& a, const TermPtr& b) { return equal(a, b); }),
              all.end());
    term_domain_ = std::move(all);
    return term_domain_;
  }

  bool eval(const FormulaPtr& f, EvalContext& ctx) {
    switch (f->kind) {
      case FormulaKind::True: return true;
      case FormulaKind::False: return false;
      case FormulaKind::AtomF: return atom(f->atom, ctx);
      case FormulaKind::Not: return !eval(f->kids[0], ctx);
      case FormulaKind::And:
        for (const auto& k : f->kids)
          if (!eval(k, ctx)) return false;
        return true;
      case FormulaKind::Or:
        for (const auto& k : f->kids)
          if (eval(k, ctx)) return true;
        return false;
      case FormulaKind::Implies:
        return !eval(f->kids[0], ctx) || eval(f->kids[1], ctx);
      case FormulaKind::ForallThread:
      case FormulaKind::ExistsThread:
        return eval_thread_quant(f, ctx);
      case FormulaKind::ForallTerm:
      case FormulaKind::ExistsTerm:
      case FormulaKind::ForallAgent:
      case FormulaKind::ExistsAgent:
        return eval_term_quant(f, ctx);
      case FormulaKind::Order: return eval_order(f, ctx);
      case FormulaKind::Modal: return eval_modal(f, ctx);
    }
    return false;
  }

  bool eval_thread_quant(const FormulaPtr& f, EvalContext& ctx) {
    const bool universal = f->kind == FormulaKind::ForallThread;
    for (const auto& th : run.threads) {
      if (f->restrict_agent) {
        TermPtr a = apply(ctx.terms, f->restrict_agent, cfg, true);
        if (a->kind() != TermKind::Agent || a->name() != th.agent) continue;
      }
      auto saved_thread = ctx.threads.find(f->var) != ctx.threads.end()
                              ? std::optional<int>(ctx.threads[f->var])
                              : std::nullopt;
      auto saved_hat = ctx.terms.find("^" + f->var) != ctx.terms.end()
                           ? std::optional<TermPtr>(ctx.terms["^" + f->var])
                           : std::nullopt;
      ctx.threads[f->var] = th.id;
      ctx.terms["^" + f->var] = Term::agent(th.agent);
      stack.emplace_back(f->var, "T" + std::to_string(th.id) + "(" + th.role_name + "," +
                                     th.agent + ")");
      bool v = eval(f->kids[0], ctx);
      if (universal && !v) note_witness();
      stack.pop_back();
      if (saved_thread)
        ctx.threads[f->var] = *saved_thread;
      else
        ctx.threads.erase(f->var);
      if (saved_hat)
        ctx.terms["^" + f->var] = *saved_hat;
      else
        ctx.terms.erase("^" + f->var);
      if (universal && !v) return false;
      if (!universal && v) return true;
    }
    return universal;
  }

  bool eval_term_quant(const FormulaPtr& f, EvalContext& ctx) {
    const bool universal =
        f->kind == FormulaKind::ForallTerm || f->kind == FormulaKind::ForallAgent;
    const bool agent_sorted =
        f->kind == FormulaKind::ForallAgent || f->kind == FormulaKind::ExistsAgent;

    std::vector<TermPtr> domain;
    if (agent_sorted) {
      for (const auto& a : run.protocol->setup.agents) domain.push_back(Term::agent(a));
    } else if (auto guided = guided_candidates(f, ctx)) {
      domain = std::move(*guided);
    } else {
      domain = term_domain();
    }
    if (!agent_sorted && f->term_sort != Sort::Message) {
      std::vector<TermPtr> filtered;
      for (const TermPtr& t : domain)
        if (sort_leq(t->sort(), f->term_sort)) filtered.push_back(t);
      domain = std::move(filtered);
    }

    for (const TermPtr& cand : domain) {
      auto saved = ctx.terms.find(f->var) != ctx.terms.end()
                       ? std::optional<TermPtr>(ctx.terms[f->var])
                       : std::nullopt;
      ctx.terms[f->var] = cand;
      stack.emplace_back(f->var, to_string(cand));
      bool v = eval(f->kids[0], ctx);
      if (universal && !v) note_witness();
      stack.pop_back();
      if (saved)
        ctx.terms[f->var] = *saved;
      else
        ctx.terms.erase(f->var);
      if (universal && !v) return false;
      if (!universal && v) return true;
    }
    return universal;
  }

  // Candidate bindings for f->var read off a premise/conjunct atom. Only
  // values that can make that atom true matter; every other value leaves a
  // universal instance vacuously true (or an existential conjunct false).
  std::optional<std::vector<TermPtr>> guided_candidates(const FormulaPtr& f,
                                                        EvalContext& ctx) {
    const FormulaPtr& body = f->kids[0];
    std::vector<const Atom*> guides;
    auto flatten = [&](const FormulaPtr& g, auto&& self) -> void {
      if (g->kind == FormulaKind::AtomF) {
        guides.push_back(&g->atom);
      } else if (g->kind == FormulaKind::And) {
        for (const auto& k : g->kids) self(k, self);
      } else if (g->kind == FormulaKind::Order) {
        guides.push_back(&g->atom);
        guides.push_back(&g->atom2);
      }
    };
    if (f->kind == FormulaKind::ForallTerm) {
      // Peel nested universals to reach the implication shape.
      const Formula* cur = body.get();
      while (cur->kind == FormulaKind::ForallTerm || cur->kind == FormulaKind::ForallAgent ||
             cur->kind == FormulaKind::ForallThread)
        cur = cur->kids[0].get();
      if (cur->kind != FormulaKind::Implies) return std::nullopt;
      flatten(cur->kids[0], flatten);
    } else if (f->kind == FormulaKind::ExistsTerm) {
      const Formula* cur = body.get();
      while (cur->kind == FormulaKind::ExistsTerm || cur->kind == FormulaKind::ExistsAgent ||
             cur->kind == FormulaKind::ExistsThread)
        cur = cur->kids[0].get();
      if (cur->kind == FormulaKind::AtomF)
        guides.push_back(&cur->atom);
      else if (cur->kind == FormulaKind::And)
        flatten_direct(cur, guides);
      else
        return std::nullopt;
    } else {
      return std::nullopt;
    }

    auto has_var = [&](const TermPtr& t) {
      if (!t) return false;
      std::vector<TermPtr> all;
      collect_subterms(t, all);
      for (const auto& s : all)
        if (s->kind() == TermKind::Var && s->name() == f->var && !ctx.terms.count(f->var))
          return true;
      return false;
    };

    for (const Atom* a : guides) {
      std::vector<TermPtr> cands;
      try {
      switch (a->kind) {
        case AtomKind::Send:
        case AtomKind::Receive:
        case AtomKind::Gen:
        case AtomKind::Encrypt:
        case AtomKind::Decrypt:
        case AtomKind::Verify: {
          if (!has_var(a->t1)) continue;
          TermPtr pattern = apply(ctx.terms, a->t1, cfg, false);
          std::optional<int> tid;
          if (!a->thread.empty() && (ctx.threads.count(a->thread) || a->thread[0] == '#'))
            tid = resolve_thread(a->thread, ctx);
          for (const auto& ev : run.events) {
            if (!event_visible(ev, ctx.horizon)) continue;
            if (kind_of(a->kind) != ev.kind) continue;
            if (tid && ev.thread != *tid) continue;
            for (const Subst& m : match_term_all(pattern, ev.term, {}, cfg)) {
              auto it = m.find(f->var);
              if (it != m.end()) cands.push_back(it->second);
            }
          }
          break;
        }
        case AtomKind::Contains: {
          if (!has_var(a->t2)) continue;
          TermPtr outer = apply(ctx.terms, a->t1, cfg, false);
          if (!outer->ground()) continue;
          TermPtr pattern = apply(ctx.terms, a->t2, cfg, false);
          for (const TermPtr& sub : subterms(normalize_dh(outer, cfg)))
            for (const Subst& m : match_term_all(pattern, sub, {}, cfg)) {
              auto it = m.find(f->var);
              if (it != m.end()) cands.push_back(it->second);
            }
          break;
        }
        default:
          continue;
      }
      } catch (const TermFormError&) {
        continue;  // ill-formed guide pattern; try the next one
      }
      if (!cands.empty() || guide_definitely_empty(*a, ctx)) {
        std::sort(cands.begin(), cands.end(), TermLess{});
        cands.erase(std::unique(cands.begin(), cands.end(),
                                [](const TermPtr& x, const TermPtr& y) {
                                  return equal(x, y);
                                }),
                    cands.end());
        return cands;
      }
    }
    return std::nullopt;
  }

  // When the guide atom matched nothing, an empty candidate set is only
  // valid if the atom really can never hold for any value of the variable.
  bool guide_definitely_empty(const Atom& a, EvalContext& ctx) {
    switch (a.kind) {
      case AtomKind::Send:
      case AtomKind::Receive:
      case AtomKind::Gen:
      case AtomKind::Encrypt:
      case AtomKind::Decrypt:
      case AtomKind::Verify:
      case AtomKind::Contains:
        return true;  // match enumeration over events/subterms was exhaustive
      default:
        return false;
    }
  }

  static ActionKind kind_of(AtomKind k) {
    switch (k) {
      case AtomKind::Send: return ActionKind::Send;
      case AtomKind::Receive: return ActionKind::Receive;
      case AtomKind::Gen: return ActionKind::New;
      case AtomKind::Encrypt: return ActionKind::Enc;
      case AtomKind::Decrypt: return ActionKind::Dec;
      case AtomKind::Verify: return ActionKind::Verify;
      default: throw std::logic_error("not an action atom");
    }
  }

  bool eval_order(const FormulaPtr& f, EvalContext& ctx) {
    auto idx1 = atom_event_indices(f->atom, ctx);
    if (idx1.empty()) return false;
    auto idx2 = atom_event_indices(f->atom2, ctx);
    if (idx2.empty()) return false;
    return *std::min_element(idx1.begin(), idx1.end()) <
           *std::max_element(idx2.begin(), idx2.end());
  }

  std::vector<int> atom_event_indices(const Atom& a, EvalContext& ctx) {
    ActionKind want = kind_of(a.kind);
    int tid = resolve_thread(a.thread, ctx);
    std::vector<int> out;
    TermPtr t;
    try {
      t = apply(ctx.terms, a.t1, cfg, true);
    } catch (const TermFormError&) {
      return out;
    }
    for (const auto& ev : run.events) {
      if (!event_visible(ev, ctx.horizon)) continue;
      if (ev.thread != tid || ev.kind != want) continue;
      if (equal_mod_theory(ev.term, t, cfg)) out.push_back(ev.index);
    }
    return out;
  }

  bool eval_modal(const FormulaPtr& f, EvalContext& ctx) {
    const auto& program = f->program;
    if (program.empty()) return true;
    for (const auto& th : run.threads) {
      std::vector<const Event*> evs;
      for (const auto& ev : run.events)
        if (ev.thread == th.id && event_visible(ev, -1)) evs.push_back(&ev);
      if (evs.size() < program.size()) continue;
      for (std::size_t start = 0; start + program.size() <= evs.size(); ++start) {
        std::vector<Subst> mus = match_program(program, evs, start, Subst{});
        for (const Subst& mu : mus) {
          EvalContext inner = ctx;
          inner.threads[f->var] = th.id;
          inner.terms["^" + f->var] = Term::agent(th.agent);
          for (const auto& [k, v] : mu) inner.terms[k] = v;
          inner.horizon = evs[start]->index;
          if (!eval(f->kids[0], inner)) continue;  // precondition not met
          inner.horizon = evs[start + program.size() - 1]->index + 1;
          if (!eval(f->kids[1], inner)) {
            if (capture && !witness_set) {
              stack.emplace_back(f->var, "T" + std::to_string(th.id));
              note_witness();
              stack.pop_back();
            }
            return false;
          }
        }
      }
    }
    return true;
  }

  std::vector<Subst> match_program(const std::vector<Action>& program,
                                   const std::vector<const Event*>& evs, std::size_t start,
                                   const Subst& mu0) {
    std::vector<Subst> cur{mu0};
    for (std::size_t i = 0; i < program.size(); ++i) {
      const Action& act = program[i];
      const Event& ev = *evs[start + i];
      std::vector<Subst> next;
      for (const Subst& mu : cur) {
        if (ev.kind != act.kind) continue;
        switch (act.kind) {
          case ActionKind::New: {
            Subst m = mu;
            m[act.out_var->name()] = ev.term;
            next.push_back(std::move(m));
            break;
          }
          case ActionKind::Send:
          case ActionKind::Receive: {
            TermPtr pat = apply(mu, act.wire(), cfg, false);
            for (Subst& m : match_term_all(pat, ev.term, mu, cfg))
              next.push_back(std::move(m));
            break;
          }
          case ActionKind::Enc:
          case ActionKind::Sign: {
            TermPtr pat = apply(mu, act.payload, cfg, false);
            for (Subst& m : match_term_all(pat, ev.out, mu, cfg)) {
              for (Subst& m2 :
                   match_term_all(apply(m, act.key, cfg, false), ev.key, m, cfg)) {
                m2[act.out_var->name()] = ev.term;
                next.push_back(std::move(m2));
              }
            }
            break;
          }
          case ActionKind::Dec: {
            TermPtr pat = apply(mu, act.payload, cfg, false);
            for (Subst& m : match_term_all(pat, ev.term, mu, cfg)) {
              for (Subst& m2 :
                   match_term_all(apply(m, act.key, cfg, false), ev.key, m, cfg)) {
                m2[act.out_var->name()] = ev.out;
                next.push_back(std::move(m2));
              }
            }
            break;
          }
          case ActionKind::Verify: {
            TermPtr pat = apply(mu, act.sig_term, cfg, false);
            for (Subst& m : match_term_all(pat, ev.term, mu, cfg))
              for (Subst& m2 :
                   match_term_all(apply(m, act.payload, cfg, false), ev.out, m, cfg))
                for (Subst& m3 :
                     match_term_all(apply(m2, act.key, cfg, false), ev.key, m2, cfg))
                  next.push_back(std::move(m3));
            break;
          }
        }
      }
      cur = std::move(next);
      if (cur.empty()) break;
    }
    return cur;
  }

  void note_witness() {
    if (!capture || witness_set) return;
    witness_set = true;
    witness.value = false;
    witness.bindings = stack;
  }

  // Appended by flatten when an existential body is a conjunction.
  static void flatten_direct(const Formula* g, std::vector<const Atom*>& out) {
    for (const auto& k : g->kids) {
      if (k->kind == FormulaKind::AtomF) out.push_back(&k->atom);
      if (k->kind == FormulaKind::And) flatten_direct(k.get(), out);
    }
  }
};

}  // namespace

bool eval_atom_impl(const Run& run, const Atom& a, const EvalContext& ctx,
                    const SemanticsConfig& cfg);

bool eval_atom(const Run& run, const Atom& a, const EvalContext& ctx,
               const SemanticsConfig& cfg) {
  try {
    return eval_atom_impl(run, a, ctx, cfg);
  } catch (const TermFormError&) {
    return false;  // ill-formed instantiation satisfies nothing
  }
}

bool eval_atom_impl(const Run& run, const Atom& a, const EvalContext& ctx,
                    const SemanticsConfig& cfg) {
  auto grounded = [&](const TermPtr& t) { return apply(ctx.terms, t, cfg, true); };
  switch (a.kind) {
    case AtomKind::Send:
    case AtomKind::Receive:
    case AtomKind::Gen:
    case AtomKind::Encrypt:
    case AtomKind::Decrypt:
    case AtomKind::Verify: {
      ActionKind want;
      switch (a.kind) {
        case AtomKind::Send: want = ActionKind::Send; break;
        case AtomKind::Receive: want = ActionKind::Receive; break;
        case AtomKind::Gen: want = ActionKind::New; break;
        case AtomKind::Encrypt: want = ActionKind::Enc; break;
        case AtomKind::Decrypt: want = ActionKind::Dec; break;
        default: want = ActionKind::Verify; break;
      }
      int tid = resolve_thread(a.thread, ctx);
      TermPtr t = grounded(a.t1);
      for (const auto& ev : run.events) {
        if (!event_visible(ev, ctx.horizon)) continue;
        if (ev.thread != tid || ev.kind != want) continue;
        if (equal_mod_theory(ev.term, t, cfg)) return true;
      }
      return false;
    }
    case AtomKind::Has: {
      int tid = resolve_thread(a.thread, ctx);
      TermPtr t = grounded(a.t1);
      Knowledge k = run.thread_knowledge(tid, ctx.horizon);
      return k.derive(t, run.bounds.max_intruder_depth);
    }
    case AtomKind::Fresh: {
      int tid = resolve_thread(a.thread, ctx);
      TermPtr t = grounded(a.t1);
      // Generated here (g() preserves the property), and never sent inside
      // a different term.
      std::function<bool(const TermPtr&)> generated = [&](const TermPtr& x) -> bool {
        for (const auto& ev : run.events)
          if (event_visible(ev, ctx.horizon) && ev.thread == tid &&
              ev.kind == ActionKind::New && equal(ev.term, x))
            return true;
        if (x->kind() == TermKind::DhG) return generated(x->left());
        return false;
      };
      if (!generated(t)) return false;
      for (const auto& ev : run.events) {
        if (!event_visible(ev, ctx.horizon)) continue;
        if (ev.thread != tid || ev.kind != ActionKind::Send) continue;
        if (!equal_mod_theory(ev.term, t, cfg) && contains(ev.term, t, cfg)) return false;
      }
      return true;
    }
    case AtomKind::Honest: {
      TermPtr agent = grounded(a.t1);
      if (agent->kind() != TermKind::Agent)
        throw std::invalid_argument("Honest expects an agent");
      if (!run.protocol->setup.is_honest(agent->name())) return false;
      // All of the agent's threads must sit on basic-sequence boundaries.
      for (const auto& th : run.threads) {
        if (th.agent != agent->name()) continue;
        std::size_t pc = 0;
        for (const auto& ev : run.events)
          if (ev.thread == th.id && event_visible(ev, ctx.horizon)) pc = ev.post_pc;
        if (pc == th.role->body.size() || pc == 0) continue;
        bool boundary = false;
        for (const auto& bs : basic_sequences(*th.role)) boundary = boundary || bs.begin == pc;
        if (!boundary) return false;
      }
      return true;
    }
    case AtomKind::Contains:
      return contains(grounded(a.t1), grounded(a.t2), cfg);
    case AtomKind::ComputesDh: {
      int tid = resolve_thread(a.thread, ctx);
      return eval_computes_dh(run, tid, grounded(a.t1), cfg, ctx.horizon);
    }
    case AtomKind::ComputesHash: {
      int tid = resolve_thread(a.thread, ctx);
      return eval_computes_hash(run, tid, grounded(a.t1), cfg, ctx.horizon);
    }
    case AtomKind::Eq:
      return equal_mod_theory(grounded(a.t1), grounded(a.t2), cfg);
  }
  return false;
}

bool eval_computes_dh(const Run& run, int thread, const TermPtr& dh_term,
                      const SemanticsConfig& cfg, int horizon) {
  if (dh_term->kind() != TermKind::DhH)
    throw std::invalid_argument("ComputesDh expects an h(a,b) term");
  Knowledge k = run.thread_knowledge(thread, horizon);
  const int d = run.bounds.max_intruder_depth;
  const TermPtr& a = dh_term->left();
  const TermPtr& b = dh_term->right();
  return (k.derive(a, d) && k.derive(Term::dh_g(b), d)) ||
         (k.derive(b, d) && k.derive(Term::dh_g(a), d));
}

bool eval_computes_hash(const Run& run, int thread, const TermPtr& hash_term,
                        const SemanticsConfig& cfg, int horizon) {
  if (hash_term->kind() != TermKind::Hash)
    throw std::invalid_argument("ComputesHash expects a hash{m}K term");
  Knowledge k = run.thread_knowledge(thread, horizon);
  const int d = run.bounds.max_intruder_depth;
  return k.derive(hash_term->right(), d) && k.derive(hash_term->left(), d);
}

bool eval_formula(const Run& run, const FormulaPtr& f, const SemanticsConfig& cfg) {
  Evaluator ev{run, cfg};
  EvalContext ctx;
  return ev.eval(f, ctx);
}

EvalWitness eval_formula_witness(const Run& run, const FormulaPtr& f,
                                 const SemanticsConfig& cfg) {
  Evaluator ev{run, cfg};
  ev.capture = true;
  EvalContext ctx;
  bool v = ev.eval(f, ctx);
  ev.witness.value = v;
  if (v) ev.witness.bindings.clear();
  return ev.witness;
}

EvalWitness eval_forall_body_for_thread(const Run& run, const FormulaPtr& forall,
                                        int thread_id, const SemanticsConfig& cfg) {
  if (forall->kind != FormulaKind::ForallThread)
    throw std::invalid_argument("expected a top-level forall-thread formula");
  Evaluator ev{run, cfg};
  ev.capture = true;
  EvalContext ctx;
  const ThreadInfo& th = run.threads[static_cast<std::size_t>(thread_id)];
  ctx.threads[forall->var] = thread_id;
  ctx.terms["^" + forall->var] = Term::agent(th.agent);
  ev.stack.emplace_back(forall->var, "T" + std::to_string(thread_id) + "(" +
                                         th.role_name + "," + th.agent + ")");
  bool v = ev.eval(forall->kids[0], ctx);
  if (!v) ev.note_witness();
  ev.witness.value = v;
  if (v) ev.witness.bindings.clear();
  return ev.witness;
}

std::vector<FormulaPtr> axiom_instances(const Run& run, const FormulaPtr& schema,
                                        const std::vector<SchemaVar>& vars,
                                        const SemanticsConfig& cfg) {
  Evaluator ev{run, cfg};
  std::vector<FormulaPtr> out;
  Subst terms;
  std::map<std::string, int> threads;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == vars.size()) {
      out.push_back(substitute(schema, terms, threads, cfg));
      return;
    }
    const SchemaVar& v = vars[i];
    switch (v.kind) {
      case SchemaVar::Kind::Thread:
        for (const auto& th : run.threads) {
          threads[v.name] = th.id;
          terms["^" + v.name] = Term::agent(th.agent);
          rec(i + 1);
          threads.erase(v.name);
          terms.erase("^" + v.name);
        }
        break;
      case SchemaVar::Kind::Agent:
        for (const auto& a : run.protocol->setup.agents) {
          terms[v.name] = Term::agent(a);
          rec(i + 1);
          terms.erase(v.name);
        }
        break;
      case SchemaVar::Kind::Term:
        for (const TermPtr& t : ev.term_domain()) {
          terms[v.name] = t;
          rec(i + 1);
          terms.erase(v.name);
        }
        break;
    }
  };
  rec(0);
  return out;
}

FormulaPtr substitute(const FormulaPtr& f, const Subst& terms,
                      const std::map<std::string, int>& threads,
                      const SemanticsConfig& cfg) {
  auto sub_atom = [&](const Atom& a) {
    Atom r = a;
    if (r.t1) r.t1 = apply(terms, r.t1, cfg, false);
    if (r.t2) r.t2 = apply(terms, r.t2, cfg, false);
    if (!r.thread.empty()) {
      auto it = threads.find(r.thread);
      if (it != threads.end()) r.thread = "#" + std::to_string(it->second);
    }
    return r;
  };
  Formula r = *f;
  switch (f->kind) {
    case FormulaKind::AtomF:
      r.atom = sub_atom(f->atom);
      break;
    case FormulaKind::Order:
      r.atom = sub_atom(f->atom);
      r.atom2 = sub_atom(f->atom2);
      break;
    default: {
      // Quantifiers shadow their own variable.
      Subst t2 = terms;
      std::map<std::string, int> th2 = threads;
      if (!f->var.empty()) {
        t2.erase(f->var);
        t2.erase("^" + f->var);
        th2.erase(f->var);
      }
      r.kids.clear();
      for (const auto& k : f->kids) r.kids.push_back(substitute(k, t2, th2, cfg));
      if (r.restrict_agent) r.restrict_agent = apply(terms, r.restrict_agent, cfg, false);
      break;
    }
  }
  return std::make_shared<const Formula>(std::move(r));
}

}  // namespace pcl
