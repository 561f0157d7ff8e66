#include "pcl/logic.hpp"

#include <cstdlib>
#include <random>

#include "doctest.h"
#include "pcl/axioms.hpp"
#include "pcl/engine.hpp"
#include "pcl/parser.hpp"

using namespace pcl;

namespace {

std::string fixtures_dir() {
  const char* env = std::getenv("PCLWB_FIXTURES");
  REQUIRE(env != nullptr);
  return env;
}

Protocol load(const std::string& name) {
  return parse_protocol_file(fixtures_dir() + "/" + name);
}

// Plain reference evaluator: full-domain quantifiers, no guided
// instantiation, no knowledge caching. Modal formulas are out of its scope.
struct NaiveEval {
  const Run& run;
  const SemanticsConfig& cfg;
  std::vector<TermPtr> domain;

  explicit NaiveEval(const Run& r, const SemanticsConfig& c) : run(r), cfg(c) {
    std::vector<TermPtr> all;
    for (const auto& ev : run.events) {
      if (ev.term) collect_subterms(ev.term, all);
      if (ev.key) collect_subterms(ev.key, all);
      if (ev.out) collect_subterms(ev.out, all);
    }
    for (const auto& [i, t] : run.intruder_additions) collect_subterms(t, all);
    for (const auto& adds : run.thread_additions)
      for (const auto& [i, t] : adds) collect_subterms(t, all);
    std::sort(all.begin(), all.end(), TermLess{});
    all.erase(std::unique(all.begin(), all.end(),
                          [](const TermPtr& a, const TermPtr& b) { return equal(a, b); }),
              all.end());
    domain = std::move(all);
  }

  std::vector<int> atom_events(const Atom& a, const EvalContext& ctx) const {
    ActionKind want;
    switch (a.kind) {
      case AtomKind::Send: want = ActionKind::Send; break;
      case AtomKind::Receive: want = ActionKind::Receive; break;
      case AtomKind::Gen: want = ActionKind::New; break;
      case AtomKind::Encrypt: want = ActionKind::Enc; break;
      case AtomKind::Decrypt: want = ActionKind::Dec; break;
      case AtomKind::Verify: want = ActionKind::Verify; break;
      default: throw std::logic_error("ordering needs action atoms");
    }
    int tid = ctx.threads.at(a.thread);
    std::vector<int> out;
    TermPtr t;
    try {
      t = apply(ctx.terms, a.t1, cfg, true);
    } catch (const TermFormError&) {
      return out;
    }
    for (const auto& ev : run.events) {
      if (ev.synthetic || (ctx.horizon >= 0 && ev.index >= ctx.horizon)) continue;
      if (ev.thread == tid && ev.kind == want && equal_mod_theory(ev.term, t, cfg))
        out.push_back(ev.index);
    }
    return out;
  }

  bool eval(const FormulaPtr& f, EvalContext ctx) const {
    switch (f->kind) {
      case FormulaKind::True: return true;
      case FormulaKind::False: return false;
      case FormulaKind::AtomF: return eval_atom(run, f->atom, ctx, cfg);
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
      case FormulaKind::Order: {
        auto i1 = atom_events(f->atom, ctx);
        auto i2 = atom_events(f->atom2, ctx);
        for (int a : i1)
          for (int b : i2)
            if (a < b) return true;
        return false;
      }
      case FormulaKind::ForallThread:
      case FormulaKind::ExistsThread: {
        bool universal = f->kind == FormulaKind::ForallThread;
        for (const auto& th : run.threads) {
          if (f->restrict_agent) {
            TermPtr a = apply(ctx.terms, f->restrict_agent, cfg, true);
            if (a->name() != th.agent) continue;
          }
          EvalContext c2 = ctx;
          c2.threads[f->var] = th.id;
          c2.terms["^" + f->var] = Term::agent(th.agent);
          bool v = eval(f->kids[0], c2);
          if (universal && !v) return false;
          if (!universal && v) return true;
        }
        return universal;
      }
      case FormulaKind::ForallTerm:
      case FormulaKind::ExistsTerm: {
        bool universal = f->kind == FormulaKind::ForallTerm;
        for (const auto& t : domain) {
          if (f->term_sort != Sort::Message && !sort_leq(t->sort(), f->term_sort))
            continue;
          EvalContext c2 = ctx;
          c2.terms[f->var] = t;
          bool v = eval(f->kids[0], c2);
          if (universal && !v) return false;
          if (!universal && v) return true;
        }
        return universal;
      }
      case FormulaKind::ForallAgent:
      case FormulaKind::ExistsAgent: {
        bool universal = f->kind == FormulaKind::ForallAgent;
        for (const auto& a : run.protocol->setup.agents) {
          EvalContext c2 = ctx;
          c2.terms[f->var] = Term::agent(a);
          bool v = eval(f->kids[0], c2);
          if (universal && !v) return false;
          if (!universal && v) return true;
        }
        return universal;
      }
      case FormulaKind::Modal:
        throw std::logic_error("reference evaluator does not cover modal formulas");
    }
    return false;
  }
};

// A run whose single thread holds exactly the listed terms.
struct Bench {
  Protocol p;
  Run run;

  explicit Bench(std::vector<TermPtr> knowledge) {
    p = parse_protocol(R"(
protocol Bench
setup { honest A B; }
role R(X, Y) { new z:nonce; send X,Y,z; }
)");
    run.protocol = &p;
    run.config.dh_theory = true;
    run.bounds = Bounds{1, 8, 4};
    ThreadInfo th;
    th.id = 0;
    th.role = &p.roles[0];
    th.role_name = "R";
    th.agent = "A";
    th.honest = true;
    run.threads.push_back(th);
    run.thread_additions.emplace_back();
    for (const auto& t : knowledge) run.thread_additions[0].emplace_back(-1, t);
  }
};

}  // namespace

TEST_CASE("computes (DH): both routes, and Has without Computes") {
  TermPtr a = Term::nonce("a");
  TermPtr b = Term::nonce("b");
  TermPtr h = Term::dh_h(a, b);
  SemanticsConfig cfg;
  cfg.dh_theory = true;

  Bench left({a, Term::dh_g(b)});
  CHECK(eval_computes_dh(left.run, 0, h, cfg));

  Bench right({b, Term::dh_g(a)});
  CHECK(eval_computes_dh(right.run, 0, h, cfg));

  Bench only_h({h});
  CHECK_FALSE(eval_computes_dh(only_h.run, 0, h, cfg));
  EvalContext ctx;
  ctx.threads["X"] = 0;
  Atom has{AtomKind::Has, "X", h, nullptr};
  CHECK(eval_atom(only_h.run, has, ctx, cfg));
  // The theory lifts Has to the swapped orientation too.
  Atom has_swapped{AtomKind::Has, "X", Term::dh_h(b, a), nullptr};
  CHECK(eval_atom(only_h.run, has_swapped, ctx, cfg));

  CHECK_THROWS_AS(eval_computes_dh(only_h.run, 0, a, cfg), std::invalid_argument);
}

TEST_CASE("computes (HASH): key and payload required") {
  TermPtr m = Term::nonce("m");
  TermPtr k = Term::sym_key("K");
  TermPtr h = Term::hash(m, k);
  SemanticsConfig cfg;

  Bench both({m, k});
  CHECK(eval_computes_hash(both.run, 0, h, cfg));
  Bench only_hash({h});
  CHECK_FALSE(eval_computes_hash(only_hash.run, 0, h, cfg));
  Bench key_only({k});
  CHECK_FALSE(eval_computes_hash(key_only.run, 0, h, cfg));
  CHECK_THROWS_AS(eval_computes_hash(both.run, 0, m, cfg), std::invalid_argument);
}

TEST_CASE("action predicates, ordering, honesty and freshness on a real run") {
  Protocol p = load("cr.pcl");
  Bounds b{1, 14, 4};
  SemanticsConfig cfg;
  std::optional<Run> complete;
  enumerate_runs(p, b, cfg, [&](const Run& r) {
    for (const auto& th : r.threads)
      if (th.role_name == "Init" && th.pc == 6 && r.events.size() == 10) complete = r;
    return !complete;
  });
  REQUIRE(complete.has_value());
  const Run& r = *complete;

  int init_tid = -1, resp_tid = -1;
  for (const auto& th : r.threads) {
    if (th.role_name == "Init") init_tid = th.id;
    if (th.role_name == "Resp") resp_tid = th.id;
  }
  REQUIRE(init_tid >= 0);
  REQUIRE(resp_tid >= 0);

  EvalContext ctx;
  ctx.threads["I"] = init_tid;
  ctx.threads["R"] = resp_tid;
  const ThreadInfo& init = r.threads[static_cast<std::size_t>(init_tid)];
  TermPtr m = init.binding.at("m");
  TermPtr self = Term::agent(init.agent);
  TermPtr peer = Term::agent(r.threads[static_cast<std::size_t>(resp_tid)].agent);

  const TermPtr first_parts[] = {self, peer, m};
  TermPtr first_wire = Term::tuple(first_parts);
  CHECK(eval_atom(r, Atom{AtomKind::Send, "I", first_wire, nullptr}, ctx, cfg));
  CHECK(eval_atom(r, Atom{AtomKind::Receive, "R", first_wire, nullptr}, ctx, cfg));
  CHECK(eval_atom(r, Atom{AtomKind::Gen, "I", m, nullptr}, ctx, cfg));
  CHECK_FALSE(eval_atom(r, Atom{AtomKind::Gen, "R", m, nullptr}, ctx, cfg));

  TermPtr n = r.threads[static_cast<std::size_t>(resp_tid)].binding.at("n");
  const TermPtr payload_parts[] = {n, m, self};
  TermPtr sig = Term::sig(Term::tuple(payload_parts), peer);
  CHECK(eval_atom(r, Atom{AtomKind::Contains, "", sig, m}, ctx, cfg));
  CHECK(eval_atom(r, Atom{AtomKind::Verify, "I", sig, nullptr}, ctx, cfg));

  FormulaPtr ord = Formula::order(Atom{AtomKind::Send, "I", first_wire, nullptr},
                                  Atom{AtomKind::Receive, "R", first_wire, nullptr});
  NaiveEval naive(r, cfg);
  CHECK(naive.eval(ord, ctx));
  CHECK(eval_formula(r, Formula::quant(FormulaKind::ForallThread, "I",
                                       Formula::quant(FormulaKind::ForallThread, "R",
                                                      Formula::truth())),
                     cfg));
  FormulaPtr ord_rev = Formula::order(Atom{AtomKind::Receive, "R", first_wire, nullptr},
                                      Atom{AtomKind::Send, "I", first_wire, nullptr});
  CHECK_FALSE(naive.eval(ord_rev, ctx));

  CHECK(eval_atom(r, Atom{AtomKind::Honest, "", self, nullptr}, ctx, cfg));

  // m went out bare, which keeps it fresh; the responder's n traveled
  // inside a tuple, which kills its freshness.
  CHECK(eval_atom(r, Atom{AtomKind::Fresh, "I", m, nullptr}, ctx, cfg));
  CHECK_FALSE(eval_atom(r, Atom{AtomKind::Fresh, "R", n, nullptr}, ctx, cfg));
}

TEST_CASE("forall-thread over the empty run is vacuously true") {
  Protocol p = load("cr.pcl");
  Bounds b{1, 14, 4};
  SemanticsConfig cfg;
  std::optional<Run> empty;
  enumerate_runs(p, b, cfg, [&](const Run& r) {
    if (r.events.empty() && r.threads.empty()) empty = r;
    return !empty;
  });
  REQUIRE(empty.has_value());
  FormulaPtr f = Formula::quant(FormulaKind::ForallThread, "X", Formula::falsity());
  CHECK(eval_formula(*empty, f, cfg));
}

TEST_CASE("modal weak-authentication over the matching conversation") {
  Protocol p = load("cr.pcl");
  Bounds b{1, 14, 4};
  SemanticsConfig cfg;
  std::optional<Run> complete;
  enumerate_runs(p, b, cfg, [&](const Run& r) {
    bool init_done = false;
    for (const auto& th : r.threads)
      if (th.role_name == "Init" && th.pc == 6) init_done = true;
    if (init_done && r.events.size() == 10) complete = r;
    return !complete;
  });
  REQUIRE(complete.has_value());

  // true [ role body ]_T  Honest(Y) & Y != hat(T) =>
  //   exists R. Gen(R,y) & Send(R, (Y,X,y,sig{(y,m,X)}Y))
  const Role* init = p.find_role("Init");
  REQUIRE(init != nullptr);
  TermPtr xp = Term::var("X", Sort::Agent);
  TermPtr yp = Term::var("Y", Sort::Agent);
  TermPtr y = Term::var("y", Sort::Nonce);
  TermPtr m = Term::var("m", Sort::Nonce);
  const TermPtr sig_parts[] = {y, m, xp};
  TermPtr sig = Term::sig(Term::tuple(sig_parts), yp);
  const TermPtr wire_parts[] = {yp, xp, y, sig};
  FormulaPtr exists_resp = Formula::quant(
      FormulaKind::ExistsThread, "R",
      Formula::conj(
          {Formula::make_atom(Atom{AtomKind::Gen, "R", y, nullptr}),
           Formula::make_atom(Atom{AtomKind::Send, "R", Term::tuple(wire_parts), nullptr})}));
  FormulaPtr cond = Formula::implies(
      Formula::conj(
          {Formula::make_atom(Atom{AtomKind::Honest, "", yp, nullptr}),
           Formula::negate(
               Formula::make_atom(Atom{AtomKind::Eq, "", yp, Term::var("^T", Sort::Agent)}))}),
      exists_resp);
  FormulaPtr weak_auth = Formula::modal(Formula::truth(), init->body, "T", cond);
  CHECK(eval_formula(*complete, weak_auth, cfg));
}

TEST_CASE("gamma-style invariant fails on a variant-protocol run") {
  Protocol qp = load("q_prime.pcl");
  Bounds b{1, 14, 4};
  SemanticsConfig cfg;
  FormulaPtr inv = cr_signature_invariant();
  bool found_false = false;
  bool any_true = false;
  enumerate_runs(qp, b, cfg, [&](const Run& r) {
    if (eval_formula(r, inv, cfg))
      any_true = true;
    else
      found_false = true;
    return !(found_false && any_true);
  });
  CHECK(found_false);
  CHECK(any_true);
}

TEST_CASE("main evaluator agrees with the reference evaluator") {
  std::vector<FormulaPtr> formulas;
  for (const auto& e : axiom_catalogue())
    if (e.schema->kind != FormulaKind::Modal) formulas.push_back(e.schema);

  SemanticsConfig plain;
  SemanticsConfig dh_on;
  dh_on.dh_theory = true;
  SemanticsConfig untyped;
  untyped.typed = false;

  struct Case {
    const char* fixture;
    SemanticsConfig cfg;
    Bounds bounds;
  };
  const Case cases[] = {
      {"cr.pcl", plain, {1, 14, 4}},
      {"cr.pcl", untyped, {1, 12, 4}},
      {"hash3.pcl", plain, {1, 14, 4}},
      {"dh_min.pcl", dh_on, {1, 8, 4}},
      {"sec_shared.pcl", plain, {1, 12, 4}},
      {"hash_typical.pcl", plain, {1, 10, 4}},
  };
  long compared = 0;
  for (const auto& c : cases) {
    Protocol p = load(c.fixture);
    long runs = 0;
    enumerate_runs(p, c.bounds, c.cfg, [&](const Run& r) {
      NaiveEval naive(r, c.cfg);
      for (const auto& f : formulas) {
        EvalContext ctx;
        bool expect = naive.eval(f, ctx);
        CHECK_MESSAGE(eval_formula(r, f, c.cfg) == expect,
                      c.fixture << " disagrees on " << to_string(f));
        ++compared;
      }
      return ++runs < 60;
    });
  }
  CHECK(compared > 500);
}

TEST_CASE("theory makes atom evaluation orientation-blind") {
  Protocol p = load("dh_min.pcl");
  Bounds b{1, 8, 4};
  SemanticsConfig on;
  on.dh_theory = true;
  long checked = 0;
  enumerate_runs(p, b, on, [&](const Run& r) {
    for (const auto& ev : r.events) {
      if (ev.kind != ActionKind::Send || ev.term->kind() != TermKind::DhH) continue;
      EvalContext ctx;
      ctx.threads["X"] = ev.thread;
      Atom straight{AtomKind::Send, "X", ev.term, nullptr};
      Atom swapped{AtomKind::Send, "X", Term::dh_h(ev.term->right(), ev.term->left()),
                   nullptr};
      CHECK(eval_atom(r, straight, ctx, on));
      CHECK(eval_atom(r, swapped, ctx, on));
      ++checked;
    }
    return checked < 20;
  });
  CHECK(checked > 0);
}

TEST_CASE("computed-exponential possession implies holding it (semantic DH1)") {
  Protocol p = load("dh_min.pcl");
  Bounds b{1, 8, 4};
  SemanticsConfig on;
  on.dh_theory = true;
  const AxiomEntry* dh1 = find_axiom("DH1");
  REQUIRE(dh1 != nullptr);
  long runs = 0;
  enumerate_runs(p, b, on, [&](const Run& r) {
    CHECK(eval_formula(r, dh1->schema, on));
    return ++runs < 100;
  });
  CHECK(runs > 0);
}

TEST_CASE("has closure coherence: components of held terms are held") {
  Protocol p = load("cr.pcl");
  Bounds b{1, 14, 4};
  SemanticsConfig cfg;
  long checked = 0;
  enumerate_runs(p, b, cfg, [&](const Run& r) {
    for (const auto& th : r.threads) {
      Knowledge k = r.thread_knowledge(th.id);
      for (const auto& [idx, t] : r.thread_additions[static_cast<std::size_t>(th.id)]) {
        if (t->kind() == TermKind::Pair) {
          CHECK(k.derive(t->left(), b.max_intruder_depth));
          CHECK(k.derive(t->right(), b.max_intruder_depth));
          ++checked;
        }
        if (t->kind() == TermKind::Sig) {
          CHECK(k.derive(t->left(), b.max_intruder_depth));
          ++checked;
        }
      }
    }
    return checked < 200;
  });
  CHECK(checked > 0);
}

TEST_CASE("axiom_instances enumeration and the HASH1 tautology") {
  Protocol p = load("cr.pcl");
  Bounds b{1, 14, 4};
  SemanticsConfig cfg;
  std::optional<Run> complete;
  enumerate_runs(p, b, cfg, [&](const Run& r) {
    if (r.events.size() == 10) complete = r;
    return !complete;
  });
  REQUIRE(complete.has_value());

  FormulaPtr closed = Formula::truth();
  CHECK(axiom_instances(*complete, closed, {}, cfg).size() == 1);

  FormulaPtr schema =
      Formula::make_atom(Atom{AtomKind::Honest, "", Term::var("A", Sort::Agent), nullptr});
  std::vector<SchemaVar> vars = {{SchemaVar::Kind::Thread, "X"},
                                 {SchemaVar::Kind::Agent, "A"}};
  auto insts = axiom_instances(*complete, schema, vars, cfg);
  CHECK(insts.size() == complete->threads.size() * p.setup.agents.size());
  for (const auto& inst : insts) {
    // Closed instances evaluate without any context.
    (void)eval_formula(*complete, inst, cfg);
  }

  // HASH1 unfolds to an implication whose sides coincide, so every
  // instantiation is true on every run.
  const AxiomEntry* h1 = find_axiom("HASH1");
  REQUIRE(h1 != nullptr);
  long inst_checked = 0;
  Protocol hp = load("hash_typical.pcl");
  enumerate_runs(hp, Bounds{1, 10, 4}, cfg, [&](const Run& r) {
    CHECK(eval_formula(r, h1->schema, cfg));
    ++inst_checked;
    return inst_checked < 50;
  });
  CHECK(inst_checked > 0);
}
