#include "pcl/axioms.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "pcl/parser.hpp"

namespace pcl {

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::HoldsWithinBounds: return "holds-within-bounds";
    case Outcome::Counterexample: return "counterexample";
    case Outcome::Error: return "error";
  }
  return "?";
}

// ── schema builders ───────────────────────────────────────────────────────

namespace {

TermPtr tv(const std::string& n, Sort s = Sort::Message) { return Term::var(n, s); }
TermPtr hat(const std::string& thread) { return Term::var("^" + thread, Sort::Agent); }

Atom act(AtomKind k, const std::string& thread, TermPtr t) {
  Atom a{};
  a.kind = k;
  a.thread = thread;
  a.t1 = std::move(t);
  return a;
}

Atom honest(TermPtr agent) {
  Atom a{};
  a.kind = AtomKind::Honest;
  a.t1 = std::move(agent);
  return a;
}

Atom contains_a(TermPtr big, TermPtr small) {
  Atom a{};
  a.kind = AtomKind::Contains;
  a.t1 = std::move(big);
  a.t2 = std::move(small);
  return a;
}

Atom eq(TermPtr l, TermPtr r) {
  Atom a{};
  a.kind = AtomKind::Eq;
  a.t1 = std::move(l);
  a.t2 = std::move(r);
  return a;
}

FormulaPtr A(Atom a) { return Formula::make_atom(std::move(a)); }

using FK = FormulaKind;

FormulaPtr forall_thread(const std::string& v, FormulaPtr b) {
  return Formula::quant(FK::ForallThread, v, std::move(b));
}
FormulaPtr exists_thread(const std::string& v, FormulaPtr b, TermPtr at = nullptr) {
  return Formula::quant(FK::ExistsThread, v, std::move(b), std::move(at));
}
FormulaPtr forall_term(const std::string& v, FormulaPtr b, Sort s = Sort::Message) {
  return Formula::quant(FK::ForallTerm, v, std::move(b), nullptr, s);
}
FormulaPtr exists_term(const std::string& v, FormulaPtr b) {
  return Formula::quant(FK::ExistsTerm, v, std::move(b));
}
FormulaPtr forall_agent(const std::string& v, FormulaPtr b) {
  return Formula::quant(FK::ForallAgent, v, std::move(b));
}

TermPtr tup(std::vector<TermPtr> parts) { return Term::tuple(parts); }

FormulaPtr ver_schema() {
  TermPtr a = tv("A", Sort::Agent);
  TermPtr sig = Term::sig(tv("x"), a);
  FormulaPtr body = Formula::implies(
      Formula::conj({A(honest(a)), A(act(AtomKind::Verify, "Y", sig)),
                     Formula::negate(A(eq(a, hat("Y"))))}),
      exists_thread("X",
                    exists_term("mm", Formula::conj({A(act(AtomKind::Send, "X", tv("mm"))),
                                                     A(contains_a(tv("mm"), sig))})),
                    a));
  return forall_thread("Y", forall_agent("A", forall_term("x", body)));
}

FormulaPtr sec_schema() {
  TermPtr a = tv("A", Sort::Agent);
  TermPtr b = tv("B", Sort::Agent);
  FormulaPtr premise = Formula::conj(
      {A(honest(a)),
       Formula::disj({A(act(AtomKind::Decrypt, "Y", Term::enc(tv("x"), Term::pub_key(a)))),
                      A(act(AtomKind::Decrypt, "Y",
                            Term::enc(tv("x"), Term::shared_key(a, b))))})});
  FormulaPtr body = Formula::implies(premise, A(eq(hat("Y"), a)));
  return forall_thread(
      "Y", forall_agent("A", forall_agent("B", forall_term("x", body))));
}

FormulaPtr ar1_schema() {
  Action recv{};
  recv.kind = ActionKind::Receive;
  recv.payload = tv("t");
  FormulaPtr post = exists_thread("Z", A(act(AtomKind::Send, "Z", tv("t"))));
  return Formula::modal(Formula::truth(), {recv}, "X", post);
}

FormulaPtr ar3_schema() {
  Action dec{};
  dec.kind = ActionKind::Dec;
  dec.payload = tv("x", Sort::Ciphertext);
  dec.key = tv("K");
  dec.out_var = tv("y");
  FormulaPtr pre = A(act(AtomKind::Receive, "X", tv("x", Sort::Ciphertext)));
  FormulaPtr post = A(act(AtomKind::Receive, "X", Term::enc(tv("y"), tv("K"))));
  return Formula::modal(pre, {dec}, "X", post);
}

FormulaPtr dh1_schema() {
  TermPtr h = Term::dh_h(tv("a"), tv("b"));
  FormulaPtr body = Formula::implies(A(act(AtomKind::ComputesDh, "X", h)),
                                     A(act(AtomKind::Has, "X", h)));
  return forall_thread("X", forall_term("a", forall_term("b", body)));
}

FormulaPtr dh2_schema() {
  TermPtr h = Term::dh_h(tv("a"), tv("b"));
  FormulaPtr body = Formula::implies(
      A(act(AtomKind::Has, "X", h)),
      Formula::disj(
          {A(act(AtomKind::ComputesDh, "X", h)),
           exists_term("mm", Formula::conj({A(act(AtomKind::Receive, "X", tv("mm"))),
                                            A(contains_a(tv("mm"), h))}))}));
  return forall_thread("X", forall_term("a", forall_term("b", body)));
}

FormulaPtr dh3_schema() {
  TermPtr h = Term::dh_h(tv("a"), tv("b"));
  FormulaPtr concl = exists_thread(
      "Y", exists_term("mm2", Formula::conj({A(act(AtomKind::ComputesDh, "Y", h)),
                                             A(act(AtomKind::Send, "Y", tv("mm2"))),
                                             A(contains_a(tv("mm2"), h))})));
  FormulaPtr body = Formula::implies(
      Formula::conj({A(act(AtomKind::Receive, "X", tv("mm"))), A(contains_a(tv("mm"), h))}),
      concl);
  return forall_thread("X",
                       forall_term("mm", forall_term("a", forall_term("b", body))));
}

FormulaPtr dh4_schema() {
  FormulaPtr body = Formula::implies(A(act(AtomKind::Fresh, "X", tv("a"))),
                                     A(act(AtomKind::Fresh, "X", Term::dh_g(tv("a")))));
  return forall_thread("X", forall_term("a", body));
}

FormulaPtr hash1_schema() {
  TermPtr h = Term::hash(tv("m"), tv("K", Sort::SymKey));
  FormulaPtr body =
      Formula::implies(A(act(AtomKind::ComputesHash, "X", h)),
                       Formula::conj({A(act(AtomKind::Has, "X", tv("m"))),
                                      A(act(AtomKind::Has, "X", tv("K", Sort::SymKey)))}));
  return forall_thread(
      "X", forall_term("m", forall_term("K", body, Sort::SymKey)));
}

FormulaPtr hash2_schema() {
  TermPtr h = Term::hash(tv("m"), tv("K", Sort::SymKey));
  FormulaPtr body = Formula::implies(A(act(AtomKind::ComputesHash, "X", h)),
                                     A(act(AtomKind::Has, "X", h)));
  return forall_thread(
      "X", forall_term("m", forall_term("K", body, Sort::SymKey)));
}

FormulaPtr hash3_schema() {
  TermPtr h = Term::hash(tv("m"), tv("K", Sort::SymKey));
  FormulaPtr concl = exists_thread(
      "Y", Formula::conj({A(act(AtomKind::ComputesHash, "Y", h)),
                          A(act(AtomKind::Send, "Y", h))}));
  FormulaPtr body = Formula::implies(A(act(AtomKind::Receive, "X", h)), concl);
  return forall_thread(
      "X", forall_term("m", forall_term("K", body, Sort::SymKey)));
}

FormulaPtr hash4_schema() {
  TermPtr h = Term::hash(tv("m"), tv("K", Sort::SymKey));
  FormulaPtr concl = Formula::disj(
      {A(act(AtomKind::ComputesHash, "X", h)),
       exists_thread(
           "Y", exists_term("mm", Formula::conj({A(act(AtomKind::ComputesHash, "Y", h)),
                                                 A(act(AtomKind::Send, "Y", tv("mm"))),
                                                 A(contains_a(tv("mm"), h))})))});
  FormulaPtr body = Formula::implies(A(act(AtomKind::Has, "X", h)), concl);
  return forall_thread(
      "X", forall_term("m", forall_term("K", body, Sort::SymKey)));
}

FormulaPtr collapse_schema() {
  TermPtr h = Term::hash(tv("m"), tv("K", Sort::SymKey));
  FormulaPtr body = Formula::implies(
      Formula::conj({A(honest(hat("X"))), A(act(AtomKind::Has, "X", h))}),
      A(act(AtomKind::ComputesHash, "X", h)));
  return forall_thread(
      "X", forall_term("m", forall_term("K", body, Sort::SymKey)));
}

}  // namespace

FormulaPtr cr_signature_invariant() {
  // Send(Y,t) & Contains(t, sig{(y,m,XA)}hat(Y))
  //   => Gen(Y,m) | (Receive(Y,(XA,hat(Y),m)) < Send(Y,(hat(Y),XA,y,sig{...})))
  TermPtr xa = tv("XA", Sort::Agent);
  TermPtr sig = Term::sig(tup({tv("y"), tv("m"), xa}), hat("Y"));
  FormulaPtr premise =
      Formula::conj({A(act(AtomKind::Send, "Y", tv("t"))), A(contains_a(tv("t"), sig))});
  FormulaPtr concl = Formula::disj(
      {A(act(AtomKind::Gen, "Y", tv("m"))),
       Formula::order(act(AtomKind::Receive, "Y", tup({xa, hat("Y"), tv("m")})),
                      act(AtomKind::Send, "Y", tup({hat("Y"), xa, tv("y"), sig})))});
  FormulaPtr body = Formula::implies(premise, concl);
  body = forall_agent("XA", body);
  body = forall_term("m", body);
  body = forall_term("y", body);
  body = forall_term("t", body);
  return forall_thread("Y", body);
}

const std::vector<AxiomEntry>& axiom_catalogue() {
  static const std::vector<AxiomEntry> entries = [] {
    std::vector<AxiomEntry> v;
    v.push_back({"VER", "basic PCL proof system, signature-verification axiom",
                 "a verified signature of an honest non-peer agent implies a thread of "
                 "that agent sent a message containing it",
                 ver_schema(), false});
    v.push_back({"SEC", "basic PCL proof system, decryption-secrecy axiom",
                 "only the key owner can decrypt a message encrypted under an honest "
                 "agent's key",
                 sec_schema(), false});
    v.push_back({"AR1", "precursor protocol logics; not part of basic PCL",
                 "every received term was previously sent by some thread (the network "
                 "itself may be that sender)",
                 ar1_schema(), false});
    v.push_back({"AR3", "basic PCL proof system, decryption action axiom",
                 "after y := dec x,K the thread's earlier actions apply to enc{y}K",
                 ar3_schema(), false});
    v.push_back({"DH1", "Diffie-Hellman extension of basic PCL",
                 "computing a shared exponential implies having it", dh1_schema(), true});
    v.push_back({"DH2", "Diffie-Hellman extension of basic PCL",
                 "a held exponential was computed or received", dh2_schema(), true});
    v.push_back({"DH3", "Diffie-Hellman extension of basic PCL",
                 "a received exponential was computed and sent by someone", dh3_schema(),
                 true});
    v.push_back({"DH4", "Diffie-Hellman extension of basic PCL",
                 "freshness of an exponent carries over to its public part", dh4_schema(),
                 true});
    v.push_back({"HASH1", "keyed-hash extension of PCL",
                 "computing a keyed hash implies having key and payload", hash1_schema(),
                 false});
    v.push_back({"HASH2", "keyed-hash extension of PCL",
                 "computing a keyed hash implies having the hash", hash2_schema(), false});
    v.push_back({"HASH3", "keyed-hash extension of PCL",
                 "a received keyed hash was computed and sent bare by some thread",
                 hash3_schema(), false});
    v.push_back({"HASH4", "keyed-hash extension of PCL",
                 "a held keyed hash was computed locally, or computed and sent by someone",
                 hash4_schema(), false});
    v.push_back({"GAMMA1", "signature invariant of the challenge-response example",
                 "a sent signature's payload nonce was generated here or received as the "
                 "bare middle message",
                 cr_signature_invariant(), false});
    v.push_back({"COLLAPSE", "keyed-hash extension, typical integrity use pattern",
                 "an honest thread holding a keyed hash can compute it itself",
                 collapse_schema(), false});
    return v;
  }();
  return entries;
}

const AxiomEntry* find_axiom(const std::string& name) {
  for (const auto& e : axiom_catalogue())
    if (e.name == name) return &e;
  return nullptr;
}

// ── checking ──────────────────────────────────────────────────────────────

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

void fill_receive_stats(const Run& r, CheckStats& st) {
  for (const auto& ev : r.events) {
    if (ev.kind != ActionKind::Receive || ev.synthetic) continue;
    ++st.receives_total;
    if (ev.intruder_composed) ++st.receives_intruder_composed;
  }
}

std::vector<int> witness_events(const Run& run,
                                const std::vector<std::pair<std::string, std::string>>& bs) {
  std::vector<int> out;
  for (const auto& [var, val] : bs) {
    if (val.size() < 2 || val[0] != 'T') continue;
    std::size_t paren = val.find('(');
    if (paren == std::string::npos) continue;
    int tid;
    try {
      tid = std::stoi(val.substr(1, paren - 1));
    } catch (...) {
      continue;
    }
    for (const auto& ev : run.events)
      if (ev.thread == tid) out.push_back(ev.index);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// AR1 is judged directly from event provenance: a received message either
// replays an earlier honest send or was composed by the network adversary;
// composed deliveries satisfy the existential through the (virtual)
// intruder sender and are tallied separately.
Verdict check_ar1(const Protocol& p, const Bounds& bounds, const SemanticsConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  v.subject = "AR1";
  v.config = cfg;
  v.bounds = bounds;
  enumerate_runs(p, bounds, cfg, [&](const Run& r) {
    ++v.stats.runs_explored;
    v.stats.depth_exhausted = v.stats.depth_exhausted || r.depth_exhausted;
    fill_receive_stats(r, v.stats);
    for (const auto& ev : r.events) {
      if (ev.kind != ActionKind::Receive || ev.synthetic || ev.intruder_composed) continue;
      bool sent_before = false;
      for (const auto& prior : r.events)
        if (prior.index < ev.index && prior.kind == ActionKind::Send &&
            equal_mod_theory(prior.term, ev.term, cfg))
          sent_before = true;
      if (!sent_before) {
        v.outcome = Outcome::Counterexample;
        v.witness = CheckWitness{r, "replayed receive without a matching earlier send",
                                 {}, {ev.index}};
        return false;
      }
    }
    return true;
  });
  v.note = "existential sender realized by honest sends for replayed messages and by "
           "the network adversary for composed ones (tallied in stats)";
  v.stats.millis = ms_since(t0);
  return v;
}

}  // namespace

Verdict check_formula(const Protocol& p, const std::string& name, const FormulaPtr& f,
                      const Bounds& bounds, const SemanticsConfig& cfg, int workers) {
  auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  v.subject = name;
  v.config = cfg;
  v.bounds = bounds;

  if (workers <= 1) {
    enumerate_runs(p, bounds, cfg, [&](const Run& r) {
      ++v.stats.runs_explored;
      v.stats.depth_exhausted = v.stats.depth_exhausted || r.depth_exhausted;
      fill_receive_stats(r, v.stats);
      if (!eval_formula(r, f, cfg)) {
        EvalWitness w = eval_formula_witness(r, f, cfg);
        v.outcome = Outcome::Counterexample;
        v.witness = CheckWitness{r, to_string(f), w.bindings, witness_events(r, w.bindings)};
        return false;
      }
      return true;
    });
  } else {
    // Batches preserve enumeration order; the first failing run in the
    // first failing batch is the verdict regardless of completion order.
    const std::size_t batch_size = static_cast<std::size_t>(workers) * 16;
    std::vector<Run> batch;
    bool done = false;
    auto flush = [&]() {
      if (batch.empty() || done) return;
      std::vector<char> bad(batch.size(), 0);
      std::vector<std::thread> pool;
      std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(workers), batch.size());
      for (std::size_t w = 0; w < n; ++w)
        pool.emplace_back([&, w]() {
          for (std::size_t i = w; i < batch.size(); i += n)
            bad[i] = eval_formula(batch[i], f, cfg) ? 0 : 1;
        });
      for (auto& th : pool) th.join();
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!bad[i]) continue;
        EvalWitness w = eval_formula_witness(batch[i], f, cfg);
        v.outcome = Outcome::Counterexample;
        v.witness = CheckWitness{batch[i], to_string(f), w.bindings,
                                 witness_events(batch[i], w.bindings)};
        done = true;
        break;
      }
      batch.clear();
    };
    enumerate_runs(p, bounds, cfg, [&](const Run& r) {
      ++v.stats.runs_explored;
      v.stats.depth_exhausted = v.stats.depth_exhausted || r.depth_exhausted;
      fill_receive_stats(r, v.stats);
      batch.push_back(r);
      if (batch.size() >= batch_size) flush();
      return !done;
    });
    flush();
  }
  v.stats.millis = ms_since(t0);
  return v;
}

Verdict check(const Protocol& p, const AxiomEntry& entry, const Bounds& bounds,
              const SemanticsConfig& cfg, int workers) {
  if (entry.needs_dh && !cfg.dh_theory) {
    Verdict v;
    v.subject = entry.name;
    v.outcome = Outcome::Error;
    v.config = cfg;
    v.bounds = bounds;
    v.note = "feature mismatch: " + entry.name + " requires --dh-theory on";
    return v;
  }
  if (entry.name == "AR1") return check_ar1(p, bounds, cfg);
  return check_formula(p, entry.name, entry.schema, bounds, cfg, workers);
}

// ── honesty-style per-basic-sequence checking ─────────────────────────────

namespace {

// Variables a basic sequence consumes without binding (its parameters when
// the sequence is lifted to a standalone role).
std::vector<TermPtr> free_vars_of_bs(const Role& role, const BasicSequence& bs) {
  std::set<std::string> bound;
  for (const auto& prm : role.params) bound.insert(prm->name());
  std::vector<TermPtr> free;
  std::set<std::string> free_names;
  auto vars_of = [](const TermPtr& t, std::vector<TermPtr>& out) {
    if (!t) return;
    std::vector<TermPtr> all;
    collect_subterms(t, all);
    for (const auto& s : all)
      if (s->kind() == TermKind::Var) out.push_back(s);
  };
  for (std::size_t i = bs.begin; i < bs.end; ++i) {
    const Action& a = role.body[i];
    std::vector<TermPtr> uses, binds;
    switch (a.kind) {
      case ActionKind::New:
        binds.push_back(a.out_var);
        break;
      case ActionKind::Send:
        vars_of(a.from, uses);
        vars_of(a.to, uses);
        vars_of(a.payload, uses);
        break;
      case ActionKind::Receive:
        vars_of(a.from, uses);
        vars_of(a.to, uses);
        vars_of(a.payload, binds);
        break;
      case ActionKind::Enc:
      case ActionKind::Dec:
      case ActionKind::Sign:
        vars_of(a.payload, uses);
        vars_of(a.key, uses);
        binds.push_back(a.out_var);
        break;
      case ActionKind::Verify:
        vars_of(a.sig_term, uses);
        vars_of(a.payload, uses);
        vars_of(a.key, uses);
        break;
    }
    for (const auto& u : uses)
      if (!bound.count(u->name()) && free_names.insert(u->name()).second) free.push_back(u);
    for (const auto& b : binds) bound.insert(b->name());
  }
  return free;
}

std::string bs_role_name(const std::string& role, int index) {
  return role + ".bs" + std::to_string(index);
}

// One role per basic sequence. Free variables become parameters fed by a
// synthetic receive drawn from whatever the adversary can supply; with the
// precedence rule the sequence instead carries its whole role prefix.
std::shared_ptr<Protocol> make_honesty_protocol(const Protocol& p, bool precedence) {
  auto out = std::make_shared<Protocol>();
  out->name = p.name + "_bs";
  out->setup = p.setup;
  for (const auto& role : p.roles) {
    for (const auto& bs : basic_sequences(role)) {
      Role r;
      r.name = bs_role_name(role.name, bs.index);
      r.params = role.params;
      if (precedence) {
        r.body.assign(role.body.begin(),
                      role.body.begin() + static_cast<long>(bs.end));
      } else {
        auto free = free_vars_of_bs(role, bs);
        if (!free.empty()) {
          Action feed{};
          feed.kind = ActionKind::Receive;
          feed.payload = free.size() == 1 ? free.front() : Term::tuple(free);
          feed.synthetic_feed = true;
          r.body.push_back(std::move(feed));
        }
        auto acts = bs.actions();
        r.body.insert(r.body.end(), acts.begin(), acts.end());
      }
      out->roles.push_back(std::move(r));
    }
  }
  validate(*out);
  return out;
}

}  // namespace

std::vector<HonestyVerdict> check_invariant_honesty_mode(const Protocol& p,
                                                         const FormulaPtr& invariant,
                                                         const Bounds& bounds,
                                                         const SemanticsConfig& cfg) {
  if (invariant->kind != FormulaKind::ForallThread)
    throw std::invalid_argument(
        "honesty-mode invariants must be top-level forall-thread formulas");
  auto synth = make_honesty_protocol(p, cfg.precedence_rule);

  std::vector<HonestyVerdict> verdicts;
  std::map<std::string, std::size_t> index_of;
  for (const auto& role : p.roles)
    for (const auto& bs : basic_sequences(role)) {
      index_of[bs_role_name(role.name, bs.index)] = verdicts.size();
      verdicts.push_back(HonestyVerdict{role.name, bs.index, Outcome::HoldsWithinBounds,
                                        std::nullopt});
    }

  std::size_t open = verdicts.size();
  enumerate_runs(*synth, bounds, cfg, [&](const Run& r) {
    for (const auto& th : r.threads) {
      auto it = index_of.find(th.role_name);
      if (it == index_of.end()) continue;
      HonestyVerdict& hv = verdicts[it->second];
      if (hv.outcome == Outcome::Counterexample) continue;
      EvalWitness w = eval_forall_body_for_thread(r, invariant, th.id, cfg);
      if (!w.value) {
        hv.outcome = Outcome::Counterexample;
        hv.witness = CheckWitness{r, to_string(invariant), w.bindings,
                                  witness_events(r, w.bindings)};
        hv.witness->run.protocol = synth.get();
        --open;
      }
    }
    return open > 0;
  });
  // Witness runs reference the synthetic protocol; keep it alive.
  for (auto& hv : verdicts)
    if (hv.witness) hv.witness->owner = synth;
  return verdicts;
}

std::optional<Run> executable(const Protocol& p, const FormulaPtr& pattern,
                              const Bounds& bounds, const SemanticsConfig& cfg) {
  std::optional<Run> found;
  enumerate_runs(p, bounds, cfg, [&](const Run& r) {
    if (eval_formula(r, pattern, cfg)) {
      found = r;
      return false;
    }
    return true;
  });
  return found;
}

// ── reproduction drivers ──────────────────────────────────────────────────

namespace {

struct ReproCtx {
  std::string fixtures_dir;
  std::optional<Bounds> bounds;
  std::optional<SemanticsConfig> config;
  int workers = 1;

  Protocol load(const std::string& name) const {
    return parse_protocol_file(fixtures_dir + "/" + name);
  }
  Bounds b(Bounds def) const { return bounds ? *bounds : def; }
  SemanticsConfig c(SemanticsConfig def) const { return config ? *config : def; }
};

std::string percent(long num, long den) {
  std::ostringstream os;
  os.precision(1);
  os << std::fixed << (den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den))
     << "% (" << num << "/" << den << ")";
  return os.str();
}

// Share of honest Has(X, hash{m}K) instances that the thread could also
// have computed itself, across every enumerated run.
std::pair<long, long> collapse_census(const Protocol& p, const Bounds& bounds,
                                      const SemanticsConfig& cfg) {
  long total = 0, computed = 0;
  enumerate_runs(p, bounds, cfg, [&](const Run& r) {
    std::vector<TermPtr> all;
    for (const auto& ev : r.events)
      if (ev.term) collect_subterms(ev.term, all);
    std::sort(all.begin(), all.end(), TermLess{});
    all.erase(std::unique(all.begin(), all.end(),
                          [](const TermPtr& a, const TermPtr& b) { return equal(a, b); }),
              all.end());
    for (const auto& th : r.threads) {
      if (!th.honest) continue;
      Knowledge k = r.thread_knowledge(th.id);
      for (const auto& t : all) {
        if (t->kind() != TermKind::Hash) continue;
        if (!k.derive(t, bounds.max_intruder_depth)) continue;
        ++total;
        if (k.derive(t->right(), bounds.max_intruder_depth) &&
            k.derive(t->left(), bounds.max_intruder_depth))
          ++computed;
      }
    }
    return true;
  });
  return {computed, total};
}

FormulaPtr dh_formula2_pattern() {
  // exists X,Y,a,b:  Send(X, h(a,b)) < Receive(Y, h(b,a))
  FormulaPtr ord = Formula::order(act(AtomKind::Send, "X", Term::dh_h(tv("a"), tv("b"))),
                                  act(AtomKind::Receive, "Y", Term::dh_h(tv("b"), tv("a"))));
  FormulaPtr f = exists_term("b", ord);
  f = exists_term("a", f);
  f = Formula::quant(FK::ExistsThread, "Y", f);
  return Formula::quant(FK::ExistsThread, "X", f);
}

std::multiset<std::string> outcome_multiset(const std::vector<HonestyVerdict>& vs) {
  std::multiset<std::string> out;
  for (const auto& v : vs) out.insert(outcome_name(v.outcome));
  return out;
}

}  // namespace

std::vector<std::string> repro_case_ids() {
  return {"hash3",  "gamma1-untyped", "gamma1-typed",  "dh-formula2",
          "sec-symmetric", "hash4-collapse", "q-prime", "permutation"};
}

ReproReport reproduce(const std::string& case_id, const std::string& fixtures_dir,
                      std::optional<Bounds> bounds_override,
                      std::optional<SemanticsConfig> config_override, int workers) {
  ReproCtx ctx{fixtures_dir, bounds_override, config_override, workers};
  ReproReport rep;
  rep.case_id = case_id;
  std::ostringstream story;

  if (case_id == "hash3") {
    Protocol p = ctx.load("hash3.pcl");
    Bounds b = ctx.b({1, 14, 4});
    SemanticsConfig cfg = ctx.c({});
    Verdict v = check(p, *find_axiom("HASH3"), b, cfg, ctx.workers);
    rep.as_expected = v.outcome == Outcome::Counterexample;
    if (v.witness) rep.witness_run = v.witness->run;
    story << "HASH3 claims a received keyed hash was computed and sent bare by some "
             "thread.\n";
    if (rep.as_expected) {
      story << "Counterexample found: the initiator receives hash{m}K bare, but the "
               "only thread able to compute it (the initiator itself) sent it only "
               "inside an encryption, and the responder that did send it bare cannot "
               "compute it.\n";
    } else {
      story << "Expected a counterexample but the axiom held within bounds.\n";
    }
    rep.verdicts.push_back(std::move(v));
  } else if (case_id == "gamma1-untyped" || case_id == "gamma1-typed") {
    Protocol p = ctx.load("cr.pcl");
    Bounds b = ctx.b({2, 14, 4});
    SemanticsConfig cfg = ctx.c({});
    cfg.typed = case_id == "gamma1-typed";
    Verdict v = check_formula(p, "GAMMA1", cr_signature_invariant(), b, cfg, ctx.workers);
    if (case_id == "gamma1-untyped") {
      bool sig_bound = false;
      if (v.witness)
        for (const auto& th : v.witness->run.threads) {
          auto it = th.binding.find("x");
          sig_bound = sig_bound || (it != th.binding.end() &&
                                    it->second->kind() == TermKind::Sig);
        }
      rep.as_expected = v.outcome == Outcome::Counterexample && sig_bound;
      story << "Untyped matching lets a responder bind its nonce variable x to a full "
               "signature, so the signed reply carries a nonce the thread neither "
               "generated nor received as the bare middle message.\n";
      story << (rep.as_expected
                    ? "Counterexample found with x bound to a signature, as required.\n"
                    : "No such counterexample appeared; this is unexpected.\n");
    } else {
      rep.as_expected = v.outcome == Outcome::HoldsWithinBounds;
      story << "With sorts enforced the same search finds no violation: nonce "
               "variables only bind nonces.\n";
      story << (rep.as_expected ? "Invariant holds within identical bounds.\n"
                                : "Unexpected counterexample in typed mode.\n");
    }
    if (v.witness) rep.witness_run = v.witness->run;
    rep.verdicts.push_back(std::move(v));
  } else if (case_id == "dh-formula2") {
    Protocol p = ctx.load("dh_min.pcl");
    Bounds b = ctx.b({1, 8, 4});
    SemanticsConfig off = ctx.c({});
    off.dh_theory = false;
    SemanticsConfig on = off;
    on.dh_theory = true;
    auto r_off = executable(p, dh_formula2_pattern(), b, off);
    auto r_on = executable(p, dh_formula2_pattern(), b, on);
    rep.as_expected = !r_off.has_value() && r_on.has_value();
    Verdict v1;
    v1.subject = "Send(X,h(a,b)) < Receive(Y,h(b,a)), theory off";
    v1.outcome = r_off ? Outcome::Counterexample : Outcome::HoldsWithinBounds;
    v1.config = off;
    v1.bounds = b;
    v1.note = r_off ? "pattern executable" : "pattern not executable within bounds";
    Verdict v2;
    v2.subject = "Send(X,h(a,b)) < Receive(Y,h(b,a)), theory on";
    v2.outcome = r_on ? Outcome::Counterexample : Outcome::HoldsWithinBounds;
    v2.config = on;
    v2.bounds = b;
    v2.note = r_on ? "pattern executable; witness attached" : "pattern not executable";
    if (r_on) {
      v2.witness = CheckWitness{*r_on, "event-order pattern witness", {}, {}};
      rep.witness_run = r_on;
    }
    story << "Without the equation h(a,b) = h(b,a), sending h(a,b) and receiving "
             "h(b,a) is not a possible execution; with the equation in the term "
             "system the same pattern runs.\n";
    story << (rep.as_expected ? "Observed exactly that split.\n"
                              : "Observed something else; unexpected.\n");
    rep.verdicts.push_back(std::move(v1));
    rep.verdicts.push_back(std::move(v2));
  } else if (case_id == "sec-symmetric") {
    Protocol p = ctx.load("sec_shared.pcl");
    Bounds b = ctx.b({1, 12, 4});
    SemanticsConfig asym = ctx.c({});
    asym.keys = KeyScheme::AsymmetricOnly;
    SemanticsConfig sym = ctx.c({});
    sym.keys = KeyScheme::SymmetricOnly;
    Verdict va = check(p, *find_axiom("SEC"), b, asym, ctx.workers);
    Verdict vs = check(p, *find_axiom("SEC"), b, sym, ctx.workers);
    rep.as_expected = va.outcome == Outcome::HoldsWithinBounds &&
                      vs.outcome == Outcome::Counterexample;
    if (vs.witness) rep.witness_run = vs.witness->run;
    story << "Under asymmetric-only keys, only the owner of a private key decrypts, "
             "and SEC holds. Under symmetric-only keys the shared-key peer decrypts "
             "too, contradicting SEC's single-decryptor reading.\n";
    story << (rep.as_expected ? "Observed: holds under asym, counterexample under sym.\n"
                              : "Unexpected outcome pair.\n");
    rep.verdicts.push_back(std::move(va));
    rep.verdicts.push_back(std::move(vs));
  } else if (case_id == "q-prime") {
    Protocol cr = ctx.load("cr.pcl");
    Protocol qp = ctx.load("q_prime.pcl");
    Bounds b = ctx.b({1, 14, 4});
    SemanticsConfig cfg = ctx.c({});
    Verdict v = check_formula(qp, "GAMMA1", cr_signature_invariant(), b, cfg, ctx.workers);
    Bounds hb = ctx.b({1, 12, 4});
    auto h_cr = check_invariant_honesty_mode(cr, cr_signature_invariant(), hb, cfg);
    auto h_qp = check_invariant_honesty_mode(qp, cr_signature_invariant(), hb, cfg);
    auto find_bs = [](const std::vector<HonestyVerdict>& vs, const std::string& role,
                      int idx) -> const HonestyVerdict* {
      for (const auto& v : vs)
        if (v.role == role && v.bs_index == idx) return &v;
      return nullptr;
    };
    const HonestyVerdict* cr_bs2 = find_bs(h_cr, "Init", 1);
    const HonestyVerdict* qp_bs2 = find_bs(h_qp, "Init", 1);
    bool same = cr_bs2 && qp_bs2 && cr_bs2->outcome == qp_bs2->outcome;
    rep.as_expected = v.outcome == Outcome::Counterexample && same;
    if (v.witness) rep.witness_run = v.witness->run;
    story << "The variant protocol receives m inside an encryption instead of "
             "generating it, so the signature invariant fails at run level.\n";
    story << "Per-basic-sequence checking cannot tell the two protocols apart: the "
             "shared second sequence gets the same verdict in both.\n";
    story << "Run-level verdict on the variant: " << outcome_name(v.outcome) << "\n";
    if (cr_bs2 && qp_bs2)
      story << "Shared-sequence verdicts: " << outcome_name(cr_bs2->outcome) << " vs "
            << outcome_name(qp_bs2->outcome) << (same ? " (identical)\n" : " (differ!)\n");
    rep.verdicts.push_back(std::move(v));
    rep.honesty = h_qp;
  } else if (case_id == "hash4-collapse") {
    Protocol typical = ctx.load("hash_typical.pcl");
    Protocol h3 = ctx.load("hash3.pcl");
    SemanticsConfig cfg = ctx.c({});
    auto [c1, t1] = collapse_census(typical, ctx.b({2, 10, 4}), cfg);
    auto [c2, t2] = collapse_census(h3, ctx.b({1, 14, 4}), cfg);
    bool typical_all = t1 > 0 && c1 == t1;
    bool h3_some_missing = t2 > 0 && c2 < t2;
    rep.as_expected = typical_all && h3_some_missing;
    story << "In the typical integrity pattern every honest holder of hash{m}K also "
             "holds m and K, so holding collapses into computing and the existential "
             "branch of HASH4 never carries information.\n";
    story << "typical-pattern fixture: " << percent(c1, t1)
          << " of honest Has instances are computable locally\n";
    story << "hash3 fixture:          " << percent(c2, t2) << "\n";
    story << (rep.as_expected ? "Collapse confirmed on the typical pattern only.\n"
                              : "Unexpected census.\n");
  } else if (case_id == "permutation") {
    Protocol p1 = ctx.load("perm.pcl");
    Protocol p2 = permute_basic_sequences(p1, "Chain", {3, 2, 1});
    FormulaPtr inv = parse_formula(
        "forall Y:thread. forall A:agent. forall B:agent. forall d:term. "
        "Send(Y, (A,B,hash{d}k(A,B))) => exists x:term. Gen(Y,x)",
        p1);
    Bounds b = ctx.b({1, 10, 4});
    SemanticsConfig off = ctx.c({});
    off.precedence_rule = false;
    SemanticsConfig on = ctx.c({});
    on.precedence_rule = true;
    auto v1_off = check_invariant_honesty_mode(p1, inv, b, off);
    auto v2_off = check_invariant_honesty_mode(p2, inv, b, off);
    auto v1_on = check_invariant_honesty_mode(p1, inv, b, on);
    auto v2_on = check_invariant_honesty_mode(p2, inv, b, on);
    bool equal_off = outcome_multiset(v1_off) == outcome_multiset(v2_off);
    bool differ_on = outcome_multiset(v1_on) != outcome_multiset(v2_on);
    rep.as_expected = equal_off && differ_on;
    story << "Per-basic-sequence checking sees a role only as a bag of sequences: "
             "reordering them cannot change any verdict, so an order-sensitive "
             "invariant provable for one order is forced onto every order.\n";
    story << "precedence off: verdict multisets "
          << (equal_off ? "identical across the permutation\n" : "differ (unexpected)\n");
    story << "precedence on:  verdict multisets "
          << (differ_on ? "differ across the permutation\n" : "identical (unexpected)\n");
    rep.honesty = v1_off;
    for (const auto& hv : v2_off) rep.honesty.push_back(hv);
  } else {
    throw std::invalid_argument("unknown reproduction case: " + case_id);
  }

  rep.narrative = story.str();
  return rep;
}

// ── rendering ─────────────────────────────────────────────────────────────

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json config_json(const SemanticsConfig& c) {
  ordered_json j;
  j["typed"] = c.typed;
  j["dh_theory"] = c.dh_theory;
  j["keys"] = key_scheme_name(c.keys);
  j["sig_reveals_payload"] = c.sig_reveals_payload;
  j["precedence_rule"] = c.precedence_rule;
  return j;
}

ordered_json bounds_json(const Bounds& b) {
  ordered_json j;
  j["max_threads_per_role"] = b.max_threads_per_role;
  j["max_run_length"] = b.max_run_length;
  j["max_intruder_depth"] = b.max_intruder_depth;
  return j;
}

std::vector<std::string> trace_lines(const Run& r) {
  std::vector<std::string> lines;
  std::istringstream is(r.trace());
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

ordered_json witness_json(const CheckWitness& w) {
  ordered_json j;
  j["instance"] = w.instance;
  ordered_json bindings = ordered_json::array();
  for (const auto& [k, v] : w.bindings) {
    ordered_json b;
    b["var"] = k;
    b["value"] = v;
    bindings.push_back(b);
  }
  j["bindings"] = bindings;
  j["events"] = w.events;
  j["trace"] = trace_lines(w.run);
  return j;
}

ordered_json verdict_json_obj(const Verdict& v, bool with_time) {
  ordered_json j;
  j["subject"] = v.subject;
  j["outcome"] = outcome_name(v.outcome);
  j["config"] = config_json(v.config);
  j["bounds"] = bounds_json(v.bounds);
  ordered_json stats;
  stats["runs_explored"] = v.stats.runs_explored;
  stats["depth_exhausted"] = v.stats.depth_exhausted;
  stats["receives_total"] = v.stats.receives_total;
  stats["receives_intruder_composed"] = v.stats.receives_intruder_composed;
  j["stats"] = stats;
  if (!v.note.empty()) j["note"] = v.note;
  if (v.witness) j["witness"] = witness_json(*v.witness);
  if (with_time) j["time_ms"] = v.stats.millis;
  return j;
}

}  // namespace

std::string verdict_to_json(const Verdict& v) {
  return verdict_json_obj(v, true).dump(2) + "\n";
}

std::string verdict_to_text(const Verdict& v) {
  std::ostringstream os;
  os << v.subject << ": " << outcome_name(v.outcome) << "\n";
  os << "  config: typed=" << (v.config.typed ? "on" : "off")
     << " dh-theory=" << (v.config.dh_theory ? "on" : "off")
     << " keys=" << key_scheme_name(v.config.keys)
     << " precedence=" << (v.config.precedence_rule ? "on" : "off") << "\n";
  os << "  bounds: threads=" << v.bounds.max_threads_per_role
     << " length=" << v.bounds.max_run_length
     << " depth=" << v.bounds.max_intruder_depth << "\n";
  os << "  runs explored: " << v.stats.runs_explored
     << (v.stats.depth_exhausted ? " (intruder depth bound was hit)" : "") << "\n";
  if (!v.note.empty()) os << "  note: " << v.note << "\n";
  if (v.witness) {
    os << "  failing instance: " << v.witness->instance << "\n";
    for (const auto& [var, val] : v.witness->bindings)
      os << "    " << var << " = " << val << "\n";
    os << "  witness run:\n";
    for (const auto& line : trace_lines(v.witness->run)) os << "    " << line << "\n";
  }
  os << "  time: " << v.stats.millis << " ms\n";
  return os.str();
}

std::string repro_to_json(const ReproReport& r) {
  ordered_json j;
  j["case"] = r.case_id;
  j["as_expected"] = r.as_expected;
  std::vector<std::string> lines;
  std::istringstream is(r.narrative);
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  j["narrative"] = lines;
  ordered_json vs = ordered_json::array();
  for (const auto& v : r.verdicts) vs.push_back(verdict_json_obj(v, false));
  j["verdicts"] = vs;
  if (!r.honesty.empty()) {
    ordered_json hs = ordered_json::array();
    for (const auto& h : r.honesty) {
      ordered_json hj;
      hj["role"] = h.role;
      hj["bs_index"] = h.bs_index;
      hj["outcome"] = outcome_name(h.outcome);
      hs.push_back(hj);
    }
    j["honesty"] = hs;
  }
  if (r.witness_run) j["witness_trace"] = trace_lines(*r.witness_run);
  return j.dump(2) + "\n";
}

std::string repro_to_text(const ReproReport& r) {
  std::ostringstream os;
  os << "case " << r.case_id << ": " << (r.as_expected ? "as expected" : "UNEXPECTED")
     << "\n\n";
  os << r.narrative << "\n";
  for (const auto& v : r.verdicts) os << verdict_to_text(v) << "\n";
  for (const auto& h : r.honesty)
    os << "  " << h.role << " bs" << h.bs_index << ": " << outcome_name(h.outcome) << "\n";
  if (r.witness_run) {
    os << "witness run:\n";
    for (const auto& line : trace_lines(*r.witness_run)) os << "  " << line << "\n";
  }
  return os.str();
}

}  // namespace pcl
