#include "pcl/term.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <sstream>
#include <stdexcept>

namespace pcl {

const char* key_scheme_name(KeyScheme s) {
  switch (s) {
    case KeyScheme::Split: return "split";
    case KeyScheme::SymmetricOnly: return "sym";
    case KeyScheme::AsymmetricOnly: return "asym";
  }
  return "?";
}

KeyScheme key_scheme_from_name(const std::string& s) {
  if (s == "split") return KeyScheme::Split;
  if (s == "sym" || s == "symmetric") return KeyScheme::SymmetricOnly;
  if (s == "asym" || s == "asymmetric") return KeyScheme::AsymmetricOnly;
  throw std::invalid_argument("unknown key scheme: " + s);
}

const char* sort_name(Sort s) {
  switch (s) {
    case Sort::Agent: return "agent";
    case Sort::Nonce: return "nonce";
    case Sort::SymKey: return "symkey";
    case Sort::AsymKey: return "asymkey";
    case Sort::DhPriv: return "dhpriv";
    case Sort::DhPub: return "dhpub";
    case Sort::DhShared: return "dhshared";
    case Sort::HashVal: return "hashval";
    case Sort::SigVal: return "sigval";
    case Sort::Ciphertext: return "ciphertext";
    case Sort::Tuple: return "tuple";
    case Sort::Message: return "message";
  }
  return "?";
}

std::optional<Sort> sort_from_name(const std::string& name) {
  static const std::array<Sort, 12> all = {
      Sort::Agent,   Sort::Nonce,    Sort::SymKey,  Sort::AsymKey,
      Sort::DhPriv,  Sort::DhPub,    Sort::DhShared, Sort::HashVal,
      Sort::SigVal,  Sort::Ciphertext, Sort::Tuple,  Sort::Message};
  for (Sort s : all)
    if (name == sort_name(s)) return s;
  return std::nullopt;
}

namespace {

inline std::size_t hash_combine(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

bool is_agentish(const TermPtr& t) {
  return t->kind() == TermKind::Agent ||
         (t->kind() == TermKind::Var && t->tag_sort() == Sort::Agent);
}

bool is_keyish(const TermPtr& t) {
  switch (t->kind()) {
    case TermKind::SymKey:
    case TermKind::SharedKey:
    case TermKind::PubKey:
    case TermKind::PrivKey:
    case TermKind::Agent:
      return true;
    case TermKind::Var: {
      // Message-sorted variables are allowed in key positions so generic
      // key patterns can be written; ground terms stay key-restricted.
      Sort s = t->tag_sort();
      return s == Sort::SymKey || s == Sort::AsymKey || s == Sort::Agent ||
             s == Sort::Message;
    }
    default:
      return false;
  }
}

}  // namespace

Term::Term(TermKind k, std::string name, int origin, Sort sort, TermPtr l, TermPtr r)
    : kind_(k),
      sort_(sort),
      origin_(origin),
      ground_(k != TermKind::Var),
      height_(0),
      size_(1),
      hash_(0),
      name_(std::move(name)),
      left_(std::move(l)),
      right_(std::move(r)) {
  std::size_t h = hash_combine(0x51ed270b, static_cast<std::size_t>(k));
  h = hash_combine(h, std::hash<std::string>{}(name_));
  h = hash_combine(h, static_cast<std::size_t>(origin_ + 1));
  h = hash_combine(h, static_cast<std::size_t>(sort_));
  if (left_) {
    ground_ = ground_ && left_->ground_;
    height_ = std::max(height_, left_->height_ + 1);
    size_ += left_->size_;
    h = hash_combine(h, left_->hash_);
  }
  if (right_) {
    ground_ = ground_ && right_->ground_;
    height_ = std::max(height_, right_->height_ + 1);
    size_ += right_->size_;
    h = hash_combine(h, right_->hash_);
  }
  hash_ = h;
}

TermPtr Term::make(TermKind k, std::string name, int origin, Sort sort,
                   TermPtr l, TermPtr r) {
  return TermPtr(new Term(k, std::move(name), origin, sort, std::move(l), std::move(r)));
}

TermPtr Term::agent(std::string name) {
  return make(TermKind::Agent, std::move(name), -1, Sort::Agent, nullptr, nullptr);
}

TermPtr Term::nonce(std::string name, int origin, Sort sort) {
  return make(TermKind::Nonce, std::move(name), origin, sort, nullptr, nullptr);
}

TermPtr Term::var(std::string name, Sort sort) {
  return make(TermKind::Var, std::move(name), -1, sort, nullptr, nullptr);
}

TermPtr Term::sym_key(std::string name) {
  return make(TermKind::SymKey, std::move(name), -1, Sort::SymKey, nullptr, nullptr);
}

TermPtr Term::shared_key(TermPtr a, TermPtr b) {
  if (!is_agentish(a) || !is_agentish(b))
    throw TermFormError("shared key arguments must be agents");
  // Unordered pair: canonicalize ground agent names.
  if (a->kind() == TermKind::Agent && b->kind() == TermKind::Agent &&
      b->name() < a->name())
    std::swap(a, b);
  return make(TermKind::SharedKey, "", -1, Sort::SymKey, std::move(a), std::move(b));
}

TermPtr Term::pub_key(TermPtr agent) {
  if (!is_agentish(agent)) throw TermFormError("pk() expects an agent");
  return make(TermKind::PubKey, "", -1, Sort::AsymKey, std::move(agent), nullptr);
}

TermPtr Term::priv_key(TermPtr agent) {
  if (!is_agentish(agent)) throw TermFormError("sk() expects an agent");
  return make(TermKind::PrivKey, "", -1, Sort::AsymKey, std::move(agent), nullptr);
}

TermPtr Term::pair(TermPtr first, TermPtr rest) {
  return make(TermKind::Pair, "", -1, Sort::Tuple, std::move(first), std::move(rest));
}

TermPtr Term::tuple(std::span<const TermPtr> parts) {
  if (parts.size() < 2) throw std::invalid_argument("tuple needs arity >= 2");
  TermPtr acc = parts.back();
  for (std::size_t i = parts.size() - 1; i-- > 0;) acc = pair(parts[i], acc);
  return acc;
}

TermPtr Term::enc(TermPtr payload, TermPtr key) {
  if (!is_keyish(key))
    throw TermFormError("enc key position must hold a key or agent");
  return make(TermKind::Enc, "", -1, Sort::Ciphertext, std::move(payload), std::move(key));
}

TermPtr Term::sig(TermPtr payload, TermPtr signer) {
  if (!is_keyish(signer))
    throw TermFormError("sig signer position must hold a key or agent");
  return make(TermKind::Sig, "", -1, Sort::SigVal, std::move(payload), std::move(signer));
}

TermPtr Term::hash(TermPtr payload, TermPtr key) {
  if (!is_keyish(key))
    throw TermFormError("hash key position must hold a key or agent");
  return make(TermKind::Hash, "", -1, Sort::HashVal, std::move(payload), std::move(key));
}

TermPtr Term::dh_g(TermPtr exponent) {
  return make(TermKind::DhG, "", -1, Sort::DhPub, std::move(exponent), nullptr);
}

TermPtr Term::dh_h(TermPtr a, TermPtr b) {
  return make(TermKind::DhH, "", -1, Sort::DhShared, std::move(a), std::move(b));
}

Sort Term::sort() const {
  switch (kind_) {
    case TermKind::Agent: return Sort::Agent;
    case TermKind::Nonce: return sort_;
    case TermKind::Var: return sort_;
    case TermKind::SymKey: return Sort::SymKey;
    case TermKind::SharedKey: return Sort::SymKey;
    case TermKind::PubKey: return Sort::AsymKey;
    case TermKind::PrivKey: return Sort::AsymKey;
    case TermKind::Pair: return Sort::Tuple;
    case TermKind::Enc: return Sort::Ciphertext;
    case TermKind::Sig: return Sort::SigVal;
    case TermKind::Hash: return Sort::HashVal;
    case TermKind::DhG: return Sort::DhPub;
    case TermKind::DhH: return Sort::DhShared;
  }
  return Sort::Message;
}

bool equal(const TermPtr& a, const TermPtr& b) {
  if (a.get() == b.get()) return true;
  if (!a || !b) return false;
  if (a->hash() != b->hash()) return false;
  if (a->kind() != b->kind() || a->name() != b->name() ||
      a->origin() != b->origin() || a->tag_sort() != b->tag_sort())
    return false;
  return equal(a->left(), b->left()) && equal(a->right(), b->right());
}

int compare(const TermPtr& a, const TermPtr& b) {
  if (a.get() == b.get()) return 0;
  if (!a) return b ? -1 : 0;
  if (!b) return 1;
  if (a->kind() != b->kind())
    return static_cast<int>(a->kind()) < static_cast<int>(b->kind()) ? -1 : 1;
  if (int c = compare(a->left(), b->left()); c != 0) return c;
  if (int c = compare(a->right(), b->right()); c != 0) return c;
  if (int c = a->name().compare(b->name()); c != 0) return c < 0 ? -1 : 1;
  if (a->origin() != b->origin()) return a->origin() < b->origin() ? -1 : 1;
  if (a->tag_sort() != b->tag_sort())
    return static_cast<int>(a->tag_sort()) < static_cast<int>(b->tag_sort()) ? -1 : 1;
  return 0;
}

namespace {

TermPtr rebuild(const TermPtr& t, const TermPtr& l, const TermPtr& r) {
  if (t->left().get() == l.get() && t->right().get() == r.get()) return t;
  switch (t->kind()) {
    case TermKind::SharedKey: return Term::shared_key(l, r);
    case TermKind::PubKey: return Term::pub_key(l);
    case TermKind::PrivKey: return Term::priv_key(l);
    case TermKind::Pair: return Term::pair(l, r);
    case TermKind::Enc: return Term::enc(l, r);
    case TermKind::Sig: return Term::sig(l, r);
    case TermKind::Hash: return Term::hash(l, r);
    case TermKind::DhG: return Term::dh_g(l);
    case TermKind::DhH: return Term::dh_h(l, r);
    default: return t;
  }
}

}  // namespace

TermPtr normalize_dh(const TermPtr& t, const SemanticsConfig& cfg) {
  if (!t || !t->left()) return t;
  TermPtr l = normalize_dh(t->left(), cfg);
  TermPtr r = normalize_dh(t->right(), cfg);
  if (cfg.dh_theory && t->kind() == TermKind::DhH && compare(r, l) < 0) std::swap(l, r);
  return rebuild(t, l, r);
}

bool equal_mod_theory(const TermPtr& a, const TermPtr& b, const SemanticsConfig& cfg) {
  if (equal(a, b)) return true;
  if (!cfg.dh_theory) return false;
  return equal(normalize_dh(a, cfg), normalize_dh(b, cfg));
}

namespace {

bool contains_rec(const TermPtr& outer, const TermPtr& inner) {
  if (equal(outer, inner)) return true;
  if (outer->left() && contains_rec(outer->left(), inner)) return true;
  if (outer->right() && contains_rec(outer->right(), inner)) return true;
  return false;
}

}  // namespace

bool contains(const TermPtr& outer, const TermPtr& inner, const SemanticsConfig& cfg) {
  if (!outer->ground() || !inner->ground())
    throw std::invalid_argument("contains expects ground terms");
  if (!cfg.dh_theory) return contains_rec(outer, inner);
  return contains_rec(normalize_dh(outer, cfg), normalize_dh(inner, cfg));
}

namespace {

// Worker shared by match_term and match_term_all. Emits every extension of
// `acc` unifying pattern with ground; stops early when first_only.
struct Matcher {
  const SemanticsConfig& cfg;
  bool first_only;
  std::vector<Subst> out;

  bool step(const TermPtr& p, const TermPtr& g, Subst acc) {
    if (p->kind() == TermKind::Var) {
      auto it = acc.find(p->name());
      if (it != acc.end()) {
        if (!equal(it->second, g)) return false;
        return emit(std::move(acc));
      }
      if (cfg.typed && !sort_leq(g->sort(), p->tag_sort())) return false;
      acc.emplace(p->name(), g);
      return emit(std::move(acc));
    }
    if (p->kind() != g->kind()) return false;
    if (!p->left()) {  // atom
      if (p->name() != g->name() || p->origin() != g->origin() ||
          p->tag_sort() != g->tag_sort())
        return false;
      return emit(std::move(acc));
    }
    const bool unordered =
        (p->kind() == TermKind::DhH && cfg.dh_theory) || p->kind() == TermKind::SharedKey;
    bool done = step_children(p->left(), p->right(), g, acc);
    if (done && first_only) return true;
    if (unordered && !equal(g->left(), g->right())) {
      // Second orientation; canonical order was tried above.
      bool d2 = step_children(p->left(), p->right(), g, acc, /*swap=*/true, g);
      done = done || d2;
    }
    return done;
  }

  bool step_children(const TermPtr& pl, const TermPtr& pr, const TermPtr& g,
                     const Subst& acc, bool swap = false, const TermPtr& orig = nullptr) {
    const TermPtr& gl = swap ? orig->right() : g->left();
    const TermPtr& gr = swap ? orig->left() : g->right();
    if (static_cast<bool>(pr) != static_cast<bool>(gr)) return false;
    if (!pr) return step(pl, gl, acc);
    // Enumerate left matches, continue into right for each.
    Matcher lm{cfg, false, {}};
    lm.step(pl, gl, acc);
    bool any = false;
    for (auto& s : lm.out) {
      if (step(pr, gr, std::move(s))) {
        any = true;
        if (first_only) return true;
      }
    }
    return any;
  }

  bool emit(Subst s) {
    out.push_back(std::move(s));
    return true;
  }
};

}  // namespace

std::optional<Subst> match_term(const TermPtr& pattern, const TermPtr& ground_term,
                                const Subst& partial, const SemanticsConfig& cfg) {
  if (!ground_term->ground())
    throw std::invalid_argument("match_term expects a ground second argument");
  Matcher m{cfg, true, {}};
  m.step(pattern, normalize_dh(ground_term, cfg), partial);
  if (m.out.empty()) return std::nullopt;
  return m.out.front();
}

std::vector<Subst> match_term_all(const TermPtr& pattern, const TermPtr& ground_term,
                                  const Subst& partial, const SemanticsConfig& cfg) {
  if (!ground_term->ground())
    throw std::invalid_argument("match_term expects a ground second argument");
  Matcher m{cfg, false, {}};
  m.step(pattern, normalize_dh(ground_term, cfg), partial);
  // Orientation retries can produce duplicate substitutions.
  std::vector<Subst> uniq;
  for (auto& s : m.out) {
    bool seen = false;
    for (auto& u : uniq) {
      if (u.size() != s.size()) continue;
      bool same = true;
      for (auto it1 = u.begin(), it2 = s.begin(); it1 != u.end(); ++it1, ++it2)
        if (it1->first != it2->first || !equal(it1->second, it2->second)) {
          same = false;
          break;
        }
      if (same) {
        seen = true;
        break;
      }
    }
    if (!seen) uniq.push_back(std::move(s));
  }
  return uniq;
}

namespace {

TermPtr apply_rec(const Subst& subst, const TermPtr& t, bool require_ground) {
  if (t->kind() == TermKind::Var) {
    auto it = subst.find(t->name());
    if (it != subst.end()) return it->second;
    if (require_ground)
      throw std::invalid_argument("unbound variable: " + t->name());
    return t;
  }
  if (!t->left()) return t;
  TermPtr l = apply_rec(subst, t->left(), require_ground);
  TermPtr r = t->right() ? apply_rec(subst, t->right(), require_ground) : nullptr;
  return rebuild(t, l, r);
}

}  // namespace

TermPtr apply(const Subst& subst, const TermPtr& t, const SemanticsConfig& cfg,
              bool require_ground) {
  return normalize_dh(apply_rec(subst, t, require_ground), cfg);
}

void collect_subterms(const TermPtr& t, std::vector<TermPtr>& out) {
  out.push_back(t);
  if (t->left()) collect_subterms(t->left(), out);
  if (t->right()) collect_subterms(t->right(), out);
}

std::vector<TermPtr> subterms(const TermPtr& t) {
  std::vector<TermPtr> all;
  collect_subterms(t, all);
  std::sort(all.begin(), all.end(), TermLess{});
  all.erase(std::unique(all.begin(), all.end(),
                        [](const TermPtr& a, const TermPtr& b) { return equal(a, b); }),
            all.end());
  return all;
}

namespace {

void print_rec(const TermPtr& t, std::ostringstream& os,
               std::map<std::string, Sort>* declared) {
  switch (t->kind()) {
    case TermKind::Agent:
    case TermKind::Nonce:
    case TermKind::SymKey:
      os << t->name();
      return;
    case TermKind::Var:
      os << t->name();
      if (declared && !declared->count(t->name())) {
        os << ':' << sort_name(t->tag_sort());
        declared->emplace(t->name(), t->tag_sort());
      }
      return;
    case TermKind::SharedKey:
      os << "k(";
      print_rec(t->left(), os, declared);
      os << ',';
      print_rec(t->right(), os, declared);
      os << ')';
      return;
    case TermKind::PubKey:
      os << "pk(";
      print_rec(t->left(), os, declared);
      os << ')';
      return;
    case TermKind::PrivKey:
      os << "sk(";
      print_rec(t->left(), os, declared);
      os << ')';
      return;
    case TermKind::Pair: {
      os << '(';
      const Term* cur = t.get();
      while (cur->kind() == TermKind::Pair) {
        print_rec(cur->left(), os, declared);
        os << ',';
        cur = cur->right().get();
      }
      // Print the tail (shared_ptr needed for recursion).
      TermPtr tail = t;
      while (tail->kind() == TermKind::Pair) tail = tail->right();
      print_rec(tail, os, declared);
      os << ')';
      return;
    }
    case TermKind::Enc:
      os << "enc{";
      print_rec(t->left(), os, declared);
      os << '}';
      print_rec(t->right(), os, declared);
      return;
    case TermKind::Sig:
      os << "sig{";
      print_rec(t->left(), os, declared);
      os << '}';
      print_rec(t->right(), os, declared);
      return;
    case TermKind::Hash:
      os << "hash{";
      print_rec(t->left(), os, declared);
      os << '}';
      print_rec(t->right(), os, declared);
      return;
    case TermKind::DhG:
      os << "g(";
      print_rec(t->left(), os, declared);
      os << ')';
      return;
    case TermKind::DhH:
      os << "h(";
      print_rec(t->left(), os, declared);
      os << ',';
      print_rec(t->right(), os, declared);
      os << ')';
      return;
  }
}

}  // namespace

std::string to_string(const TermPtr& t) {
  std::ostringstream os;
  print_rec(t, os, nullptr);
  return os.str();
}

std::string print_pattern(const TermPtr& t, std::map<std::string, Sort>& declared) {
  std::ostringstream os;
  print_rec(t, os, &declared);
  return os.str();
}

}  // namespace pcl
