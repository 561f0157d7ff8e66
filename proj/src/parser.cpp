// Recursive-descent parsers for the protocol DSL, the shared term syntax
// and the formula DSL. One token of lookahead everywhere; constructor
// heads (enc/sig/hash/g/h/pk/sk/k) are only reserved when followed by
// their opening bracket, so they remain usable as plain identifiers.

#include "pcl/parser.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace pcl {

namespace {

enum class Tok : std::uint8_t {
  Ident, LParen, RParen, LBrace, RBrace, LBracket, RBracket,
  Comma, Semi, Colon, Assign, Dot, Amp, Pipe, Arrow, Tilde,
  Less, EqSign, NotEq, At, Underscore, End,
};

struct Token {
  Tok kind;
  std::string text;
  int line, col;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return cur_; }
  Token take() {
    Token t = cur_;
    advance();
    return t;
  }

 private:
  void advance() {
    skip_ws();
    cur_.line = line_;
    cur_.col = col_;
    if (pos_ >= src_.size()) {
      cur_ = {Tok::End, "", line_, col_};
      return;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        bump();
      cur_ = {Tok::Ident, src_.substr(start, pos_ - start), cur_.line, cur_.col};
      return;
    }
    switch (c) {
      case '(': single(Tok::LParen); return;
      case ')': single(Tok::RParen); return;
      case '{': single(Tok::LBrace); return;
      case '}': single(Tok::RBrace); return;
      case '[': single(Tok::LBracket); return;
      case ']': single(Tok::RBracket); return;
      case ',': single(Tok::Comma); return;
      case ';': single(Tok::Semi); return;
      case '.': single(Tok::Dot); return;
      case '&': single(Tok::Amp); return;
      case '|': single(Tok::Pipe); return;
      case '~': single(Tok::Tilde); return;
      case '<': single(Tok::Less); return;
      case '@': single(Tok::At); return;
      case ':':
        bump();
        if (pos_ < src_.size() && src_[pos_] == '=') {
          bump();
          cur_ = {Tok::Assign, ":=", cur_.line, cur_.col};
        } else {
          cur_ = {Tok::Colon, ":", cur_.line, cur_.col};
        }
        return;
      case '=':
        bump();
        if (pos_ < src_.size() && src_[pos_] == '>') {
          bump();
          cur_ = {Tok::Arrow, "=>", cur_.line, cur_.col};
        } else {
          cur_ = {Tok::EqSign, "=", cur_.line, cur_.col};
        }
        return;
      case '!':
        bump();
        if (pos_ < src_.size() && src_[pos_] == '=') {
          bump();
          cur_ = {Tok::NotEq, "!=", cur_.line, cur_.col};
          return;
        }
        throw ParseError(cur_.line, cur_.col, "stray '!'");
      default:
        throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
    }
  }

  void single(Tok k) {
    cur_ = {k, std::string(1, src_[pos_]), cur_.line, cur_.col};
    bump();
  }

  void skip_ws() {
    for (;;) {
      while (pos_ < src_.size() &&
             std::isspace(static_cast<unsigned char>(src_[pos_])))
        bump();
      if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') bump();
        continue;
      }
      break;
    }
  }

  void bump() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token cur_{Tok::End, "", 1, 1};
};

// Identifier resolution environment shared by the term parser.
struct Scope {
  const Setup* setup = nullptr;
  std::map<std::string, Sort> vars;       // bound role/pattern variables
  std::set<std::string> thread_vars;      // formula thread variables
  bool allow_new_vars = false;            // x:sort creates a binding here

  bool is_agent(const std::string& n) const {
    if (!setup) return false;
    for (const auto& a : setup->agents)
      if (a == n) return true;
    return false;
  }
  bool is_named_key(const std::string& n) const {
    if (!setup) return false;
    for (const auto& k : setup->keys)
      if (k.name == n) return true;
    return false;
  }
};

class Parser {
 public:
  Parser(const std::string& src) : lex_(src) {}

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(lex_.peek().line, lex_.peek().col, msg);
  }

  Token expect(Tok k, const std::string& what) {
    if (lex_.peek().kind != k) fail("expected " + what);
    return lex_.take();
  }

  bool accept(Tok k) {
    if (lex_.peek().kind != k) return false;
    lex_.take();
    return true;
  }

  bool accept_ident(const std::string& word) {
    if (lex_.peek().kind == Tok::Ident && lex_.peek().text == word) {
      lex_.take();
      return true;
    }
    return false;
  }

  std::string expect_ident(const std::string& what) {
    return expect(Tok::Ident, what).text;
  }

  bool at_ident(const std::string& word) const {
    return lex_.peek().kind == Tok::Ident && lex_.peek().text == word;
  }

  // ── terms ────────────────────────────────────────────────────────────

  TermPtr parse_term(Scope& sc) {
    const Token& t = lex_.peek();
    if (t.kind == Tok::LParen) {
      lex_.take();
      std::vector<TermPtr> parts;
      parts.push_back(parse_term(sc));
      while (accept(Tok::Comma)) parts.push_back(parse_term(sc));
      expect(Tok::RParen, "')'");
      if (parts.size() == 1) return parts[0];
      return Term::tuple(parts);
    }
    if (t.kind != Tok::Ident) fail("expected a term");
    std::string head = lex_.take().text;

    if (head == "enc" && lex_.peek().kind == Tok::LBrace) return braced(sc, head);
    if (head == "sig" && lex_.peek().kind == Tok::LBrace) return braced(sc, head);
    if (head == "hash" && lex_.peek().kind == Tok::LBrace) return braced(sc, head);
    if (head == "hat" && lex_.peek().kind == Tok::LParen) {
      lex_.take();
      std::string tv = expect_ident("a thread variable");
      expect(Tok::RParen, "')'");
      if (!sc.thread_vars.count(tv)) fail("hat() expects a thread variable in scope");
      return Term::var("^" + tv, Sort::Agent);
    }
    if (lex_.peek().kind == Tok::LParen &&
        (head == "g" || head == "h" || head == "pk" || head == "sk" || head == "k")) {
      lex_.take();
      TermPtr a = parse_term(sc);
      TermPtr b;
      if (head == "h" || head == "k") {
        expect(Tok::Comma, "','");
        b = parse_term(sc);
      }
      expect(Tok::RParen, "')'");
      if (head == "g") return Term::dh_g(a);
      if (head == "h") return Term::dh_h(a, b);
      if (head == "pk") return Term::pub_key(a);
      if (head == "sk") return Term::priv_key(a);
      return Term::shared_key(a, b);
    }

    // Plain identifier; optional :sort declares a fresh variable.
    if (lex_.peek().kind == Tok::Colon) {
      lex_.take();
      std::string sname = expect_ident("a sort name");
      auto s = sort_from_name(sname);
      if (!s) fail("unknown sort: " + sname);
      if (!sc.allow_new_vars && !sc.vars.count(head))
        fail("sort annotation outside a binding position: " + head);
      auto it = sc.vars.find(head);
      if (it != sc.vars.end() && it->second != *s)
        fail("variable " + head + " redeclared with a different sort");
      sc.vars.emplace(head, *s);
      return Term::var(head, *s);
    }
    if (auto it = sc.vars.find(head); it != sc.vars.end())
      return Term::var(head, it->second);
    if (sc.thread_vars.count(head))
      fail("thread variable " + head + " used in a term position (use hat(" + head + "))");
    if (sc.is_named_key(head)) return Term::sym_key(head);
    if (sc.is_agent(head)) return Term::agent(head);
    fail("unknown identifier: " + head);
  }

  TermPtr braced(Scope& sc, const std::string& head) {
    expect(Tok::LBrace, "'{'");
    TermPtr payload = parse_term(sc);
    expect(Tok::RBrace, "'}'");
    TermPtr key = parse_term(sc);
    if (head == "enc") return Term::enc(payload, key);
    if (head == "sig") return Term::sig(payload, key);
    return Term::hash(payload, key);
  }

  // ── protocol ─────────────────────────────────────────────────────────

  Protocol parse_protocol() {
    Protocol p;
    if (!accept_ident("protocol")) fail("expected 'protocol'");
    p.name = expect_ident("protocol name");
    if (at_ident("setup")) parse_setup(p);
    while (at_ident("role")) p.roles.push_back(parse_role(p));
    if (lex_.peek().kind != Tok::End) fail("expected 'role' or end of file");
    if (p.roles.empty()) fail("protocol has no roles");
    finalize_setup(p);
    validate(p);
    return p;
  }

  void parse_setup(Protocol& p) {
    lex_.take();  // setup
    expect(Tok::LBrace, "'{'");
    while (!accept(Tok::RBrace)) {
      if (accept_ident("honest")) {
        while (lex_.peek().kind == Tok::Ident) p.setup.honest.push_back(lex_.take().text);
        expect(Tok::Semi, "';'");
      } else if (accept_ident("agents")) {
        while (lex_.peek().kind == Tok::Ident) p.setup.agents.push_back(lex_.take().text);
        expect(Tok::Semi, "';'");
      } else if (accept_ident("key")) {
        NamedKey k;
        k.name = expect_ident("key name");
        if (accept_ident("holders"))
          while (lex_.peek().kind == Tok::Ident) k.holders.push_back(lex_.take().text);
        expect(Tok::Semi, "';'");
        p.setup.keys.push_back(std::move(k));
      } else if (accept_ident("intruder")) {
        if (!accept_ident("knows")) fail("expected 'knows'");
        pending_leaks_.push_back(capture_until_semi());
      } else {
        fail("expected a setup item (honest, agents, key, intruder knows)");
      }
    }
  }

  // Leak terms may mention agents/keys declared later in the setup block,
  // so their tokens are re-parsed after the block closes.
  std::string capture_until_semi() {
    std::ostringstream os;
    while (lex_.peek().kind != Tok::Semi) {
      if (lex_.peek().kind == Tok::End) fail("unterminated setup item");
      os << lex_.take().text << ' ';
    }
    lex_.take();
    return os.str();
  }

  void finalize_setup(Protocol& p) {
    // Agent pool = declared agents plus honest ones.
    for (const auto& h : p.setup.honest) {
      bool seen = false;
      for (const auto& a : p.setup.agents) seen = seen || a == h;
      if (!seen) p.setup.agents.insert(p.setup.agents.begin(), h);
    }
    // Keep honest agents in declaration order at the front of the pool.
    std::vector<std::string> pool = p.setup.honest;
    for (const auto& a : p.setup.agents) {
      bool seen = false;
      for (const auto& q : pool) seen = seen || q == a;
      if (!seen) pool.push_back(a);
    }
    p.setup.agents = pool;
    for (const auto& text : pending_leaks_) {
      Parser sub(text);
      Scope sc;
      sc.setup = &p.setup;
      TermPtr t = sub.parse_term(sc);
      while (sub.accept(Tok::Comma)) {
        p.setup.leaks.push_back(t);
        t = sub.parse_term(sc);
      }
      p.setup.leaks.push_back(t);
    }
    pending_leaks_.clear();
  }

  Role parse_role(const Protocol& p) {
    lex_.take();  // role
    Role r;
    r.name = expect_ident("role name");
    expect(Tok::LParen, "'('");
    Scope sc;
    sc.setup = &p.setup;
    sc.allow_new_vars = true;
    do {
      std::string prm = expect_ident("parameter name");
      r.params.push_back(Term::var(prm, Sort::Agent));
      sc.vars.emplace(prm, Sort::Agent);
    } while (accept(Tok::Comma));
    expect(Tok::RParen, "')'");
    expect(Tok::LBrace, "'{'");
    while (!accept(Tok::RBrace)) r.body.push_back(parse_stmt(sc));
    return r;
  }

  Action parse_stmt(Scope& sc) {
    Action a{};
    if (accept_ident("new")) {
      a.kind = ActionKind::New;
      std::string name = expect_ident("variable name");
      Sort s = Sort::Nonce;
      if (accept(Tok::Colon)) {
        auto parsed = sort_from_name(expect_ident("sort"));
        if (!parsed) fail("unknown sort");
        s = *parsed;
      }
      sc.vars.emplace(name, s);
      a.out_var = Term::var(name, s);
      expect(Tok::Semi, "';'");
      return a;
    }
    if (at_ident("send") || at_ident("receive")) {
      a.kind = lex_.take().text == "send" ? ActionKind::Send : ActionKind::Receive;
      std::vector<TermPtr> parts;
      parts.push_back(parse_term(sc));
      while (accept(Tok::Comma)) parts.push_back(parse_term(sc));
      expect(Tok::Semi, "';'");
      if (parts.size() == 1) {
        a.payload = parts[0];
      } else if (parts.size() >= 3) {
        a.from = parts[0];
        a.to = parts[1];
        if (parts.size() == 3)
          a.payload = parts[2];
        else
          a.payload = Term::tuple(std::span<const TermPtr>(parts).subspan(2));
      } else {
        fail("send/receive takes one message term, or source, destination and payload");
      }
      return a;
    }
    if (accept_ident("verify")) {
      a.kind = ActionKind::Verify;
      a.sig_term = parse_term(sc);
      expect(Tok::Comma, "','");
      a.payload = parse_term(sc);
      expect(Tok::Comma, "','");
      a.key = parse_term(sc);
      expect(Tok::Semi, "';'");
      return a;
    }
    // out[:sort] := enc|dec|sign payload, key
    std::string out = expect_ident("an action");
    Sort out_sort = Sort::Message;
    bool annotated = false;
    if (accept(Tok::Colon)) {
      auto parsed = sort_from_name(expect_ident("sort"));
      if (!parsed) fail("unknown sort");
      out_sort = *parsed;
      annotated = true;
    }
    expect(Tok::Assign, "':='");
    std::string op = expect_ident("enc, dec or sign");
    if (op == "enc")
      a.kind = ActionKind::Enc;
    else if (op == "dec")
      a.kind = ActionKind::Dec;
    else if (op == "sign")
      a.kind = ActionKind::Sign;
    else
      fail("unknown action: " + op);
    a.payload = parse_term(sc);
    expect(Tok::Comma, "','");
    a.key = parse_term(sc);
    expect(Tok::Semi, "';'");
    if (!annotated) {
      if (a.kind == ActionKind::Enc) out_sort = Sort::Ciphertext;
      if (a.kind == ActionKind::Sign) out_sort = Sort::SigVal;
    }
    sc.vars.emplace(out, out_sort);
    a.out_var = Term::var(out, out_sort);
    return a;
  }

  // ── formulas ─────────────────────────────────────────────────────────

  FormulaPtr parse_formula(Scope& sc) {
    if (at_ident("forall") || at_ident("exists")) {
      bool univ = lex_.take().text == "forall";
      std::string name = expect_ident("variable name");
      expect(Tok::Colon, "':'");
      std::string kind = expect_ident("thread, term or agent");
      TermPtr restr;
      FormulaKind fk;
      Sort tsort = Sort::Message;
      if (kind == "thread") {
        fk = univ ? FormulaKind::ForallThread : FormulaKind::ExistsThread;
        if (accept(Tok::At)) restr = parse_term(sc);
        sc.thread_vars.insert(name);
      } else if (kind == "agent") {
        fk = univ ? FormulaKind::ForallAgent : FormulaKind::ExistsAgent;
        sc.vars.emplace(name, Sort::Agent);
      } else if (kind == "term") {
        fk = univ ? FormulaKind::ForallTerm : FormulaKind::ExistsTerm;
        sc.vars.emplace(name, Sort::Message);
      } else if (auto s = sort_from_name(kind)) {
        // Sorted term quantifier: domain restricted to that sort.
        fk = univ ? FormulaKind::ForallTerm : FormulaKind::ExistsTerm;
        tsort = *s;
        sc.vars.emplace(name, *s);
      } else {
        fail("quantifier kind must be thread, agent, term or a sort name");
      }
      expect(Tok::Dot, "'.'");
      return Formula::quant(fk, name, parse_formula(sc), restr, tsort);
    }
    return parse_implies(sc);
  }

  FormulaPtr parse_implies(Scope& sc) {
    FormulaPtr lhs = parse_or(sc);
    if (accept(Tok::Arrow)) return Formula::implies(lhs, parse_formula(sc));
    if (lex_.peek().kind == Tok::LBracket) return parse_modal(sc, lhs);
    return lhs;
  }

  FormulaPtr parse_modal(Scope& sc, FormulaPtr pre) {
    expect(Tok::LBracket, "'['");
    Scope inner = sc;
    inner.allow_new_vars = true;
    std::vector<Action> prog;
    while (lex_.peek().kind != Tok::RBracket) prog.push_back(parse_stmt(inner));
    expect(Tok::RBracket, "']'");
    // "]_X" lexes the subscript as one identifier starting with '_'.
    Token sub = expect(Tok::Ident, "'_<thread variable>'");
    if (sub.text.size() < 2 || sub.text[0] != '_')
      fail("expected '_<thread variable>' after ']'");
    std::string tv = sub.text.substr(1);
    inner.thread_vars.insert(tv);
    FormulaPtr post = parse_formula(inner);
    return Formula::modal(std::move(pre), std::move(prog), tv, std::move(post));
  }

  FormulaPtr parse_or(Scope& sc) {
    std::vector<FormulaPtr> kids{parse_and(sc)};
    while (accept(Tok::Pipe)) kids.push_back(parse_and(sc));
    return kids.size() == 1 ? kids[0] : Formula::disj(std::move(kids));
  }

  FormulaPtr parse_and(Scope& sc) {
    std::vector<FormulaPtr> kids{parse_unary(sc)};
    while (accept(Tok::Amp)) kids.push_back(parse_unary(sc));
    return kids.size() == 1 ? kids[0] : Formula::conj(std::move(kids));
  }

  FormulaPtr parse_unary(Scope& sc) {
    if (accept(Tok::Tilde)) return Formula::negate(parse_unary(sc));
    if (lex_.peek().kind == Tok::LParen) {
      lex_.take();
      FormulaPtr f = parse_formula(sc);
      expect(Tok::RParen, "')'");
      return f;
    }
    if (accept_ident("true")) return Formula::truth();
    if (accept_ident("false")) return Formula::falsity();
    return parse_atomic(sc);
  }

  // Predicate application, equality, or an ordering a < b.
  FormulaPtr parse_atomic(Scope& sc) {
    Atom first = parse_atom_or_eq(sc);
    if (lex_.peek().kind == Tok::Less) {
      lex_.take();
      Atom second = parse_atom_or_eq(sc);
      return Formula::order(std::move(first), std::move(second));
    }
    if (first.kind == AtomKind::Eq && first.thread == "!=") {
      first.thread.clear();
      return Formula::negate(Formula::make_atom(std::move(first)));
    }
    return Formula::make_atom(std::move(first));
  }

  Atom parse_atom_or_eq(Scope& sc) {
    static const std::map<std::string, AtomKind> preds = {
        {"Send", AtomKind::Send},       {"Receive", AtomKind::Receive},
        {"Gen", AtomKind::Gen},         {"Encrypt", AtomKind::Encrypt},
        {"Decrypt", AtomKind::Decrypt}, {"Verify", AtomKind::Verify},
        {"Has", AtomKind::Has},         {"Fresh", AtomKind::Fresh},
        {"Honest", AtomKind::Honest},   {"Contains", AtomKind::Contains},
        {"ComputesDh", AtomKind::ComputesDh},
        {"ComputesHash", AtomKind::ComputesHash},
    };
    if (lex_.peek().kind == Tok::Ident) {
      auto it = preds.find(lex_.peek().text);
      if (it != preds.end()) {
        lex_.take();
        Atom a{};
        a.kind = it->second;
        expect(Tok::LParen, "'('");
        if (a.kind == AtomKind::Honest) {
          a.t1 = parse_term(sc);
        } else if (a.kind == AtomKind::Contains) {
          a.t1 = parse_term(sc);
          expect(Tok::Comma, "','");
          a.t2 = parse_term(sc);
        } else {
          std::string tv = expect_ident("thread variable");
          if (!sc.thread_vars.count(tv)) fail("unknown thread variable: " + tv);
          a.thread = tv;
          expect(Tok::Comma, "','");
          a.t1 = parse_term(sc);
        }
        expect(Tok::RParen, "')'");
        return a;
      }
    }
    // term = term / term != term
    TermPtr lhs = parse_term(sc);
    if (accept(Tok::EqSign)) {
      Atom a{};
      a.kind = AtomKind::Eq;
      a.t1 = lhs;
      a.t2 = parse_term(sc);
      return a;
    }
    if (accept(Tok::NotEq)) {
      // Desugared by the caller via Formula::negate when wrapped; the atom
      // itself stores equality, so flag it with a marker the caller checks.
      Atom a{};
      a.kind = AtomKind::Eq;
      a.t1 = lhs;
      a.t2 = parse_term(sc);
      a.thread = "!=";
      return a;
    }
    fail("expected a predicate or comparison");
  }

  Lexer lex_;
  std::vector<std::string> pending_leaks_;
};

}  // namespace

Protocol parse_protocol(const std::string& text) {
  Parser p(text);
  return p.parse_protocol();
}

Protocol parse_protocol_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_protocol(buf.str());
}

TermPtr parse_term(const std::string& text, const Protocol& context) {
  Parser p(text);
  Scope sc;
  sc.setup = &context.setup;
  sc.allow_new_vars = true;
  return p.parse_term(sc);
}

FormulaPtr parse_formula(const std::string& text, const Protocol& context) {
  Parser p(text);
  Scope sc;
  sc.setup = &context.setup;
  return p.parse_formula(sc);
}

}  // namespace pcl
