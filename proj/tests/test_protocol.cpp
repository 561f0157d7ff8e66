#include "pcl/protocol.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
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

const char* kMini = R"(
protocol Mini
setup { honest A B; }
role Init(X, Y) {
  new m:nonce; send X,Y,m;
  receive Y,X,(y:nonce, s:sigval);
  verify s,(y,m,X),Y;
  r := sign (y,m,Y),X;  send X,Y,r;
}
)";

}  // namespace

TEST_CASE("parse the documented example role") {
  Protocol p = parse_protocol(kMini);
  CHECK(p.name == "Mini");
  REQUIRE(p.roles.size() == 1);
  const Role& init = p.roles[0];
  REQUIRE(init.body.size() == 6);
  CHECK(init.body[0].kind == ActionKind::New);
  CHECK(init.body[1].kind == ActionKind::Send);
  CHECK(init.body[2].kind == ActionKind::Receive);
  CHECK(init.body[3].kind == ActionKind::Verify);
  CHECK(init.body[4].kind == ActionKind::Sign);
  CHECK(init.body[5].kind == ActionKind::Send);
  // send X,Y,m wires as the flattened triple
  CHECK(to_string(init.body[1].wire()) == "(X,Y,m)");
}

TEST_CASE("cr fixture parses into the two expected roles") {
  Protocol p = load("cr.pcl");
  REQUIRE(p.roles.size() == 2);
  const Role* init = p.find_role("Init");
  const Role* resp = p.find_role("Resp");
  REQUIRE(init != nullptr);
  REQUIRE(resp != nullptr);
  CHECK(init->body.size() == 6);
  CHECK(resp->body.size() == 4);
  CHECK(resp->body[0].kind == ActionKind::Receive);
  CHECK(resp->body[1].kind == ActionKind::New);
  CHECK(resp->body[2].kind == ActionKind::Sign);
  CHECK(resp->body[3].kind == ActionKind::Send);
}

TEST_CASE("degenerate and invalid inputs") {
  CHECK_THROWS_AS(parse_protocol(""), ParseError);
  try {
    parse_protocol("");
  } catch (const ParseError& e) {
    CHECK(e.line == 1);
    CHECK(e.col == 1);
  }

  // Variable used before binding is a diagnosed semantic problem naming x.
  const char* bad = R"(
protocol Bad
setup { honest A B; }
role R(X, Y) { send X,Y,x; }
)";
  bool threw = false;
  try {
    parse_protocol(bad);
  } catch (const std::exception& e) {
    threw = true;
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
  CHECK(threw);

  const char* dup = R"(
protocol Dup
setup { honest A; }
role R(X) { new m:nonce; send m; }
role R(X) { new m:nonce; send m; }
)";
  CHECK_THROWS_AS(parse_protocol(dup), SemanticError);

  const char* badsort = R"(
protocol S
setup { honest A; }
role R(X) { new m:oddity; send m; }
)";
  CHECK_THROWS_AS(parse_protocol(badsort), ParseError);
}

TEST_CASE("basic sequence decomposition") {
  Protocol p = load("cr.pcl");
  const Role* init = p.find_role("Init");
  auto bss = basic_sequences(*init);
  REQUIRE(bss.size() == 2);
  CHECK(bss[0].begin == 0);
  CHECK(bss[0].end == 2);  // new m; send
  CHECK(bss[1].begin == 2);
  CHECK(bss[1].end == 6);
  CHECK(bss[0].actions()[0].kind == ActionKind::New);
  CHECK(bss[1].actions()[0].kind == ActionKind::Receive);

  // No receives -> a single basic sequence.
  Protocol one = parse_protocol(R"(
protocol One
setup { honest A B; }
role R(X, Y) { new m:nonce; send X,Y,m; send X,Y,(m,m); }
)");
  CHECK(basic_sequences(one.roles[0]).size() == 1);

  // Q': first sequence is receive enc{m}K; send X,Y,m.
  Protocol qp = load("q_prime.pcl");
  const Role* rho = qp.find_role("Init");
  REQUIRE(rho != nullptr);
  auto qbss = basic_sequences(*rho);
  REQUIRE(qbss.size() == 2);
  CHECK(qbss[0].actions().size() == 2);
  CHECK(qbss[0].actions()[0].kind == ActionKind::Receive);
  CHECK(qbss[0].actions()[1].kind == ActionKind::Send);

  // Count = 1 + receives after position 0, over every fixture role.
  for (const char* f : {"cr.pcl", "q_prime.pcl", "hash3.pcl", "dh_min.pcl",
                        "hash_typical.pcl", "sec_shared.pcl", "perm.pcl", "cr_leak.pcl"}) {
    Protocol fp = load(f);
    for (const auto& role : fp.roles) {
      std::size_t receives_after_head = 0;
      for (std::size_t i = 1; i < role.body.size(); ++i)
        if (role.body[i].kind == ActionKind::Receive) ++receives_after_head;
      CHECK(basic_sequences(role).size() == 1 + receives_after_head);
      // Concatenation of the decomposition is the role body.
      std::vector<Action> cat;
      for (const auto& bs : basic_sequences(role)) {
        auto acts = bs.actions();
        cat.insert(cat.end(), acts.begin(), acts.end());
      }
      REQUIRE(cat.size() == role.body.size());
      std::map<std::string, Sort> d1, d2;
      for (std::size_t i = 0; i < cat.size(); ++i)
        CHECK(print_action(cat[i], d1) == print_action(role.body[i], d2));
    }
  }
}

TEST_CASE("print then parse is the identity on every fixture") {
  for (const char* f : {"cr.pcl", "q_prime.pcl", "hash3.pcl", "dh_min.pcl",
                        "hash_typical.pcl", "sec_shared.pcl", "perm.pcl", "cr_leak.pcl"}) {
    Protocol p = load(f);
    std::string printed = print_protocol(p);
    Protocol back = parse_protocol(printed);
    CHECK(print_protocol(back) == printed);
    CHECK(back.name == p.name);
    CHECK(back.roles.size() == p.roles.size());
  }
}

TEST_CASE("permute basic sequences") {
  Protocol p = load("perm.pcl");
  const Role* chain = p.find_role("Chain");
  REQUIRE(chain != nullptr);
  REQUIRE(basic_sequences(*chain).size() == 3);

  Protocol p2 = permute_basic_sequences(p, "Chain", {3, 2, 1});
  const Role* chain2 = p2.find_role("Chain");
  auto bss2 = basic_sequences(*chain2);
  REQUIRE(bss2.size() == 3);
  CHECK(chain2->body[0].kind == ActionKind::Receive);  // old bs3 head
  CHECK(chain2->body.back().kind == ActionKind::Send); // old bs1 tail

  // Identity permutation reproduces the protocol.
  Protocol same = permute_basic_sequences(p, "Chain", {1, 2, 3});
  CHECK(print_protocol(same) == print_protocol(p));

  CHECK_THROWS_AS(permute_basic_sequences(p, "Chain", {1, 1, 2}), SemanticError);
  CHECK_THROWS_AS(permute_basic_sequences(p, "Chain", {2, 1}), SemanticError);

  // A sequence that consumes a variable bound elsewhere cannot move first.
  Protocol crossing = parse_protocol(R"(
protocol Crossing
setup { honest A B; }
role R(X, Y) {
  new m:nonce; send X,Y,m;
  receive Y,X,c:nonce; send X,Y,(m,c);
}
)");
  CHECK_THROWS_AS(permute_basic_sequences(crossing, "R", {2, 1}), SemanticError);
}
