#pragma once

#include <stdexcept>
#include <string>

#include "pcl/logic.hpp"
#include "pcl/protocol.hpp"

namespace pcl {

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
};

// Parses one protocol per file. Throws ParseError (with position) on syntax
// errors and SemanticError on validation failures.
Protocol parse_protocol(const std::string& text);
Protocol parse_protocol_file(const std::string& path);

// Parses a single ground-ish term in the shared concrete syntax. Context
// resolves identifiers: agents and named keys come from the protocol.
TermPtr parse_term(const std::string& text, const Protocol& context);

// Formula DSL: Send(X,m), Has(X,h(a,b)), Honest(A), a < b, infix & | => ~,
// quantifiers "forall Y:thread." / "exists m:term." / "exists X:thread@A.",
// modal "pre [ actions ]_X post", hat(Y) for the executor of thread Y.
FormulaPtr parse_formula(const std::string& text, const Protocol& context);

}  // namespace pcl
