#pragma once

#include <map>
#include <set>
#include <string>

#include "ivc/contract_ast.hpp"

namespace ivc {

struct ParseOptions {
  // Instrumentation owns the "__" namespace; inputs to the instrumenter are
  // parsed with this on so fresh names can never collide.
  bool reject_reserved = false;
};

Program parse_contract(const std::string& text, const std::string& name = "contract",
                       ParseOptions opts = {});

std::string pretty_print(const Program& p);
std::string pretty_print(const CExprPtr& e);
std::string pretty_print(const Address& a);

// Well-formedness: duplicate declarations, undeclared temps, address arity,
// for-in iterator rules, call targets. parse_contract runs this itself;
// exposed separately for programmatically built programs.
void check_program(const Program& p, ParseOptions opts = {});

// Over-approximate callee sets: every call edge, transitive closure helper.
std::map<std::string, std::set<std::string>> call_graph(const Program& p);
std::set<std::string> reachable_functions(const Program& p, const std::string& entry);

bool is_reserved_name(const std::string& n);

}  // namespace ivc
