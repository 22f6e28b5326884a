#include <fstream>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "ivc/contract_lang.hpp"

using namespace ivc;

namespace {

std::string fixture(const std::string& name) {
  std::ifstream in(std::string(IVC_FIXTURE_DIR) + "/" + name);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Conformance walk: reject any statement or expression kind outside the
// language's productions.
void walk_conformance(const StmtList& body) {
  std::function<void(const CExprPtr&)> walk_e = [&](const CExprPtr& e) {
    switch (e->kind) {
      case CExpr::Kind::IntConst:
      case CExpr::Kind::TempRef:
      case CExpr::Kind::Sender:
      case CExpr::Kind::CallDepth: return;
      case CExpr::Kind::BinOp:
        walk_e(e->lhs);
        walk_e(e->rhs);
        return;
    }
    FAIL("unknown expression kind");
  };
  for (const auto& s : body) {
    switch (s->kind) {
      case Statement::Kind::Assign:
      case Statement::Kind::Assert:
        walk_e(s->expr);
        break;
      case Statement::Kind::Load:
        for (const auto& ix : s->addr.indices) walk_e(ix);
        break;
      case Statement::Kind::Store:
        for (const auto& ix : s->addr.indices) walk_e(ix);
        walk_e(s->expr);
        break;
      case Statement::Kind::If:
        walk_e(s->expr);
        walk_conformance(s->body);
        break;
      case Statement::Kind::ForIn:
        walk_conformance(s->body);
        break;
      case Statement::Kind::Call:
        for (const auto& a : s->args) walk_e(a);
        break;
      default:
        FAIL("unknown statement kind");
    }
  }
}

}  // namespace

TEST_CASE("parse_contract: ERC1202 vote fixture") {
  Program p = parse_contract(fixture("erc1202.mini"), "erc1202");
  CHECK(p.decls.size() == 5);  // options, isOpen, weights, weightedVoteCount, ballots
  CHECK(p.find_decl("weights")->arity == 2);
  CHECK(p.find_decl("weights")->kind == VarKind::State);
  REQUIRE(p.functions.size() == 2);
  CHECK(p.functions[0].name == "createIssue");
  CHECK(p.functions[0].is_entry);
  CHECK(p.functions[1].name == "vote");
  CHECK(p.functions[1].params == std::vector<std::string>{"issueId", "option"});
  for (const auto& f : p.functions) walk_conformance(f.body);
}

TEST_CASE("parse_contract: empty program and errors") {
  Program p = parse_contract("", "empty");
  CHECK(p.decls.empty());
  CHECK(p.functions.empty());

  CHECK_THROWS_WITH_AS(parse_contract("state a: int;\nstate a: map^1;\n", "dup"),
                       doctest::Contains("DuplicateState"), CheckError);
  CHECK_THROWS_WITH_AS(parse_contract("fn f() {}\nfn f() {}\n", "dup"),
                       doctest::Contains("DuplicateFunction"), CheckError);
  CHECK_THROWS_WITH_AS(parse_contract("fn f() { t2 = t1 + 1; }", "undecl"),
                       doctest::Contains("UndeclaredTemp"), CheckError);
  CHECK_THROWS_WITH_AS(parse_contract("state m: map^2;\nfn f(k) { t = load m[k]; }", "arity"),
                       doctest::Contains("AddressArityMismatch"), CheckError);
  CHECK_THROWS_WITH_AS(parse_contract("fn f() { call g(); }", "callee"),
                       doctest::Contains("UnknownCallee"), CheckError);
  CHECK_THROWS_WITH_AS(parse_contract("fn f() { t = 1 % 2; }", "op"),
                       doctest::Contains("SyntaxError"), ParseError);
}

TEST_CASE("parse_contract: for-in iterator must be used as a map index") {
  const char* bad =
      "state balances: map^1;\n"
      "fn f() {\n"
      "  acc = 0;\n"
      "  for i in balances { acc = acc + 1; }\n"
      "}\n";
  CHECK_THROWS_WITH_AS(parse_contract(bad, "forin"),
                       doctest::Contains("ForInUnusedIterator"), CheckError);

  const char* good =
      "state balances: map^1;\n"
      "fn f() {\n"
      "  acc = 0;\n"
      "  for i in balances { b = load balances[i]; acc = acc + b; }\n"
      "}\n";
  CHECK_NOTHROW(parse_contract(good, "forin"));

  // projection form: fewer temps than arity needs usage on the loop map
  const char* proj_bad =
      "state m: map^2;\nstate d: map^1;\n"
      "fn f() { for i in m { store d[i], 1; } }\n";
  CHECK_THROWS_WITH_AS(parse_contract(proj_bad, "proj"),
                       doctest::Contains("ForInUnusedIterator"), CheckError);

  const char* shadow =
      "state m: map^1;\n"
      "fn f() { i = 1; for i in m { t = load m[i]; } }\n";
  CHECK_THROWS_WITH_AS(parse_contract(shadow, "shadow"),
                       doctest::Contains("IteratorShadowing"), CheckError);
}

TEST_CASE("reserved namespace is rejected only when asked") {
  const char* src = "state __iv_x: int;\n";
  CHECK_NOTHROW(parse_contract(src, "resv"));
  CHECK_THROWS_WITH_AS(parse_contract(src, "resv", {true}),
                       doctest::Contains("ReservedIdentifier"), CheckError);
}

TEST_CASE("pretty_print round-trips all fixtures structurally") {
  for (const char* name : {"erc20.mini", "erc721.mini", "erc1202.mini", "revert.mini",
                           "calls.mini"}) {
    CAPTURE(name);
    Program a = parse_contract(fixture(name), "a");
    Program b = parse_contract(pretty_print(a), "b");
    CHECK(equal(a, b));
    CHECK(pretty_print(a) == pretty_print(b));
  }
}

TEST_CASE("pretty_print: nested blocks use two-space indentation") {
  const char* src =
      "state m: map^2;\n"
      "\n"
      "fn f(k) {\n"
      "  if k > 0 {\n"
      "    for i, j in m {\n"
      "      t = load m[i][j];\n"
      "      store m[i][j], t + 1;\n"
      "    }\n"
      "  }\n"
      "}\n";
  Program p = parse_contract(src, "fmt");
  CHECK(pretty_print(p) == src);
}

TEST_CASE("pretty_print preserves precedence") {
  Program p = parse_contract(
      "fn f(a, b, c) { t = (a + b) * c; u = a + b * c; v = (a < b) == (c < a); }", "prec");
  Program q = parse_contract(pretty_print(p), "prec2");
  CHECK(equal(p, q));
}

TEST_CASE("call_graph") {
  SUBCASE("no calls") {
    Program p = parse_contract(fixture("erc1202.mini"), "v");
    auto g = call_graph(p);
    CHECK(g.at("vote").empty());
    CHECK(g.at("createIssue").empty());
  }
  SUBCASE("helper and cycle fixture") {
    Program p = parse_contract(fixture("calls.mini"), "c");
    auto g = call_graph(p);
    CHECK(g.at("transfer") == std::set<std::string>{"_move"});
    CHECK(g.at("ping") == std::set<std::string>{"pong"});
    CHECK(g.at("pong") == std::set<std::string>{"ping"});
    auto reach = reachable_functions(p, "ping");
    CHECK(reach.count("pong"));
    CHECK(reach.count("ping"));
    CHECK(!reach.count("transfer"));
  }
}
