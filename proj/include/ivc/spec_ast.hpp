#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ivc/value.hpp"

namespace ivc {

struct Program;

// Invariant-language expressions. Free variables appear as map indices, as
// the right-hand side of `e == x` conjuncts, and as atoms in comparisons
// (the ERC1202 invariant needs `b != 0`).
struct IExpr;
using IExprPtr = std::shared_ptr<const IExpr>;

struct IExpr {
  enum class Kind { IntConst, VarRef, MapAccess, FreeVarRef, BinOp };

  Kind kind;
  Value value;                       // IntConst
  std::string name;                  // VarRef / MapAccess / FreeVarRef
  std::vector<std::string> indices;  // MapAccess: free-variable names
  BinOpKind op = BinOpKind::Add;
  IExprPtr lhs, rhs;

  static IExprPtr make_int(Value v) {
    auto e = std::make_shared<IExpr>();
    e->kind = Kind::IntConst;
    e->value = std::move(v);
    return e;
  }
  static IExprPtr make_var(std::string n) {
    auto e = std::make_shared<IExpr>();
    e->kind = Kind::VarRef;
    e->name = std::move(n);
    return e;
  }
  static IExprPtr make_map(std::string n, std::vector<std::string> idx) {
    auto e = std::make_shared<IExpr>();
    e->kind = Kind::MapAccess;
    e->name = std::move(n);
    e->indices = std::move(idx);
    return e;
  }
  static IExprPtr make_free(std::string n) {
    auto e = std::make_shared<IExpr>();
    e->kind = Kind::FreeVarRef;
    e->name = std::move(n);
    return e;
  }
  static IExprPtr make_binop(BinOpKind op, IExprPtr l, IExprPtr r) {
    auto e = std::make_shared<IExpr>();
    e->kind = Kind::BinOp;
    e->op = op;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    return e;
  }
};

struct ICond;
using ICondPtr = std::shared_ptr<const ICond>;

struct ICond {
  enum class Kind { Cmp, EqFree, And };

  Kind kind;
  BinOpKind op = BinOpKind::Eq;  // Cmp
  IExprPtr lhs, rhs;             // Cmp
  IExprPtr expr;                 // EqFree: expr == var
  std::string var;               // EqFree
  ICondPtr cl, cr;               // And

  static ICondPtr make_cmp(BinOpKind op, IExprPtr l, IExprPtr r) {
    auto c = std::make_shared<ICond>();
    c->kind = Kind::Cmp;
    c->op = op;
    c->lhs = std::move(l);
    c->rhs = std::move(r);
    return c;
  }
  static ICondPtr make_eqfree(IExprPtr e, std::string v) {
    auto c = std::make_shared<ICond>();
    c->kind = Kind::EqFree;
    c->expr = std::move(e);
    c->var = std::move(v);
    return c;
  }
  static ICondPtr make_and(ICondPtr l, ICondPtr r) {
    auto c = std::make_shared<ICond>();
    c->kind = Kind::And;
    c->cl = std::move(l);
    c->cr = std::move(r);
    return c;
  }
};

struct Rule {
  enum class Kind { MapSum, ForAllAssert };

  Kind kind;
  SourcePos pos;
  // MapSum: target = Map index_vars Sum body Over over_vars Where where;
  std::string target;
  std::vector<std::string> index_vars;
  std::vector<std::string> over_vars;
  IExprPtr body;
  ICondPtr where;  // null = unconditional
  // ForAllAssert: ForAll quant_vars Assert assert_body;
  std::vector<std::string> quant_vars;
  ICondPtr assert_body;

  const std::vector<std::string>& bound_vars() const {
    return kind == Kind::ForAllAssert ? quant_vars : index_vars;
  }
};

struct InvariantSpec {
  std::vector<Rule> rules;
  std::map<std::string, int> intermediates;  // target name -> arity
};

// Spec with every name resolved against a concrete contract.
struct ResolvedVar {
  enum class Kind { State, Intermediate } kind;
  int arity = 0;
  size_t rule_index = 0;  // Intermediate: declaring rule
};

struct TypedSpec {
  InvariantSpec spec;
  std::map<std::string, ResolvedVar> vars;  // state vars referenced + intermediates

  const ResolvedVar& resolve(const std::string& name) const {
    auto it = vars.find(name);
    if (it == vars.end()) throw Error("Internal", "unresolved variable " + name);
    return it->second;
  }
};

InvariantSpec parse_spec(const std::string& text);
std::string pretty_print(const InvariantSpec& s);
std::string pretty_print(const IExprPtr& e);
std::string pretty_print(const ICondPtr& c);

// Resolves every VarRef/MapAccess against the contract's state declarations
// and previously declared intermediates, checking arities and free-variable
// scoping.
TypedSpec check_spec(const InvariantSpec& spec, const Program& program);

bool equal(const IExprPtr& a, const IExprPtr& b);
bool equal(const ICondPtr& a, const ICondPtr& b);
bool equal(const InvariantSpec& a, const InvariantSpec& b);

}  // namespace ivc
