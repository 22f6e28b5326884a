#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ivc/value.hpp"

namespace ivc {

// Contract expressions are state-free: persistent state is read and written
// only through load/store statements, which keeps the binding analysis purely
// syntactic on addresses.
struct CExpr;
using CExprPtr = std::shared_ptr<const CExpr>;

struct CExpr {
  enum class Kind { IntConst, TempRef, Sender, CallDepth, BinOp };

  Kind kind;
  Value value;       // IntConst
  std::string name;  // TempRef
  BinOpKind op = BinOpKind::Add;
  CExprPtr lhs, rhs;

  static CExprPtr make_int(Value v) {
    auto e = std::make_shared<CExpr>();
    e->kind = Kind::IntConst;
    e->value = std::move(v);
    return e;
  }
  static CExprPtr make_temp(std::string n) {
    auto e = std::make_shared<CExpr>();
    e->kind = Kind::TempRef;
    e->name = std::move(n);
    return e;
  }
  static CExprPtr make_sender() {
    auto e = std::make_shared<CExpr>();
    e->kind = Kind::Sender;
    return e;
  }
  static CExprPtr make_calldepth() {
    auto e = std::make_shared<CExpr>();
    e->kind = Kind::CallDepth;
    return e;
  }
  static CExprPtr make_binop(BinOpKind op, CExprPtr l, CExprPtr r) {
    auto e = std::make_shared<CExpr>();
    e->kind = Kind::BinOp;
    e->op = op;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    return e;
  }
};

// Address of a persistent or transaction-memory slot: full indexing only.
struct Address {
  std::string var;
  std::vector<CExprPtr> indices;
};

struct Statement;
using StmtPtr = std::shared_ptr<const Statement>;
using StmtList = std::vector<StmtPtr>;

struct Statement {
  enum class Kind { Assign, Load, Store, If, ForIn, Assert, Call };

  Kind kind;
  SourcePos pos;
  std::string temp;            // Assign/Load target
  CExprPtr expr;               // Assign value, Store value, If cond, Assert cond
  Address addr;                // Load/Store
  StmtList body;               // If/ForIn
  std::vector<std::string> iters;  // ForIn iterator temps
  std::string callee;          // ForIn map name / Call function name
  std::vector<CExprPtr> args;  // Call arguments

  static StmtPtr assign(std::string t, CExprPtr e) {
    auto s = std::make_shared<Statement>();
    s->kind = Kind::Assign;
    s->temp = std::move(t);
    s->expr = std::move(e);
    return s;
  }
  static StmtPtr load(std::string t, Address a) {
    auto s = std::make_shared<Statement>();
    s->kind = Kind::Load;
    s->temp = std::move(t);
    s->addr = std::move(a);
    return s;
  }
  static StmtPtr store(Address a, CExprPtr e) {
    auto s = std::make_shared<Statement>();
    s->kind = Kind::Store;
    s->addr = std::move(a);
    s->expr = std::move(e);
    return s;
  }
  static StmtPtr if_(CExprPtr cond, StmtList b) {
    auto s = std::make_shared<Statement>();
    s->kind = Kind::If;
    s->expr = std::move(cond);
    s->body = std::move(b);
    return s;
  }
  static StmtPtr for_in(std::vector<std::string> temps, std::string map, StmtList b) {
    auto s = std::make_shared<Statement>();
    s->kind = Kind::ForIn;
    s->iters = std::move(temps);
    s->callee = std::move(map);
    s->body = std::move(b);
    return s;
  }
  static StmtPtr assert_(CExprPtr cond) {
    auto s = std::make_shared<Statement>();
    s->kind = Kind::Assert;
    s->expr = std::move(cond);
    return s;
  }
  static StmtPtr call(std::string fn, std::vector<CExprPtr> args) {
    auto s = std::make_shared<Statement>();
    s->kind = Kind::Call;
    s->callee = std::move(fn);
    s->args = std::move(args);
    return s;
  }
};

// State lives in the persistent store; Memory is a per-transaction arena
// (used for marker maps and naive-mode scratch space).
enum class VarKind { State, Memory };

struct StateDecl {
  std::string name;
  int arity = 0;  // 0 = scalar, k >= 1 = k-dimensional integer-keyed map
  VarKind kind = VarKind::State;
};

struct Function {
  std::string name;
  std::vector<std::string> params;
  StmtList body;
  bool is_entry = false;
};

struct Program {
  std::string name;
  std::vector<StateDecl> decls;      // declaration order
  std::vector<Function> functions;   // declaration order

  const StateDecl* find_decl(const std::string& n) const {
    for (const auto& d : decls)
      if (d.name == n) return &d;
    return nullptr;
  }
  const Function* find_function(const std::string& n) const {
    for (const auto& f : functions)
      if (f.name == n) return &f;
    return nullptr;
  }
};

// Structural equality; Program::name is metadata and not compared.
bool equal(const CExprPtr& a, const CExprPtr& b);
bool equal(const Address& a, const Address& b);
bool equal(const StmtPtr& a, const StmtPtr& b);
bool equal(const StmtList& a, const StmtList& b);
bool equal(const Program& a, const Program& b);

}  // namespace ivc
