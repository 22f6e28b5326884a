#pragma once

#include <map>
#include <string>
#include <vector>

#include "ivc/contract_ast.hpp"
#include "ivc/spec_ast.hpp"

namespace ivc {

// Maps invariant-language variable names (state vars and intermediates) to
// the contract-level names the instrumented program uses.
struct NameEnv {
  struct Entry {
    std::string contract_name;
    int arity = 0;
  };
  std::map<std::string, Entry> table;

  const Entry* find(const std::string& inv_name) const {
    auto it = table.find(inv_name);
    return it == table.end() ? nullptr : &it->second;
  }
};

// One free-variable assignment fragment: the store at some address can only
// affect invariant instances where `free_var` equals `expr`.
struct BindingPair {
  std::string free_var;
  CExprPtr expr;
};

struct BindingMap {
  std::vector<BindingPair> pairs;
};

// Empty set: the store cannot affect the expression at all. A set holding the
// empty map: it affects the (single) instance with no index constraints.
struct BindingSet {
  std::vector<BindingMap> maps;
};

struct CondBinding {
  bool bound = false;
  std::string free_var;
  IExprPtr expr;

  static CondBinding none() { return {}; }
};

BindingSet bind_expr(const Address& a, const IExprPtr& e, const NameEnv& env);
BindingSet bind_expr(const Address& a, const ICondPtr& c, const NameEnv& env);
BindingSet union_sets(BindingSet a, const BindingSet& b);

// Scans conjuncts left to right; the first `e == x` with x absent from e
// pins x to e for every instance the store can affect.
CondBinding bind_cond(const Address& a, const ICondPtr& c);

std::string to_json(const BindingSet& b);
std::string to_json(const CondBinding& b);

// ---------------------------------------------------------------------------
// Statement templates: contract statements whose expressions may still embed
// invariant state reads and free variables. Rewrite instantiates them per
// binding map; lowering hoists state reads into load statements.

struct TExpr;
using TExprPtr = std::shared_ptr<const TExpr>;

struct TExpr {
  enum class Kind { Int, Temp, Sender, CallDepth, BinOp, FreeVar, StateRead };
  Kind kind;
  Value value;
  std::string name;  // Temp / FreeVar / StateRead contract var name
  BinOpKind op = BinOpKind::Add;
  TExprPtr lhs, rhs;
  std::vector<TExprPtr> indices;  // StateRead

  static TExprPtr make_int(Value v);
  static TExprPtr make_temp(std::string n);
  static TExprPtr make_sender();
  static TExprPtr make_calldepth();
  static TExprPtr make_binop(BinOpKind op, TExprPtr l, TExprPtr r);
  static TExprPtr make_free(std::string n);
  static TExprPtr make_read(std::string var, std::vector<TExprPtr> idx);
};

struct TStmt;
using TStmtPtr = std::shared_ptr<const TStmt>;

struct TStmt {
  enum class Kind { Store, Read, Assign, Assert, If, ForIn };
  Kind kind;
  std::string var;                 // Store/Read target / ForIn map
  std::string temp;                // Assign target
  std::vector<TExprPtr> indices;   // Store/Read
  TExprPtr value;                  // Store/Assign value / Assert cond
  std::vector<TExprPtr> conj;      // If conjuncts (all must be nonzero)
  std::vector<TStmtPtr> body;      // If / ForIn
  std::vector<std::string> iters;  // ForIn

  static TStmtPtr store(std::string var, std::vector<TExprPtr> idx, TExprPtr v);
  // Bare load whose result is unused; anchors a synthesized loop iterator to
  // a key position of the iterated map.
  static TStmtPtr read(std::string var, std::vector<TExprPtr> idx);
  static TStmtPtr assign(std::string temp, TExprPtr v);
  static TStmtPtr assert_(TExprPtr v);
  static TStmtPtr if_(std::vector<TExprPtr> conj, std::vector<TStmtPtr> body);
  static TStmtPtr for_in(std::vector<std::string> iters, std::string map,
                         std::vector<TStmtPtr> body);
};

// Conversions from the invariant language, resolving names through env.
TExprPtr to_template(const IExprPtr& e, const NameEnv& env);
std::vector<TExprPtr> to_conjuncts(const ICondPtr& c, const NameEnv& env);

// Candidate maps for synthesizing a loop over a free variable with no
// binding: pairs of (map occurrence, its index pattern). Occurrences inside
// the template itself already provide iterator usage; occurrences taken from
// the rule require an anchoring load so the loop's projection is defined.
struct LoopCandidate {
  std::string map;
  std::vector<TExprPtr> occurrence_indices;
  bool needs_anchor_load = false;
};
using LoopCandidates = std::map<std::string, std::vector<LoopCandidate>>;

void collect_loop_candidates(const TExprPtr& e, bool needs_anchor, LoopCandidates& out);

struct FreshNames {
  int next_temp = 0;
  std::string temp() { return "__t" + std::to_string(next_temp++); }
};

// Fig-9-style rewrite: one instantiation per binding map, concatenated.
// Duplicate pairs for a free variable become equality guards; unbound free
// variables are wrapped in for-in loops over a candidate map; the condition
// binding is substituted first so its embedded free variables are resolved by
// the remaining pairs. The result is lowered to plain contract statements
// with zero residual free variables.
StmtList rewrite(const std::vector<TStmtPtr>& tmpl, const BindingSet& bindings,
                 const CondBinding& cond_binding, const LoopCandidates& rule_candidates,
                 const NameEnv& env, FreshNames& names);

// Lowers a closed template (no free variables) directly.
StmtList lower_templates(const std::vector<TStmtPtr>& tmpl, FreshNames& names);

// Direct substitution of one free variable, used by the instrumenter when a
// variable is bound by a loop iterator rather than a store address.
TExprPtr substitute_free(const TExprPtr& e, const std::string& var, const TExprPtr& repl);
TStmtPtr substitute_free(const TStmtPtr& s, const std::string& var, const TExprPtr& repl);

}  // namespace ivc
