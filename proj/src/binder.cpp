#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "ivc/binder.hpp"
#include "ivc/contract_lang.hpp"
#include "json.hpp"

namespace ivc {

// --------------------------------------------------------------------------
// BindExpr / BindCond

namespace {

bool expr_contains_free(const IExprPtr& e, const std::string& x) {
  switch (e->kind) {
    case IExpr::Kind::FreeVarRef: return e->name == x;
    case IExpr::Kind::MapAccess:
      return std::find(e->indices.begin(), e->indices.end(), x) != e->indices.end();
    case IExpr::Kind::BinOp:
      return expr_contains_free(e->lhs, x) || expr_contains_free(e->rhs, x);
    default: return false;
  }
}

std::string canonical(const BindingMap& m) {
  std::vector<std::string> parts;
  for (const auto& p : m.pairs) parts.push_back(p.free_var + "=" + pretty_print(p.expr));
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (const auto& s : parts) out += s + ";";
  return out;
}

}  // namespace

BindingSet union_sets(BindingSet a, const BindingSet& b) {
  std::set<std::string> seen;
  for (const auto& m : a.maps) seen.insert(canonical(m));
  for (const auto& m : b.maps)
    if (seen.insert(canonical(m)).second) a.maps.push_back(m);
  return a;
}

BindingSet bind_expr(const Address& a, const IExprPtr& e, const NameEnv& env) {
  switch (e->kind) {
    case IExpr::Kind::IntConst:
    case IExpr::Kind::FreeVarRef:
      return {};
    case IExpr::Kind::VarRef: {
      const NameEnv::Entry* ent = env.find(e->name);
      if (ent && ent->contract_name == a.var && a.indices.empty()) return {{BindingMap{}}};
      return {};
    }
    case IExpr::Kind::MapAccess: {
      const NameEnv::Entry* ent = env.find(e->name);
      if (!ent || ent->contract_name != a.var) return {};
      if (a.indices.size() != e->indices.size()) return {};
      BindingMap m;
      for (size_t i = 0; i < e->indices.size(); ++i)
        m.pairs.push_back({e->indices[i], a.indices[i]});
      return {{std::move(m)}};
    }
    case IExpr::Kind::BinOp:
      return union_sets(bind_expr(a, e->lhs, env), bind_expr(a, e->rhs, env));
  }
  return {};
}

BindingSet bind_expr(const Address& a, const ICondPtr& c, const NameEnv& env) {
  switch (c->kind) {
    case ICond::Kind::Cmp:
      return union_sets(bind_expr(a, c->lhs, env), bind_expr(a, c->rhs, env));
    case ICond::Kind::EqFree:
      return bind_expr(a, c->expr, env);
    case ICond::Kind::And:
      return union_sets(bind_expr(a, c->cl, env), bind_expr(a, c->cr, env));
  }
  return {};
}

CondBinding bind_cond(const Address&, const ICondPtr& c) {
  switch (c->kind) {
    case ICond::Kind::Cmp:
      return CondBinding::none();
    case ICond::Kind::EqFree:
      if (expr_contains_free(c->expr, c->var)) return CondBinding::none();
      return {true, c->var, c->expr};
    case ICond::Kind::And: {
      CondBinding left = bind_cond(Address{}, c->cl);
      if (left.bound) return left;
      return bind_cond(Address{}, c->cr);
    }
  }
  return CondBinding::none();
}

std::string to_json(const BindingSet& b) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : b.maps) {
    nlohmann::json jm = nlohmann::json::array();
    for (const auto& p : m.pairs)
      jm.push_back({{"var", p.free_var}, {"expr", pretty_print(p.expr)}});
    arr.push_back(jm);
  }
  return arr.dump();
}

std::string to_json(const CondBinding& b) {
  if (!b.bound) return "null";
  nlohmann::json j{{"var", b.free_var}, {"expr", pretty_print(b.expr)}};
  return j.dump();
}

// --------------------------------------------------------------------------
// Templates

TExprPtr TExpr::make_int(Value v) {
  auto e = std::make_shared<TExpr>();
  e->kind = Kind::Int;
  e->value = std::move(v);
  return e;
}
TExprPtr TExpr::make_temp(std::string n) {
  auto e = std::make_shared<TExpr>();
  e->kind = Kind::Temp;
  e->name = std::move(n);
  return e;
}
TExprPtr TExpr::make_sender() {
  auto e = std::make_shared<TExpr>();
  e->kind = Kind::Sender;
  return e;
}
TExprPtr TExpr::make_calldepth() {
  auto e = std::make_shared<TExpr>();
  e->kind = Kind::CallDepth;
  return e;
}
TExprPtr TExpr::make_binop(BinOpKind op, TExprPtr l, TExprPtr r) {
  auto e = std::make_shared<TExpr>();
  e->kind = Kind::BinOp;
  e->op = op;
  e->lhs = std::move(l);
  e->rhs = std::move(r);
  return e;
}
TExprPtr TExpr::make_free(std::string n) {
  auto e = std::make_shared<TExpr>();
  e->kind = Kind::FreeVar;
  e->name = std::move(n);
  return e;
}
TExprPtr TExpr::make_read(std::string var, std::vector<TExprPtr> idx) {
  auto e = std::make_shared<TExpr>();
  e->kind = Kind::StateRead;
  e->name = std::move(var);
  e->indices = std::move(idx);
  return e;
}

TStmtPtr TStmt::store(std::string var, std::vector<TExprPtr> idx, TExprPtr v) {
  auto s = std::make_shared<TStmt>();
  s->kind = Kind::Store;
  s->var = std::move(var);
  s->indices = std::move(idx);
  s->value = std::move(v);
  return s;
}
TStmtPtr TStmt::read(std::string var, std::vector<TExprPtr> idx) {
  auto s = std::make_shared<TStmt>();
  s->kind = Kind::Read;
  s->var = std::move(var);
  s->indices = std::move(idx);
  return s;
}
TStmtPtr TStmt::assign(std::string temp, TExprPtr v) {
  auto s = std::make_shared<TStmt>();
  s->kind = Kind::Assign;
  s->temp = std::move(temp);
  s->value = std::move(v);
  return s;
}
TStmtPtr TStmt::assert_(TExprPtr v) {
  auto s = std::make_shared<TStmt>();
  s->kind = Kind::Assert;
  s->value = std::move(v);
  return s;
}
TStmtPtr TStmt::if_(std::vector<TExprPtr> conj, std::vector<TStmtPtr> body) {
  auto s = std::make_shared<TStmt>();
  s->kind = Kind::If;
  s->conj = std::move(conj);
  s->body = std::move(body);
  return s;
}
TStmtPtr TStmt::for_in(std::vector<std::string> iters, std::string map,
                       std::vector<TStmtPtr> body) {
  auto s = std::make_shared<TStmt>();
  s->kind = Kind::ForIn;
  s->iters = std::move(iters);
  s->var = std::move(map);
  s->body = std::move(body);
  return s;
}

TExprPtr to_template(const IExprPtr& e, const NameEnv& env) {
  switch (e->kind) {
    case IExpr::Kind::IntConst: return TExpr::make_int(e->value);
    case IExpr::Kind::FreeVarRef: return TExpr::make_free(e->name);
    case IExpr::Kind::VarRef: {
      const NameEnv::Entry* ent = env.find(e->name);
      if (!ent) throw Error("Internal", "unresolved invariant variable " + e->name);
      return TExpr::make_read(ent->contract_name, {});
    }
    case IExpr::Kind::MapAccess: {
      const NameEnv::Entry* ent = env.find(e->name);
      if (!ent) throw Error("Internal", "unresolved invariant variable " + e->name);
      std::vector<TExprPtr> idx;
      for (const auto& x : e->indices) idx.push_back(TExpr::make_free(x));
      return TExpr::make_read(ent->contract_name, std::move(idx));
    }
    case IExpr::Kind::BinOp:
      return TExpr::make_binop(e->op, to_template(e->lhs, env), to_template(e->rhs, env));
  }
  throw Error("Internal", "bad IExpr");
}

std::vector<TExprPtr> to_conjuncts(const ICondPtr& c, const NameEnv& env) {
  std::vector<TExprPtr> out;
  std::function<void(const ICondPtr&)> walk = [&](const ICondPtr& cc) {
    switch (cc->kind) {
      case ICond::Kind::And:
        walk(cc->cl);
        walk(cc->cr);
        return;
      case ICond::Kind::Cmp:
        out.push_back(TExpr::make_binop(cc->op, to_template(cc->lhs, env),
                                        to_template(cc->rhs, env)));
        return;
      case ICond::Kind::EqFree:
        out.push_back(TExpr::make_binop(BinOpKind::Eq, to_template(cc->expr, env),
                                        TExpr::make_free(cc->var)));
        return;
    }
  };
  walk(c);
  return out;
}

void collect_loop_candidates(const TExprPtr& e, bool needs_anchor, LoopCandidates& out) {
  if (!e) return;
  if (e->kind == TExpr::Kind::StateRead) {
    for (const auto& ix : e->indices) {
      if (ix->kind == TExpr::Kind::FreeVar)
        out[ix->name].push_back({e->name, e->indices, needs_anchor});
      collect_loop_candidates(ix, needs_anchor, out);
    }
  } else if (e->kind == TExpr::Kind::BinOp) {
    collect_loop_candidates(e->lhs, needs_anchor, out);
    collect_loop_candidates(e->rhs, needs_anchor, out);
  }
}

// --------------------------------------------------------------------------
// Rewrite

namespace {

bool tequal(const TExprPtr& a, const TExprPtr& b) {
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case TExpr::Kind::Int: return a->value == b->value;
    case TExpr::Kind::Temp:
    case TExpr::Kind::FreeVar: return a->name == b->name;
    case TExpr::Kind::Sender:
    case TExpr::Kind::CallDepth: return true;
    case TExpr::Kind::BinOp:
      return a->op == b->op && tequal(a->lhs, b->lhs) && tequal(a->rhs, b->rhs);
    case TExpr::Kind::StateRead: {
      if (a->name != b->name || a->indices.size() != b->indices.size()) return false;
      for (size_t i = 0; i < a->indices.size(); ++i)
        if (!tequal(a->indices[i], b->indices[i])) return false;
      return true;
    }
  }
  return false;
}

TExprPtr from_cexpr(const CExprPtr& e) {
  switch (e->kind) {
    case CExpr::Kind::IntConst: return TExpr::make_int(e->value);
    case CExpr::Kind::TempRef: return TExpr::make_temp(e->name);
    case CExpr::Kind::Sender: return TExpr::make_sender();
    case CExpr::Kind::CallDepth: return TExpr::make_calldepth();
    case CExpr::Kind::BinOp:
      return TExpr::make_binop(e->op, from_cexpr(e->lhs), from_cexpr(e->rhs));
  }
  throw Error("Internal", "bad CExpr");
}

TExprPtr subst_expr(const TExprPtr& e, const std::string& var, const TExprPtr& repl) {
  switch (e->kind) {
    case TExpr::Kind::FreeVar:
      return e->name == var ? repl : e;
    case TExpr::Kind::BinOp:
      return TExpr::make_binop(e->op, subst_expr(e->lhs, var, repl),
                               subst_expr(e->rhs, var, repl));
    case TExpr::Kind::StateRead: {
      std::vector<TExprPtr> idx;
      for (const auto& ix : e->indices) idx.push_back(subst_expr(ix, var, repl));
      return TExpr::make_read(e->name, std::move(idx));
    }
    default:
      return e;
  }
}

TStmtPtr subst_stmt(const TStmtPtr& s, const std::string& var, const TExprPtr& repl) {
  auto n = std::make_shared<TStmt>(*s);
  if (n->value) n->value = subst_expr(n->value, var, repl);
  for (auto& ix : n->indices) ix = subst_expr(ix, var, repl);
  for (auto& c : n->conj) c = subst_expr(c, var, repl);
  for (auto& b : n->body) b = subst_stmt(b, var, repl);
  return n;
}

void free_vars_in(const TExprPtr& e, std::vector<std::string>& out) {
  if (!e) return;
  switch (e->kind) {
    case TExpr::Kind::FreeVar:
      if (std::find(out.begin(), out.end(), e->name) == out.end()) out.push_back(e->name);
      return;
    case TExpr::Kind::BinOp:
      free_vars_in(e->lhs, out);
      free_vars_in(e->rhs, out);
      return;
    case TExpr::Kind::StateRead:
      for (const auto& ix : e->indices) free_vars_in(ix, out);
      return;
    default:
      return;
  }
}

void free_vars_in(const TStmtPtr& s, std::vector<std::string>& out) {
  free_vars_in(s->value, out);
  for (const auto& ix : s->indices) free_vars_in(ix, out);
  for (const auto& c : s->conj) free_vars_in(c, out);
  for (const auto& b : s->body) free_vars_in(b, out);
}

bool is_const_true(const TExprPtr& e) {
  if (e->kind == TExpr::Kind::Int) return e->value != 0;
  // Syntactically identical equality compares a value with itself; execution
  // is sequential, so the two reads cannot disagree.
  if (e->kind == TExpr::Kind::BinOp && e->op == BinOpKind::Eq) return tequal(e->lhs, e->rhs);
  return false;
}

bool is_const_false(const TExprPtr& e) {
  return e->kind == TExpr::Kind::Int && e->value == 0;
}

// --------------------------------------------------------------------------
// Lowering: hoists StateRead nodes into load statements. Identical reads in
// the same straight-line scope share one load; a store to a base var drops
// its cached reads.

struct LowerCtx {
  std::vector<std::pair<TExprPtr, std::string>> cache;  // read -> temp
  FreshNames* names;

  std::string lookup(const TExprPtr& read) {
    for (const auto& [r, t] : cache)
      if (tequal(r, read)) return t;
    return "";
  }
  void purge_base(const std::string& var) {
    cache.erase(std::remove_if(cache.begin(), cache.end(),
                               [&](const auto& p) { return p.first->name == var; }),
                cache.end());
  }
};

CExprPtr lower_expr(const TExprPtr& e, StmtList& out, LowerCtx& ctx);

Address lower_address(const std::string& var, const std::vector<TExprPtr>& idx, StmtList& out,
                      LowerCtx& ctx) {
  Address a;
  a.var = var;
  for (const auto& ix : idx) a.indices.push_back(lower_expr(ix, out, ctx));
  return a;
}

CExprPtr lower_expr(const TExprPtr& e, StmtList& out, LowerCtx& ctx) {
  switch (e->kind) {
    case TExpr::Kind::Int: return CExpr::make_int(e->value);
    case TExpr::Kind::Temp: return CExpr::make_temp(e->name);
    case TExpr::Kind::Sender: return CExpr::make_sender();
    case TExpr::Kind::CallDepth: return CExpr::make_calldepth();
    case TExpr::Kind::FreeVar:
      throw Error("Internal", "residual free variable '" + e->name + "' after rewrite");
    case TExpr::Kind::BinOp:
      return CExpr::make_binop(e->op, lower_expr(e->lhs, out, ctx),
                               lower_expr(e->rhs, out, ctx));
    case TExpr::Kind::StateRead: {
      std::string cached = ctx.lookup(e);
      if (!cached.empty()) return CExpr::make_temp(cached);
      Address a = lower_address(e->name, e->indices, out, ctx);
      std::string t = ctx.names->temp();
      out.push_back(Statement::load(t, std::move(a)));
      ctx.cache.push_back({e, t});
      return CExpr::make_temp(t);
    }
  }
  throw Error("Internal", "bad TExpr");
}

void collect_stored_bases(const TStmtPtr& s, std::set<std::string>& out) {
  if (s->kind == TStmt::Kind::Store) out.insert(s->var);
  for (const auto& b : s->body) collect_stored_bases(b, out);
}

void lower_stmt(const TStmtPtr& s, StmtList& out, LowerCtx& ctx);

void lower_block(const std::vector<TStmtPtr>& body, StmtList& out, LowerCtx& ctx) {
  for (const auto& s : body) lower_stmt(s, out, ctx);
}

void lower_stmt(const TStmtPtr& s, StmtList& out, LowerCtx& ctx) {
  switch (s->kind) {
    case TStmt::Kind::Store: {
      Address a = lower_address(s->var, s->indices, out, ctx);
      CExprPtr v = lower_expr(s->value, out, ctx);
      if (v->kind == CExpr::Kind::BinOp) {
        std::string t = ctx.names->temp();
        out.push_back(Statement::assign(t, std::move(v)));
        v = CExpr::make_temp(t);
      }
      out.push_back(Statement::store(std::move(a), std::move(v)));
      ctx.purge_base(s->var);
      return;
    }
    case TStmt::Kind::Read: {
      // Lower like any other read so later identical reads reuse the temp.
      lower_expr(TExpr::make_read(s->var, s->indices), out, ctx);
      return;
    }
    case TStmt::Kind::Assign: {
      CExprPtr v = lower_expr(s->value, out, ctx);
      out.push_back(Statement::assign(s->temp, std::move(v)));
      return;
    }
    case TStmt::Kind::Assert: {
      CExprPtr v = lower_expr(s->value, out, ctx);
      out.push_back(Statement::assert_(std::move(v)));
      return;
    }
    case TStmt::Kind::If: {
      // if c1 && c2 { b } lowers to nested ifs so later conjuncts' loads run
      // only when earlier ones hold.
      std::vector<TExprPtr> conj;
      for (const auto& c : s->conj) {
        if (is_const_true(c)) continue;
        if (is_const_false(c)) return;  // statically dead
        conj.push_back(c);
      }
      if (conj.empty()) {
        lower_block(s->body, out, ctx);
        return;
      }
      std::function<void(size_t, StmtList&, LowerCtx&)> emit = [&](size_t i, StmtList& dst,
                                                                   LowerCtx& c) {
        CExprPtr cond = lower_expr(conj[i], dst, c);
        StmtList inner;
        LowerCtx child = c;
        if (i + 1 < conj.size())
          emit(i + 1, inner, child);
        else
          lower_block(s->body, inner, child);
        dst.push_back(Statement::if_(std::move(cond), std::move(inner)));
      };
      emit(0, out, ctx);
      std::set<std::string> stored;
      collect_stored_bases(s, stored);
      for (const auto& base : stored) ctx.purge_base(base);
      return;
    }
    case TStmt::Kind::ForIn: {
      StmtList inner;
      LowerCtx child = ctx;
      lower_block(s->body, inner, child);
      out.push_back(Statement::for_in(s->iters, s->var, std::move(inner)));
      std::set<std::string> stored;
      collect_stored_bases(s, stored);
      for (const auto& base : stored) ctx.purge_base(base);
      return;
    }
  }
}

}  // namespace

StmtList lower_templates(const std::vector<TStmtPtr>& tmpl, FreshNames& names) {
  StmtList out;
  LowerCtx ctx;
  ctx.names = &names;
  lower_block(tmpl, out, ctx);
  return out;
}

TExprPtr substitute_free(const TExprPtr& e, const std::string& var, const TExprPtr& repl) {
  return subst_expr(e, var, repl);
}
TStmtPtr substitute_free(const TStmtPtr& s, const std::string& var, const TExprPtr& repl) {
  return subst_stmt(s, var, repl);
}

namespace {

void collect_stmt_candidates(const TStmtPtr& s, LoopCandidates& out) {
  if (s->value) collect_loop_candidates(s->value, false, out);
  for (const auto& ix : s->indices) collect_loop_candidates(ix, false, out);
  for (const auto& c : s->conj) collect_loop_candidates(c, false, out);
  for (const auto& b : s->body) collect_stmt_candidates(b, out);
}

}  // namespace

StmtList rewrite(const std::vector<TStmtPtr>& tmpl, const BindingSet& bindings,
                 const CondBinding& cond_binding, const LoopCandidates& rule_candidates,
                 const NameEnv& env, FreshNames& names) {
  TExprPtr cond_expr =
      cond_binding.bound ? to_template(cond_binding.expr, env) : nullptr;

  StmtList result;
  for (const BindingMap& base : bindings.maps) {
    std::vector<TStmtPtr> inst = tmpl;

    // B' = B ∪ {b}; the condition binding participates in duplicate
    // detection like any other pair.
    struct Pair {
      std::string var;
      TExprPtr expr;
      bool from_cond;
    };
    std::vector<Pair> pairs;
    for (const auto& p : base.pairs) pairs.push_back({p.free_var, from_cexpr(p.expr), false});
    if (cond_binding.bound) pairs.push_back({cond_binding.free_var, cond_expr, true});

    std::vector<std::string> fv;
    for (const auto& s : inst) free_vars_in(s, fv);

    std::vector<Pair> kept;
    std::vector<TExprPtr> guards;

    for (const auto& x : fv) {
      std::vector<size_t> mine;
      for (size_t i = 0; i < pairs.size(); ++i)
        if (pairs[i].var == x) mine.push_back(i);
      if (!mine.empty()) {
        // Several pairs for one variable: guard on all matched index
        // expressions agreeing and keep the first.
        for (size_t j = 1; j < mine.size(); ++j) {
          if (!tequal(pairs[mine[0]].expr, pairs[mine[j]].expr))
            guards.push_back(TExpr::make_binop(BinOpKind::Eq, pairs[mine[0]].expr,
                                               pairs[mine[j]].expr));
        }
        kept.push_back(pairs[mine[0]]);
        continue;
      }
      // No binding: wrap the statement in a loop over a map this variable
      // indexes, first map in template traversal order, falling back to the
      // rule's own occurrences.
      LoopCandidates own;
      for (const auto& s : inst) collect_stmt_candidates(s, own);
      const LoopCandidate* cand = nullptr;
      if (auto it = own.find(x); it != own.end() && !it->second.empty())
        cand = &it->second.front();
      else if (auto rt = rule_candidates.find(x); rt != rule_candidates.end() &&
                                                  !rt->second.empty())
        cand = &rt->second.front();
      if (!cand)
        throw CheckError("UnboundFreeVarNoMap",
                         "free variable '" + x + "' has no binding and indexes no map");
      std::string t = names.temp();
      std::vector<TStmtPtr> loop_body;
      if (cand->needs_anchor_load)
        loop_body.push_back(TStmt::read(cand->map, cand->occurrence_indices));
      for (const auto& st : inst) loop_body.push_back(st);
      inst = {TStmt::for_in({t}, cand->map, std::move(loop_body))};
      kept.push_back({x, TExpr::make_temp(t), false});
    }

    if (!guards.empty()) inst = {TStmt::if_(std::move(guards), std::move(inst))};

    // Substitute the condition binding first (its expression may embed other
    // free variables, which the remaining pairs then resolve).
    for (const auto& p : kept) {
      if (!p.from_cond) continue;
      std::vector<TStmtPtr> next;
      for (const auto& st : inst) next.push_back(subst_stmt(st, p.var, p.expr));
      inst = std::move(next);
    }
    for (const auto& p : kept) {
      if (p.from_cond) continue;
      std::vector<TStmtPtr> next;
      for (const auto& st : inst) next.push_back(subst_stmt(st, p.var, p.expr));
      inst = std::move(next);
    }

    StmtList lowered = lower_templates(inst, names);
    for (auto& s : lowered) result.push_back(std::move(s));
  }
  return result;
}

}  // namespace ivc
