#include <algorithm>
#include <functional>
#include <set>

#include "ivc/oracle.hpp"

namespace ivc {

namespace {

struct RuleViolated {};

// (map name, key position) occurrences of each free variable of a rule.
std::map<std::string, std::vector<std::pair<std::string, int>>> occurrences(const Rule& r) {
  std::map<std::string, std::vector<std::pair<std::string, int>>> out;
  std::function<void(const IExprPtr&)> scan_e = [&](const IExprPtr& e) {
    if (!e) return;
    if (e->kind == IExpr::Kind::MapAccess) {
      for (size_t i = 0; i < e->indices.size(); ++i)
        out[e->indices[i]].push_back({e->name, static_cast<int>(i)});
    } else if (e->kind == IExpr::Kind::BinOp) {
      scan_e(e->lhs);
      scan_e(e->rhs);
    }
  };
  std::function<void(const ICondPtr&)> scan_c = [&](const ICondPtr& c) {
    if (!c) return;
    switch (c->kind) {
      case ICond::Kind::And: scan_c(c->cl); scan_c(c->cr); return;
      case ICond::Kind::Cmp: scan_e(c->lhs); scan_e(c->rhs); return;
      case ICond::Kind::EqFree: scan_e(c->expr); return;
    }
  };
  scan_e(r.body);
  scan_c(r.where);
  scan_c(r.assert_body);
  return out;
}

}  // namespace

struct Oracle::Eval {
  const TypedSpec& spec;
  IntMode mode;
  const StateStore& state;

  std::map<std::string, const Rule*> defs;                   // intermediate -> rule
  mutable std::map<std::pair<std::string, Key>, Value> memo;  // denote cache
  mutable std::map<std::string, std::optional<std::set<Key>>> entryset_memo;

  Eval(const TypedSpec& s, IntMode m, const StateStore& st) : spec(s), mode(m), state(st) {
    for (const auto& r : spec.spec.rules)
      if (r.kind == Rule::Kind::MapSum) defs[r.target] = &r;
  }

  bool is_intermediate(const std::string& name) const { return defs.count(name) != 0; }

  // Key domain of one free variable: union of projected defined keys over
  // every map it indexes in its rule.
  std::set<Value> var_domain(const Rule& r, const std::string& v) const {
    std::set<Value> dom;
    auto occ = occurrences(r);
    auto it = occ.find(v);
    if (it == occ.end()) return dom;
    for (const auto& [map_name, pos] : it->second) {
      if (is_intermediate(map_name)) {
        for (const auto& k : entry_set(map_name)) dom.insert(k[static_cast<size_t>(pos)]);
      } else if (auto mit = state.maps.find(map_name); mit != state.maps.end()) {
        for (const auto& [k, val] : mit->second) dom.insert(k[static_cast<size_t>(pos)]);
      }
    }
    return dom;
  }

  // Enumerable entries of an intermediate: the product of its index-variable
  // domains (empty if any factor is empty).
  const std::set<Key>& entry_set(const std::string& target) const {
    auto& slot = entryset_memo[target];
    if (slot) return *slot;
    slot.emplace();
    const Rule& r = *defs.at(target);
    std::vector<std::set<Value>> doms;
    for (const auto& x : r.index_vars) doms.push_back(var_domain(r, x));
    std::set<Key> keys;
    Key cur;
    std::function<void(size_t)> rec = [&](size_t i) {
      if (i == doms.size()) {
        keys.insert(cur);
        return;
      }
      for (const auto& v : doms[i]) {
        cur.push_back(v);
        rec(i + 1);
        cur.pop_back();
      }
    };
    rec(0);
    *slot = std::move(keys);
    return *slot;
  }

  Value state_scalar(const std::string& name) const {
    auto it = state.scalars.find(name);
    return it == state.scalars.end() ? Value(0) : it->second;
  }

  Value state_map(const std::string& name, const Key& k) const {
    auto mit = state.maps.find(name);
    if (mit == state.maps.end()) return 0;
    auto it = mit->second.find(k);
    return it == mit->second.end() ? Value(0) : it->second;
  }

  Value eval_expr(const IExprPtr& e, const std::map<std::string, Value>& env) const {
    switch (e->kind) {
      case IExpr::Kind::IntConst: return normalize(e->value, mode);
      case IExpr::Kind::FreeVarRef: return env.at(e->name);
      case IExpr::Kind::VarRef:
        if (is_intermediate(e->name)) return denote(e->name, {});
        return state_scalar(e->name);
      case IExpr::Kind::MapAccess: {
        Key k;
        for (const auto& ix : e->indices) k.push_back(env.at(ix));
        if (is_intermediate(e->name)) return denote(e->name, k);
        return state_map(e->name, k);
      }
      case IExpr::Kind::BinOp: {
        Value a = eval_expr(e->lhs, env);
        Value b = eval_expr(e->rhs, env);
        try {
          return eval_binop(e->op, a, b, mode);
        } catch (const DivisionByZero&) {
          throw RuleViolated{};
        }
      }
    }
    throw Error("Internal", "bad IExpr");
  }

  bool eval_cond(const ICondPtr& c, const std::map<std::string, Value>& env) const {
    switch (c->kind) {
      case ICond::Kind::And: return eval_cond(c->cl, env) && eval_cond(c->cr, env);
      case ICond::Kind::Cmp:
        return eval_binop(c->op, eval_expr(c->lhs, env), eval_expr(c->rhs, env), mode) != 0;
      case ICond::Kind::EqFree:
        return eval_expr(c->expr, env) == env.at(c->var);
    }
    throw Error("Internal", "bad ICond");
  }

  // The displayed Sum semantics: v[x..] = sum over all over-variable
  // assignments of (e if c else 0).
  Value denote(const std::string& target, const Key& key) const {
    auto memo_key = std::make_pair(target, key);
    if (auto it = memo.find(memo_key); it != memo.end()) return it->second;
    const Rule& r = *defs.at(target);
    if (key.size() != r.index_vars.size())
      throw Error("Internal", "denote arity mismatch for " + target);
    std::map<std::string, Value> env;
    for (size_t i = 0; i < key.size(); ++i) env[r.index_vars[i]] = key[i];
    std::vector<std::set<Value>> doms;
    for (const auto& y : r.over_vars) doms.push_back(var_domain(r, y));
    Value total = 0;
    std::function<void(size_t)> rec = [&](size_t i) {
      if (i == doms.size()) {
        if (!r.where || eval_cond(r.where, env))
          total = normalize(total + eval_expr(r.body, env), mode);
        return;
      }
      for (const auto& v : doms[i]) {
        env[r.over_vars[i]] = v;
        rec(i + 1);
      }
      env.erase(r.over_vars[i]);
    };
    rec(0);
    memo[memo_key] = total;
    return total;
  }
};

Oracle::Oracle(const TypedSpec& spec, IntMode mode) : spec_(spec), mode_(mode) {}

OracleResult Oracle::check(const StateStore& state) const {
  Eval ev(spec_, mode_, state);
  OracleResult out;
  for (size_t k = 0; k < spec_.spec.rules.size(); ++k) {
    const Rule& r = spec_.spec.rules[k];
    try {
      if (r.kind == Rule::Kind::MapSum) {
        auto& entries = out.intermediates[r.target];
        for (const auto& key : ev.entry_set(r.target)) entries[key] = ev.denote(r.target, key);
        continue;
      }
      std::vector<std::set<Value>> doms;
      for (const auto& q : r.quant_vars) doms.push_back(ev.var_domain(r, q));
      std::map<std::string, Value> env;
      Key cur;
      std::function<void(size_t)> rec = [&](size_t i) {
        if (i == doms.size()) {
          if (!ev.eval_cond(r.assert_body, env)) {
            out.satisfied = false;
            out.violations.push_back({k, cur});
          }
          return;
        }
        for (const auto& v : doms[i]) {
          env[r.quant_vars[i]] = v;
          cur.push_back(v);
          rec(i + 1);
          cur.pop_back();
        }
        env.erase(r.quant_vars[i]);
      };
      rec(0);
    } catch (const RuleViolated&) {
      out.satisfied = false;
      out.violations.push_back({k, {}});
    }
  }
  return out;
}

Value Oracle::denote_at(const StateStore& state, const std::string& target,
                        const Key& key) const {
  Eval ev(spec_, mode_, state);
  try {
    return ev.denote(target, key);
  } catch (const RuleViolated&) {
    throw VmError("DivisionByZero", "in denotation of " + target);
  }
}

}  // namespace ivc
