#include <algorithm>
#include <functional>
#include <optional>
#include <set>

#include "ivc/contract_lang.hpp"
#include "ivc/instrument.hpp"
#include "json.hpp"

namespace ivc {

namespace {

constexpr const char* kCd = "__cd";
constexpr const char* kCdT = "__cd_t";    // depth on entry
constexpr const char* kCdT1 = "__cd_t1";  // depth inside this frame

void ensure_no_reserved(const Program& p) {
  auto bad = [](const std::string& n) {
    if (is_reserved_name(n))
      throw CheckError("InstrumentationCollision",
                       "input already uses reserved name '" + n + "'");
  };
  for (const auto& d : p.decls) bad(d.name);
  for (const auto& f : p.functions) {
    bad(f.name);
    for (const auto& prm : f.params) bad(prm);
    std::function<void(const StmtList&)> scan = [&](const StmtList& body) {
      for (const auto& s : body) {
        if (s->kind == Statement::Kind::Assign || s->kind == Statement::Kind::Load) bad(s->temp);
        for (const auto& it : s->iters) bad(it);
        if (!s->body.empty()) scan(s->body);
      }
    };
    scan(f.body);
  }
}

// Rebuilds a statement list, letting `hook` emit statements around every
// store. Nested bodies are rebuilt recursively; statements inserted by the
// hook are not themselves revisited within the same pass, which is exactly
// the per-rule P <- P' staging of the instrumentation algorithm.
using StoreHook = std::function<void(const StmtPtr&, StmtList&, StmtList&)>;

StmtList transform_stores(const StmtList& body, const StoreHook& hook) {
  StmtList out;
  for (const auto& s : body) {
    if (s->kind == Statement::Kind::Store) {
      StmtList pre, post;
      hook(s, pre, post);
      for (auto& x : pre) out.push_back(std::move(x));
      out.push_back(s);
      for (auto& x : post) out.push_back(std::move(x));
    } else if (!s->body.empty()) {
      auto n = std::make_shared<Statement>(*s);
      n->body = transform_stores(s->body, hook);
      out.push_back(std::move(n));
    } else {
      out.push_back(s);
    }
  }
  return out;
}

std::set<std::string> stored_vars_in(const StmtList& body) {
  std::set<std::string> out;
  std::function<void(const StmtList&)> scan = [&](const StmtList& b) {
    for (const auto& s : b) {
      if (s->kind == Statement::Kind::Store) out.insert(s->addr.var);
      if (!s->body.empty()) scan(s->body);
    }
  };
  scan(body);
  return out;
}

std::set<std::string> reachable_stores(const Program& p, const std::string& entry) {
  std::set<std::string> out;
  for (const auto& fn : reachable_functions(p, entry)) {
    const Function* f = p.find_function(fn);
    if (!f) continue;
    auto vars = stored_vars_in(f->body);
    out.insert(vars.begin(), vars.end());
  }
  return out;
}

void intermediates_in_expr(const IExprPtr& e, const std::map<std::string, int>& inter,
                           std::set<std::string>& out, std::set<std::string>& states) {
  if (!e) return;
  switch (e->kind) {
    case IExpr::Kind::VarRef:
    case IExpr::Kind::MapAccess:
      if (inter.count(e->name))
        out.insert(e->name);
      else
        states.insert(e->name);
      return;
    case IExpr::Kind::BinOp:
      intermediates_in_expr(e->lhs, inter, out, states);
      intermediates_in_expr(e->rhs, inter, out, states);
      return;
    default:
      return;
  }
}

void intermediates_in_cond(const ICondPtr& c, const std::map<std::string, int>& inter,
                           std::set<std::string>& out, std::set<std::string>& states) {
  if (!c) return;
  switch (c->kind) {
    case ICond::Kind::And:
      intermediates_in_cond(c->cl, inter, out, states);
      intermediates_in_cond(c->cr, inter, out, states);
      return;
    case ICond::Kind::Cmp:
      intermediates_in_expr(c->lhs, inter, out, states);
      intermediates_in_expr(c->rhs, inter, out, states);
      return;
    case ICond::Kind::EqFree:
      intermediates_in_expr(c->expr, inter, out, states);
      return;
  }
}

struct RuleRefs {
  std::set<std::string> states;         // contract state vars referenced directly
  std::set<std::string> intermediates;  // invariant-level names
};

RuleRefs rule_refs(const Rule& r, const std::map<std::string, int>& inter) {
  RuleRefs refs;
  if (r.kind == Rule::Kind::MapSum) {
    intermediates_in_expr(r.body, inter, refs.intermediates, refs.states);
    intermediates_in_cond(r.where, inter, refs.intermediates, refs.states);
  } else {
    intermediates_in_cond(r.assert_body, inter, refs.intermediates, refs.states);
  }
  return refs;
}

// Transitive state-variable footprint of a rule, expanding intermediates
// through their defining rules.
std::set<std::string> transitive_states(const Rule& r, const InvariantSpec& spec) {
  std::set<std::string> out;
  std::set<std::string> seen;
  std::function<void(const Rule&)> visit = [&](const Rule& rr) {
    RuleRefs refs = rule_refs(rr, spec.intermediates);
    out.insert(refs.states.begin(), refs.states.end());
    for (const auto& u : refs.intermediates) {
      if (!seen.insert(u).second) continue;
      for (const auto& def : spec.rules)
        if (def.kind == Rule::Kind::MapSum && def.target == u) visit(def);
    }
  };
  visit(r);
  return out;
}

// A delta exit check for a rule can fire only if something reachable stores
// one of the state vars it reads or the intermediates it mentions (whose
// maintenance writes are themselves stores). Naive checks recompute from
// scratch, so their footprint is the transitive state set.
bool rule_retained_delta(const Rule& r, const InvariantSpec& spec,
                         const std::set<std::string>& reach) {
  RuleRefs refs = rule_refs(r, spec.intermediates);
  for (const auto& v : refs.states)
    if (reach.count(v)) return true;
  for (const auto& u : refs.intermediates)
    if (reach.count(intermediate_state_name(u))) return true;
  return false;
}

bool rule_retained_naive(const Rule& r, const InvariantSpec& spec,
                         const std::set<std::string>& reach) {
  for (const auto& v : transitive_states(r, spec))
    if (reach.count(v)) return true;
  return false;
}

LoopCandidates rule_loop_candidates(const Rule& r, const NameEnv& env) {
  LoopCandidates out;
  if (r.kind == Rule::Kind::MapSum) {
    collect_loop_candidates(to_template(r.body, env), true, out);
    if (r.where)
      for (const auto& c : to_conjuncts(r.where, env)) collect_loop_candidates(c, true, out);
  } else {
    for (const auto& c : to_conjuncts(r.assert_body, env)) collect_loop_candidates(c, true, out);
  }
  return out;
}

// if c { t = load v[x..]; t' = t -/+ e; store v[x..], t'; }
std::vector<TStmtPtr> update_template(const Rule& r, const NameEnv& env, bool add) {
  std::vector<TExprPtr> idx;
  for (const auto& x : r.index_vars) idx.push_back(TExpr::make_free(x));
  TExprPtr read = TExpr::make_read(env.find(r.target)->contract_name, idx);
  TExprPtr val = TExpr::make_binop(add ? BinOpKind::Add : BinOpKind::Sub, read,
                                   to_template(r.body, env));
  TStmtPtr st = TStmt::store(env.find(r.target)->contract_name, idx, val);
  if (!r.where) return {st};
  return {TStmt::if_(to_conjuncts(r.where, env), {st})};
}

StmtList gated(StmtList block) {
  CExprPtr cond =
      CExpr::make_binop(BinOpKind::Eq, CExpr::make_temp(kCdT1), CExpr::make_int(1));
  StmtList out;
  out.push_back(Statement::if_(std::move(cond), std::move(block)));
  return out;
}

StmtList with_plumbing(StmtList body, StmtList checks) {
  StmtList out;
  out.push_back(Statement::load(kCdT, Address{kCd, {}}));
  out.push_back(Statement::assign(
      kCdT1, CExpr::make_binop(BinOpKind::Add, CExpr::make_temp(kCdT), CExpr::make_int(1))));
  out.push_back(Statement::store(Address{kCd, {}}, CExpr::make_temp(kCdT1)));
  for (auto& s : body) out.push_back(std::move(s));
  for (auto& s : checks) out.push_back(std::move(s));
  out.push_back(Statement::store(Address{kCd, {}}, CExpr::make_temp(kCdT)));
  return out;
}

// --------------------------------------------------------------------------

class Instrumenter {
 public:
  Instrumenter(const Program& program, const TypedSpec& spec, InstrumentMode mode,
               InstrumentOptions opts, InstrumentStats* stats)
      : input_(program), spec_(spec), mode_(mode), opts_(opts) {
    stats_ = stats ? stats : &own_stats_;
  }

  Program run() {
    ensure_no_reserved(input_);
    if (mode_ == InstrumentMode::None) return input_;
    build_envs();
    Program cur = input_;
    if (mode_ == InstrumentMode::Delta) run_delta_passes(cur);
    append_checks_and_plumbing(cur);
    check_program(cur);
    return cur;
  }

 private:
  void build_envs() {
    for (const auto& d : input_.decls) env_.table[d.name] = {d.name, d.arity};
    naive_env_ = env_;
    for (const auto& [name, arity] : spec_.spec.intermediates) {
      env_.table[name] = {intermediate_state_name(name), arity};
      naive_env_.table[name] = {intermediate_memory_name(name), arity};
    }
  }

  // One pass per rule; each pass sees the stores inserted by earlier rules,
  // so updates to an intermediate mark the assertions that mention it.
  void run_delta_passes(Program& cur) {
    for (size_t k = 0; k < spec_.spec.rules.size(); ++k) {
      const Rule& r = spec_.spec.rules[k];
      Program next = cur;
      std::set<const Statement*> touched;
      if (r.kind == Rule::Kind::MapSum) {
        next.decls.push_back({intermediate_state_name(r.target),
                              static_cast<int>(r.index_vars.size()), VarKind::State});
        auto pre_t = update_template(r, env_, false);
        auto post_t = update_template(r, env_, true);
        LoopCandidates cands = rule_loop_candidates(r, env_);
        for (auto& f : next.functions) {
          f.body = transform_stores(f.body, [&](const StmtPtr& s, StmtList& pre,
                                                StmtList& post) {
            BindingSet b = bind_expr(s->addr, r.body, env_);
            if (r.where) b = union_sets(std::move(b), bind_expr(s->addr, r.where, env_));
            if (b.maps.empty()) return;
            CondBinding cb = r.where ? bind_cond(s->addr, r.where) : CondBinding::none();
            pre = rewrite(pre_t, b, cb, cands, env_, names_);
            post = rewrite(post_t, b, cb, cands, env_, names_);
            stats_->updates_emitted += 2;
            touched.insert(s.get());
          });
        }
      } else {
        next.decls.push_back(
            {marker_name(k), static_cast<int>(r.quant_vars.size()), VarKind::Memory});
        std::vector<TExprPtr> idx;
        for (const auto& q : r.quant_vars) idx.push_back(TExpr::make_free(q));
        std::vector<TStmtPtr> marker_t = {
            TStmt::store(marker_name(k), idx, TExpr::make_int(1))};
        LoopCandidates cands = rule_loop_candidates(r, env_);
        for (auto& f : next.functions) {
          f.body = transform_stores(f.body, [&](const StmtPtr& s, StmtList& pre,
                                                StmtList& post) {
            BindingSet b = bind_expr(s->addr, r.assert_body, env_);
            if (b.maps.empty()) return;
            // Markers both before and after the store: the binding
            // expressions may read state the store changes, so the old and
            // the new instance both get rechecked.
            pre = rewrite(marker_t, b, CondBinding::none(), cands, env_, names_);
            post = rewrite(marker_t, b, CondBinding::none(), cands, env_, names_);
            stats_->markers_emitted += 2;
            touched.insert(s.get());
          });
        }
      }
      stats_->stores_instrumented += static_cast<int>(touched.size());
      cur = std::move(next);
    }
  }

  void append_checks_and_plumbing(Program& cur) {
    bool have_cd = false;
    std::map<std::string, int> extra_decls;
    for (auto& f : cur.functions) {
      if (!f.is_entry) continue;
      std::set<std::string> reach = reachable_stores(cur, f.name);
      StmtList checks;
      std::set<size_t> kept_forall;
      for (size_t k = 0; k < spec_.spec.rules.size(); ++k) {
        const Rule& r = spec_.spec.rules[k];
        if (r.kind != Rule::Kind::ForAllAssert) continue;
        if (opts_.prune && !rule_retained(r, reach)) {
          ++stats_->checks_pruned;
          continue;
        }
        kept_forall.insert(k);
      }
      if (mode_ == InstrumentMode::Delta) {
        // All retained checks live in one gated block and are lowered
        // together, so reads shared between rules (and hoisted
        // quantifier-independent reads) load once per transaction.
        std::vector<TStmtPtr> blocks;
        for (size_t k : kept_forall) {
          for (auto& s : delta_check_block(spec_.spec.rules[k], k))
            blocks.push_back(std::move(s));
          ++stats_->checks_emitted;
        }
        if (!blocks.empty()) {
          StmtList lowered = lower_templates(blocks, names_);
          for (auto& s : gated(std::move(lowered))) checks.push_back(std::move(s));
        }
      } else {
        // Naive mode recomputes every referenced intermediate inline inside
        // the assertion loops; rule blocks are lowered independently (the
        // baseline shares nothing).
        StmtList all;
        for (size_t k : kept_forall) {
          StmtList block = naive_assert_block(spec_.spec.rules[k], k, extra_decls);
          for (auto& s : block) all.push_back(std::move(s));
          ++stats_->checks_emitted;
        }
        if (!all.empty())
          for (auto& s : gated(std::move(all))) checks.push_back(std::move(s));
      }
      f.body = with_plumbing(std::move(f.body), std::move(checks));
      have_cd = true;
    }
    if (have_cd) cur.decls.push_back({kCd, 0, VarKind::State});
    for (const auto& [d, arity] : extra_decls)
      cur.decls.push_back({d, arity, VarKind::Memory});
  }

  bool rule_retained(const Rule& r, const std::set<std::string>& reach) const {
    return mode_ == InstrumentMode::Delta ? rule_retained_delta(r, spec_.spec, reach)
                                          : rule_retained_naive(r, spec_.spec, reach);
  }

  std::vector<TStmtPtr> assert_conjuncts(const Rule& r, const NameEnv& env) {
    std::vector<TStmtPtr> out;
    for (const auto& c : to_conjuncts(r.assert_body, env)) out.push_back(TStmt::assert_(c));
    return out;
  }

  // for q.. in __mk_k { assert body }; quantifier variable names double as
  // loop temps (the spec checker keeps them disjoint from contract temps).
  // Reads that do not depend on the quantifier variables are hoisted in
  // front of the loop so each loads once per transaction, not per instance.
  std::vector<TStmtPtr> delta_check_block(const Rule& r, size_t k) {
    std::vector<TStmtPtr> asserts = assert_conjuncts(r, env_);
    std::vector<TStmtPtr> block;
    std::function<void(const TExprPtr&)> hoist = [&](const TExprPtr& e) {
      if (!e) return;
      if (e->kind == TExpr::Kind::StateRead) {
        std::vector<std::string> fv;
        free_vars_of(e, fv);
        if (fv.empty()) {
          block.push_back(TStmt::read(e->name, e->indices));
          return;
        }
        for (const auto& ix : e->indices) hoist(ix);
      } else if (e->kind == TExpr::Kind::BinOp) {
        hoist(e->lhs);
        hoist(e->rhs);
      }
    };
    for (const auto& st : asserts) hoist(st->value);
    if (r.quant_vars.empty()) {
      block.push_back(TStmt::if_({TExpr::make_read(marker_name(k), {})}, std::move(asserts)));
      return block;
    }
    std::vector<TStmtPtr> body;
    for (auto st : asserts) {
      for (const auto& q : r.quant_vars) st = substitute_free(st, q, TExpr::make_temp(q));
      body.push_back(st);
    }
    block.push_back(TStmt::for_in(r.quant_vars, marker_name(k), std::move(body)));
    return block;
  }

  static void free_vars_of(const TExprPtr& e, std::vector<std::string>& out) {
    if (!e) return;
    if (e->kind == TExpr::Kind::FreeVar) {
      out.push_back(e->name);
      return;
    }
    if (e->kind == TExpr::Kind::BinOp) {
      free_vars_of(e->lhs, out);
      free_vars_of(e->rhs, out);
    }
    if (e->kind == TExpr::Kind::StateRead)
      for (const auto& ix : e->indices) free_vars_of(ix, out);
  }

  // ------------------------------------------------------------------
  // Naive recheck blocks. Each retained assertion iterates the full
  // quantifier domain and recomputes every referenced intermediate inline as
  // a nested sum, exactly the "brute force check at the end of every
  // transaction" baseline.

  const Rule* rule_of_intermediate(const std::string& target) const {
    for (const auto& r : spec_.spec.rules)
      if (r.kind == Rule::Kind::MapSum && r.target == target) return &r;
    return nullptr;
  }

  size_t rule_index_of(const Rule* r) const {
    for (size_t k = 0; k < spec_.spec.rules.size(); ++k)
      if (&spec_.spec.rules[k] == r) return k;
    throw Error("Internal", "rule not in spec");
  }

  int arity_of(const std::string& contract_name) const {
    if (const StateDecl* d = input_.find_decl(contract_name)) return d->arity;
    for (const auto& [name, arity] : spec_.spec.intermediates)
      if (intermediate_memory_name(name) == contract_name ||
          intermediate_state_name(name) == contract_name)
        return arity;
    if (contract_name.rfind("__dm_", 0) == 0) return 1;
    throw Error("Internal", "unknown arity for " + contract_name);
  }

  static std::string scratch_name(size_t rule, const std::string& var) {
    return "__dm_" + std::to_string(rule) + "_" + var;
  }
  static std::string flag_name(size_t rule, const std::string& var) {
    return "__fl_" + std::to_string(rule) + "_" + var;
  }

  // (map occurrence, position) sources of a rule variable, in the invariant
  // name space.
  std::vector<std::pair<std::string, int>> var_sources(const Rule& r,
                                                       const std::string& v) const {
    LoopCandidates cands = rule_loop_candidates(r, naive_env_);
    std::set<std::pair<std::string, int>> seen;
    if (auto it = cands.find(v); it != cands.end()) {
      for (const auto& c : it->second)
        for (size_t i = 0; i < c.occurrence_indices.size(); ++i) {
          const auto& ix = c.occurrence_indices[i];
          if (ix->kind == TExpr::Kind::FreeVar && ix->name == v)
            seen.insert({c.map, static_cast<int>(i)});
        }
    }
    return {seen.begin(), seen.end()};
  }

  bool is_naive_intermediate(const std::string& contract_name) const {
    return contract_name.rfind("__nv_", 0) == 0;
  }

  struct NaiveCtx {
    std::set<std::string> built;           // scratches already collected
    std::vector<TStmtPtr> collect;         // domain machinery, quant-independent
    std::map<std::string, int>* decls;     // program-level memory declarations
  };

  // Builds the domain scratch __dm_<j>_<v> for variable v of rule j:
  // projections of state-map keys, plus (for an intermediate source) the
  // defining rule's index-variable domain at that position, gated on every
  // index domain of that rule being non-empty -- the key-set of an empty
  // product is empty.
  void build_domain_scratch(size_t j, const Rule& rule, const std::string& v, NaiveCtx& ctx) {
    std::string scratch = scratch_name(j, v);
    if (!ctx.built.insert(scratch).second) return;
    (*ctx.decls)[scratch] = 1;
    (*ctx.decls)[flag_name(j, v)] = 0;
    for (const auto& [m, pos] : var_sources(rule, v)) {
      if (!is_naive_intermediate(m)) {
        int arity = arity_of(m);
        std::vector<std::string> temps;
        std::vector<TExprPtr> refs;
        for (int i = 0; i < arity; ++i) {
          temps.push_back(names_.temp());
          refs.push_back(TExpr::make_temp(temps.back()));
        }
        std::vector<TStmtPtr> body;
        body.push_back(TStmt::read(m, refs));
        body.push_back(TStmt::store(scratch, {refs[static_cast<size_t>(pos)]},
                                    TExpr::make_int(1)));
        body.push_back(TStmt::store(flag_name(j, v), {}, TExpr::make_int(1)));
        ctx.collect.push_back(TStmt::for_in(temps, m, std::move(body)));
      } else {
        const Rule* def = rule_of_intermediate(m.substr(5));
        if (!def) throw Error("Internal", "undefined intermediate " + m);
        size_t dj = rule_index_of(def);
        for (const auto& w : def->index_vars) build_domain_scratch(dj, *def, w, ctx);
        // copy dom(index_var[pos]) gated on all index domains non-empty
        std::vector<TExprPtr> conj;
        for (const auto& w : def->index_vars)
          conj.push_back(TExpr::make_read(flag_name(dj, w), {}));
        const std::string& src_var = def->index_vars[static_cast<size_t>(pos)];
        std::string t = names_.temp();
        std::vector<TStmtPtr> body;
        body.push_back(TStmt::read(scratch_name(dj, src_var), {TExpr::make_temp(t)}));
        body.push_back(TStmt::store(scratch, {TExpr::make_temp(t)}, TExpr::make_int(1)));
        body.push_back(TStmt::store(flag_name(j, v), {}, TExpr::make_int(1)));
        TStmtPtr loop = TStmt::for_in({t}, scratch_name(dj, src_var), std::move(body));
        ctx.collect.push_back(conj.empty() ? loop : TStmt::if_(std::move(conj), {loop}));
      }
    }
  }

  // Iteration for one rule variable: directly over a single arity-1 state
  // map, otherwise over its scratch (with an anchor read for iterator usage).
  TStmtPtr var_loop(size_t j, const Rule& rule, const std::string& v,
                    const std::string& loop_temp, std::vector<TStmtPtr> body, NaiveCtx& ctx) {
    auto sources = var_sources(rule, v);
    std::set<std::string> maps;
    for (const auto& [m, pos] : sources) maps.insert(m);
    if (maps.size() == 1 && !is_naive_intermediate(*maps.begin()) &&
        arity_of(*maps.begin()) == 1)
      return TStmt::for_in({loop_temp}, *maps.begin(), std::move(body));
    build_domain_scratch(j, rule, v, ctx);
    std::vector<TStmtPtr> inner;
    inner.push_back(TStmt::read(scratch_name(j, v), {TExpr::make_temp(loop_temp)}));
    for (auto& s : body) inner.push_back(std::move(s));
    return TStmt::for_in({loop_temp}, scratch_name(j, v), std::move(inner));
  }

  // Replaces reads of naive intermediates with inline sums; emitted
  // statements land in `sink` and the returned expression is a temp.
  TExprPtr expand_expr(const TExprPtr& e, std::vector<TStmtPtr>& sink, NaiveCtx& ctx) {
    switch (e->kind) {
      case TExpr::Kind::BinOp:
        return TExpr::make_binop(e->op, expand_expr(e->lhs, sink, ctx),
                                 expand_expr(e->rhs, sink, ctx));
      case TExpr::Kind::StateRead: {
        std::vector<TExprPtr> idx;
        for (const auto& ix : e->indices) idx.push_back(expand_expr(ix, sink, ctx));
        if (!is_naive_intermediate(e->name)) return TExpr::make_read(e->name, idx);
        const Rule* def = rule_of_intermediate(e->name.substr(5));
        if (!def) throw Error("Internal", "undefined intermediate " + e->name);
        return inline_sum(*def, idx, sink, ctx);
      }
      default:
        return e;
    }
  }

  // acc = 0; for over-vars { if where' { acc = acc + body' } }
  TExprPtr inline_sum(const Rule& def, const std::vector<TExprPtr>& index_exprs,
                      std::vector<TStmtPtr>& sink, NaiveCtx& ctx) {
    size_t dj = rule_index_of(&def);
    std::string acc = names_.temp();
    sink.push_back(TStmt::assign(acc, TExpr::make_int(0)));

    auto subst_rule_vars = [&](TExprPtr x, const std::map<std::string, TExprPtr>& env) {
      for (const auto& [v, repl] : env) x = substitute_free(x, v, repl);
      return x;
    };
    std::map<std::string, TExprPtr> env;
    for (size_t i = 0; i < def.index_vars.size(); ++i) env[def.index_vars[i]] = index_exprs[i];
    std::vector<std::string> over_temps;
    for (const auto& y : def.over_vars) {
      over_temps.push_back(names_.temp());
      env[y] = TExpr::make_temp(over_temps.back());
    }

    // innermost term, with nested intermediates expanded
    std::vector<TStmtPtr> term_sink;
    TExprPtr body_t = expand_expr(subst_rule_vars(to_template(def.body, naive_env_), env),
                                  term_sink, ctx);
    term_sink.push_back(TStmt::assign(
        acc, TExpr::make_binop(BinOpKind::Add, TExpr::make_temp(acc), body_t)));
    std::vector<TStmtPtr> term;
    if (def.where) {
      std::vector<TStmtPtr> cond_sink;
      std::vector<TExprPtr> conj;
      for (auto c : to_conjuncts(def.where, naive_env_))
        conj.push_back(expand_expr(subst_rule_vars(c, env), cond_sink, ctx));
      cond_sink.push_back(TStmt::if_(std::move(conj), std::move(term_sink)));
      term = std::move(cond_sink);
    } else {
      term = std::move(term_sink);
    }

    for (size_t i = def.over_vars.size(); i-- > 0;)
      term = {var_loop(dj, def, def.over_vars[i], over_temps[i], std::move(term), ctx)};
    for (auto& s : term) sink.push_back(std::move(s));
    return TExpr::make_temp(acc);
  }

  StmtList naive_assert_block(const Rule& r, size_t k, std::map<std::string, int>& decls) {
    NaiveCtx ctx;
    ctx.decls = &decls;

    std::map<std::string, TExprPtr> env;
    for (const auto& q : r.quant_vars) env[q] = TExpr::make_temp(q);

    std::vector<TStmtPtr> inner;
    for (auto c : to_conjuncts(r.assert_body, naive_env_)) {
      for (const auto& [v, repl] : env) c = substitute_free(c, v, repl);
      inner.push_back(TStmt::assert_(expand_expr(c, inner, ctx)));
    }

    for (size_t i = r.quant_vars.size(); i-- > 0;)
      inner = {var_loop(k, r, r.quant_vars[i], r.quant_vars[i], std::move(inner), ctx)};

    std::vector<TStmtPtr> block = std::move(ctx.collect);
    for (auto& s : inner) block.push_back(std::move(s));
    return lower_templates(block, names_);
  }

  const Program& input_;
  const TypedSpec& spec_;
  InstrumentMode mode_;
  InstrumentOptions opts_;
  InstrumentStats* stats_;
  InstrumentStats own_stats_;
  NameEnv env_;        // intermediates -> persistent __iv_*
  NameEnv naive_env_;  // intermediates -> transaction memory __nv_*
  FreshNames names_;
};

}  // namespace

Program instrument(const Program& program, const TypedSpec& spec, InstrumentMode mode,
                   InstrumentOptions opts, InstrumentStats* stats) {
  InstrumentOptions inner = opts;
  bool want_cache = opts.cache;
  inner.cache = false;
  Instrumenter inst(program, spec, mode, inner, stats);
  Program out = inst.run();
  if (want_cache && mode != InstrumentMode::None) out = cache_state_vars(out, stats);
  return out;
}

namespace {

bool is_gate_cond(const CExprPtr& e) {
  return e->kind == CExpr::Kind::BinOp && e->op == BinOpKind::Eq &&
         e->lhs->kind == CExpr::Kind::TempRef && e->lhs->name == kCdT1 &&
         e->rhs->kind == CExpr::Kind::IntConst && e->rhs->value == 1;
}

void referenced_vars(const StmtList& body, std::set<std::string>& out) {
  for (const auto& s : body) {
    if (s->kind == Statement::Kind::Load || s->kind == Statement::Kind::Store)
      out.insert(s->addr.var);
    if (s->kind == Statement::Kind::ForIn) out.insert(s->callee);
    if (!s->body.empty()) referenced_vars(s->body, out);
  }
}

// Rules whose checks appear in a gated exit block. Delta blocks reference
// their rules' marker maps; naive blocks their domain scratches. A naive
// assertion over plain state has no such artifact; its rules are recognized
// by their transitive state footprint being referenced. Unidentifiable
// content is reported as such so the caller keeps the block.
std::pair<std::set<size_t>, bool> rules_in_block(const StmtList& block,
                                                 const InvariantSpec& spec) {
  std::set<std::string> refs;
  referenced_vars(block, refs);
  std::set<size_t> rules;
  std::set<std::string> plain;
  for (const auto& v : refs) {
    if (v.rfind("__mk_", 0) == 0)
      rules.insert(static_cast<size_t>(std::stoul(v.substr(5))));
    else if (v.rfind("__dm_", 0) == 0)
      rules.insert(static_cast<size_t>(std::stoul(v.substr(5, v.find('_', 5) - 5))));
    else if (v.rfind("__fl_", 0) == 0)
      rules.insert(static_cast<size_t>(std::stoul(v.substr(5, v.find('_', 5) - 5))));
    else if (!is_reserved_name(v))
      plain.insert(v);
  }
  // Account for plain state referenced only by artifact-free rules.
  std::set<std::string> covered;
  for (size_t k : rules)
    for (const auto& v : transitive_states(spec.rules[k], spec)) covered.insert(v);
  std::set<std::string> leftover;
  for (const auto& v : plain)
    if (!covered.count(v)) leftover.insert(v);
  bool all_identified = true;
  if (!leftover.empty()) {
    for (size_t k = 0; k < spec.rules.size(); ++k) {
      if (spec.rules[k].kind != Rule::Kind::ForAllAssert || rules.count(k)) continue;
      auto footprint = transitive_states(spec.rules[k], spec);
      bool subset = !footprint.empty();
      for (const auto& v : footprint)
        if (!leftover.count(v) && !covered.count(v)) subset = false;
      if (subset) {
        rules.insert(k);
        for (const auto& v : footprint) {
          covered.insert(v);
          leftover.erase(v);
        }
      }
    }
    if (!leftover.empty()) all_identified = false;
  }
  return {rules, all_identified};
}

}  // namespace

// Standalone check pruning over an already instrumented program. The whole
// gated exit block of an entry function is removed when every rule checked
// in it is unaffected by the function's reachable stores; instrument() with
// the prune option filters rule by rule at emission time instead.
Program prune_checks(const Program& instrumented, const TypedSpec& spec,
                     InstrumentStats* stats) {
  bool naive = false;
  for (const auto& d : instrumented.decls)
    if (d.name.rfind("__dm_", 0) == 0 || d.name.rfind("__fl_", 0) == 0) naive = true;
  bool delta = false;
  for (const auto& d : instrumented.decls)
    if (d.name.rfind("__iv_", 0) == 0 || d.name.rfind("__mk_", 0) == 0) delta = true;
  naive = naive || !delta;
  Program out = instrumented;
  for (auto& f : out.functions) {
    if (!f.is_entry) continue;
    std::set<std::string> reach = reachable_stores(instrumented, f.name);
    auto retained = [&](size_t k) {
      const Rule& r = spec.spec.rules[k];
      return naive ? rule_retained_naive(r, spec.spec, reach)
                   : rule_retained_delta(r, spec.spec, reach);
    };
    StmtList body;
    for (const auto& s : f.body) {
      bool drop = false;
      if (s->kind == Statement::Kind::If && is_gate_cond(s->expr)) {
        auto [rules, identified] = rules_in_block(s->body, spec.spec);
        if (identified && !rules.empty()) {
          drop = true;
          for (size_t k : rules)
            if (retained(k)) drop = false;
          if (drop && stats) stats->checks_pruned += static_cast<int>(rules.size());
        }
      }
      if (!drop) body.push_back(s);
    }
    f.body = std::move(body);
  }
  return out;
}

// --------------------------------------------------------------------------
// State-variable cache pass (per function): syntactically identical persistent
// addresses whose index temps never change are loaded once into a cache temp,
// read and written through it, and written back once at function exit, before
// calls, and before any potentially aliasing access to the same base map.

namespace {

struct CacheEntry {
  std::string temp;
  Address addr;
  bool dirty = false;
};

class CachePass {
 public:
  CachePass(const Program& p, InstrumentStats* stats) : prog_(p), stats_(stats) {}

  Program run() {
    Program out = prog_;
    for (auto& f : out.functions) f.body = run_function(f);
    check_program(out);
    return out;
  }

 private:
  // Temps whose value is fixed from their (single, top-level) assignment on:
  // everything else is unstable. A temp assigned inside a loop body varies
  // per iteration; one assigned in an if body may differ from its default;
  // params are stable only if never written.
  std::set<std::string> unstable_temps(const Function& f) {
    std::map<std::string, int> sites;
    std::set<std::string> unstable;
    std::function<void(const StmtList&, int)> scan = [&](const StmtList& body, int depth) {
      for (const auto& s : body) {
        if (s->kind == Statement::Kind::Assign || s->kind == Statement::Kind::Load) {
          ++sites[s->temp];
          if (depth > 0) unstable.insert(s->temp);
        }
        for (const auto& t : s->iters) unstable.insert(t);
        if (!s->body.empty()) scan(s->body, depth + 1);
      }
    };
    scan(f.body, 0);
    std::set<std::string> params(f.params.begin(), f.params.end());
    for (const auto& [t, n] : sites)
      if (n >= 2 || params.count(t)) unstable.insert(t);
    return unstable;
  }

  bool expr_stable(const CExprPtr& e, const std::set<std::string>& unstable) {
    switch (e->kind) {
      case CExpr::Kind::IntConst:
      case CExpr::Kind::Sender: return true;
      case CExpr::Kind::CallDepth: return false;
      case CExpr::Kind::TempRef: return !unstable.count(e->name);
      case CExpr::Kind::BinOp:
        return expr_stable(e->lhs, unstable) && expr_stable(e->rhs, unstable);
    }
    return false;
  }

  struct AddrUse {
    int loads = 0, stores = 0;
    bool first_is_load = false;
    bool eligible = true;
  };

  void collect_uses(const StmtList& body, const std::set<std::string>& unstable,
                    std::map<std::string, AddrUse>& uses) {
    for (const auto& s : body) {
      if (s->kind == Statement::Kind::Load || s->kind == Statement::Kind::Store) {
        const StateDecl* d = prog_.find_decl(s->addr.var);
        if (d && d->kind == VarKind::State) {
          std::string key = pretty_print(s->addr);
          auto& u = uses[key];
          bool stable = true;
          for (const auto& ix : s->addr.indices)
            if (!expr_stable(ix, unstable)) stable = false;
          if (!stable) u.eligible = false;
          if (s->kind == Statement::Kind::Load) {
            if (u.loads + u.stores == 0) u.first_is_load = true;
            ++u.loads;
          } else {
            ++u.stores;
          }
        }
      }
      if (!s->body.empty()) collect_uses(s->body, unstable, uses);
    }
  }

  StmtList run_function(const Function& f) {
    std::set<std::string> unstable = unstable_temps(f);
    std::map<std::string, AddrUse> uses;
    collect_uses(f.body, unstable, uses);
    cacheable_.clear();
    for (const auto& [key, u] : uses) {
      if (!u.eligible) continue;
      int orig = u.loads + u.stores;
      int cached = (u.first_is_load ? 1 : 0) + (u.stores > 0 ? 1 : 0);
      if (cached < orig) cacheable_.insert(key);
    }
    if (cacheable_.empty()) return f.body;
    if (stats_) stats_->cached_addresses += static_cast<int>(cacheable_.size());
    live_.clear();
    next_temp_ = 0;
    StmtList out = rewrite_block(f.body);
    flush_all(out);
    return out;
  }

  void flush_entry(const std::string& key, StmtList& out) {
    auto it = live_.find(key);
    if (it == live_.end()) return;
    if (it->second.dirty)
      out.push_back(Statement::store(it->second.addr, CExpr::make_temp(it->second.temp)));
    order_.erase(std::remove(order_.begin(), order_.end(), key), order_.end());
    live_.erase(it);
  }

  void flush_all(StmtList& out) {
    std::vector<std::string> keys = order_;
    for (const auto& k : keys) flush_entry(k, out);
  }

  void flush_base_conflicts(const std::string& var, const std::string& key, StmtList& out) {
    std::vector<std::string> victims;
    for (const auto& [k, e] : live_)
      if (e.addr.var == var && k != key) victims.push_back(k);
    for (const auto& k : victims) flush_entry(k, out);
  }

  // Flush anything a nested block could interfere with before entering it:
  // stores to a cached address, any same-base access under a different
  // address, iteration over a cached base, or a call.
  void flush_for_block(const StmtList& body, StmtList& out) {
    bool has_call = false;
    std::set<std::string> stored_keys;
    std::set<std::string> touched_bases;
    std::set<std::string> iterated;
    std::function<void(const StmtList&)> scan = [&](const StmtList& b) {
      for (const auto& s : b) {
        if (s->kind == Statement::Kind::Call) has_call = true;
        if (s->kind == Statement::Kind::ForIn) iterated.insert(s->callee);
        if (s->kind == Statement::Kind::Load || s->kind == Statement::Kind::Store) {
          touched_bases.insert(s->addr.var);
          if (s->kind == Statement::Kind::Store) stored_keys.insert(pretty_print(s->addr));
        }
        if (!s->body.empty()) scan(s->body);
      }
    };
    scan(body);
    if (has_call) {
      flush_all(out);
      return;
    }
    std::vector<std::string> victims;
    for (const auto& [k, e] : live_) {
      if (stored_keys.count(k) || iterated.count(e.addr.var)) {
        victims.push_back(k);
        continue;
      }
      // A different address on the same base may alias dynamically.
      if (touched_bases.count(e.addr.var)) {
        bool only_same = true;
        std::function<void(const StmtList&)> chk = [&](const StmtList& b) {
          for (const auto& s : b) {
            if ((s->kind == Statement::Kind::Load || s->kind == Statement::Kind::Store) &&
                s->addr.var == e.addr.var && pretty_print(s->addr) != k)
              only_same = false;
            if (!s->body.empty()) chk(s->body);
          }
        };
        chk(body);
        if (!only_same) victims.push_back(k);
      }
    }
    for (const auto& k : victims) flush_entry(k, out);
  }

  StmtList rewrite_block(const StmtList& body) {
    StmtList out;
    for (const auto& s : body) {
      switch (s->kind) {
        case Statement::Kind::Load: {
          std::string key = pretty_print(s->addr);
          if (!cacheable_.count(key)) {
            flush_base_conflicts(s->addr.var, key, out);
            out.push_back(s);
            break;
          }
          auto it = live_.find(key);
          if (it == live_.end()) {
            flush_base_conflicts(s->addr.var, key, out);
            std::string t = "__sc" + std::to_string(next_temp_++);
            out.push_back(Statement::load(t, s->addr));
            live_[key] = {t, s->addr, false};
            order_.push_back(key);
            out.push_back(Statement::assign(s->temp, CExpr::make_temp(t)));
          } else {
            out.push_back(Statement::assign(s->temp, CExpr::make_temp(it->second.temp)));
          }
          break;
        }
        case Statement::Kind::Store: {
          std::string key = pretty_print(s->addr);
          if (!cacheable_.count(key)) {
            flush_base_conflicts(s->addr.var, key, out);
            out.push_back(s);
            break;
          }
          auto it = live_.find(key);
          if (it == live_.end()) {
            flush_base_conflicts(s->addr.var, key, out);
            std::string t = "__sc" + std::to_string(next_temp_++);
            out.push_back(Statement::assign(t, s->expr));
            live_[key] = {t, s->addr, true};
            order_.push_back(key);
          } else {
            out.push_back(Statement::assign(it->second.temp, s->expr));
            it->second.dirty = true;
          }
          break;
        }
        case Statement::Kind::Call:
          flush_all(out);
          out.push_back(s);
          break;
        case Statement::Kind::If:
        case Statement::Kind::ForIn: {
          flush_for_block(s->body, out);
          // Entries created inside the block are flushed at its end, so the
          // live set is unchanged across it.
          auto saved_live = live_;
          auto saved_order = order_;
          StmtList inner = rewrite_block(s->body);
          std::vector<std::string> created;
          for (const auto& k : order_)
            if (!saved_live.count(k)) created.push_back(k);
          for (const auto& k : created) flush_entry(k, inner);
          auto n = std::make_shared<Statement>(*s);
          n->body = std::move(inner);
          out.push_back(std::move(n));
          live_ = std::move(saved_live);
          order_ = std::move(saved_order);
          break;
        }
        default:
          out.push_back(s);
          break;
      }
    }
    return out;
  }

  const Program& prog_;
  InstrumentStats* stats_;
  std::set<std::string> cacheable_;
  std::map<std::string, CacheEntry> live_;
  std::vector<std::string> order_;
  int next_temp_ = 0;
};

}  // namespace

Program cache_state_vars(const Program& program, InstrumentStats* stats) {
  return CachePass(program, stats).run();
}

std::string stats_json(const InstrumentStats& s) {
  nlohmann::json j{{"stores_instrumented", s.stores_instrumented},
                   {"updates_emitted", s.updates_emitted},
                   {"markers_emitted", s.markers_emitted},
                   {"checks_emitted", s.checks_emitted},
                   {"checks_pruned", s.checks_pruned},
                   {"cached_addresses", s.cached_addresses}};
  return j.dump(2);
}

}  // namespace ivc
