#include <functional>
#include <set>

#include "ivc/contract_lang.hpp"
#include "ivc/spec_ast.hpp"

namespace ivc {

namespace {

void collect_temps(const StmtList& body, std::set<std::string>& out) {
  for (const auto& s : body) {
    if (s->kind == Statement::Kind::Assign || s->kind == Statement::Kind::Load)
      out.insert(s->temp);
    for (const auto& it : s->iters) out.insert(it);
    if (!s->body.empty()) collect_temps(s->body, out);
  }
}

class SpecChecker {
 public:
  SpecChecker(const InvariantSpec& spec, const Program& prog) : spec_(spec), prog_(prog) {
    for (const auto& f : prog.functions) {
      contract_temps_.insert(f.params.begin(), f.params.end());
      collect_temps(f.body, contract_temps_);
    }
  }

  TypedSpec run() {
    TypedSpec out;
    out.spec = spec_;
    for (size_t i = 0; i < spec_.rules.size(); ++i) {
      const Rule& r = spec_.rules[i];
      rule_index_ = i;
      rule_vars_.clear();
      for (const auto& v : r.bound_vars()) declare_free_var(v, r.pos);
      for (const auto& v : r.over_vars) declare_free_var(v, r.pos);

      if (r.kind == Rule::Kind::MapSum) {
        if (prog_.find_decl(r.target))
          throw CheckError("DuplicateIntermediate",
                           "intermediate '" + r.target + "' collides with a contract state variable",
                           r.pos);
        check_expr(r.body, r.pos);
        if (r.where) check_cond(r.where, r.pos);
        intermediates_[r.target] = {ResolvedVar::Kind::Intermediate,
                                    static_cast<int>(r.index_vars.size()), i};
      } else {
        check_cond(r.assert_body, r.pos);
        // Each quantifier variable needs a map it indexes, which defines its
        // iteration domain.
        for (const auto& q : r.quant_vars) {
          if (!indexes_some_map(r.assert_body, q))
            throw CheckError("QuantVarNoDomain",
                             "quantifier variable '" + q +
                                 "' never indexes a map, so its domain is undefined",
                             r.pos);
        }
      }
    }
    for (const auto& [name, rv] : state_refs_) out.vars[name] = rv;
    for (const auto& [name, rv] : intermediates_) out.vars[name] = rv;
    return out;
  }

 private:
  // Free variables live in a namespace disjoint from state, intermediate and
  // contract temp names; substitution in the rewriter is capture-free because
  // of this.
  void declare_free_var(const std::string& v, SourcePos pos) {
    if (prog_.find_decl(v) || intermediates_.count(v))
      throw CheckError("FreeVarCollision",
                       "free variable '" + v + "' collides with a state or intermediate name",
                       pos);
    if (contract_temps_.count(v))
      throw CheckError("FreeVarCollision",
                       "free variable '" + v + "' collides with a contract temp name", pos);
    rule_vars_.insert(v);
  }

  void resolve_name(const std::string& name, int want_arity, SourcePos pos) {
    if (auto it = intermediates_.find(name); it != intermediates_.end()) {
      if (it->second.rule_index >= rule_index_)
        throw CheckError("UnknownVariable",
                         "intermediate '" + name + "' is not declared by an earlier rule", pos);
      if (it->second.arity != want_arity)
        throw CheckError("ArityMismatch",
                         name + " has arity " + std::to_string(it->second.arity) +
                             " but is used with " + std::to_string(want_arity) + " indices",
                         pos);
      return;
    }
    const StateDecl* d = prog_.find_decl(name);
    if (!d) throw CheckError("UnknownVariable", "'" + name + "' is not a contract state variable",
                             pos);
    if (d->arity != want_arity)
      throw CheckError("ArityMismatch",
                       name + " has arity " + std::to_string(d->arity) + " but is used with " +
                           std::to_string(want_arity) + " indices",
                       pos);
    state_refs_[name] = {ResolvedVar::Kind::State, d->arity, 0};
  }

  void check_expr(const IExprPtr& e, SourcePos pos) {
    switch (e->kind) {
      case IExpr::Kind::IntConst: return;
      case IExpr::Kind::FreeVarRef: return;  // resolution guarantees scope
      case IExpr::Kind::VarRef: resolve_name(e->name, 0, pos); return;
      case IExpr::Kind::MapAccess:
        resolve_name(e->name, static_cast<int>(e->indices.size()), pos);
        for (const auto& ix : e->indices)
          if (!rule_vars_.count(ix))
            throw CheckError("FreeVarScopeError",
                             "map index '" + ix + "' is not a free variable of this rule", pos);
        return;
      case IExpr::Kind::BinOp:
        check_expr(e->lhs, pos);
        check_expr(e->rhs, pos);
        return;
    }
  }

  void check_cond(const ICondPtr& c, SourcePos pos) {
    switch (c->kind) {
      case ICond::Kind::And:
        check_cond(c->cl, pos);
        check_cond(c->cr, pos);
        return;
      case ICond::Kind::Cmp:
        check_expr(c->lhs, pos);
        check_expr(c->rhs, pos);
        return;
      case ICond::Kind::EqFree: check_expr(c->expr, pos); return;
    }
  }

  bool indexes_some_map(const ICondPtr& c, const std::string& var) {
    bool found = false;
    std::function<void(const IExprPtr&)> scan_e = [&](const IExprPtr& e) {
      if (e->kind == IExpr::Kind::MapAccess) {
        for (const auto& ix : e->indices)
          if (ix == var) found = true;
      } else if (e->kind == IExpr::Kind::BinOp) {
        scan_e(e->lhs);
        scan_e(e->rhs);
      }
    };
    std::function<void(const ICondPtr&)> scan_c = [&](const ICondPtr& cc) {
      switch (cc->kind) {
        case ICond::Kind::And: scan_c(cc->cl); scan_c(cc->cr); return;
        case ICond::Kind::Cmp: scan_e(cc->lhs); scan_e(cc->rhs); return;
        case ICond::Kind::EqFree: scan_e(cc->expr); return;
      }
    };
    scan_c(c);
    return found;
  }

  const InvariantSpec& spec_;
  const Program& prog_;
  std::set<std::string> contract_temps_;
  size_t rule_index_ = 0;
  std::set<std::string> rule_vars_;
  std::map<std::string, ResolvedVar> intermediates_;
  std::map<std::string, ResolvedVar> state_refs_;
};

}  // namespace

TypedSpec check_spec(const InvariantSpec& spec, const Program& program) {
  return SpecChecker(spec, program).run();
}

}  // namespace ivc
