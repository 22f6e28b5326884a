#include <functional>
#include <set>

#include "ivc/contract_lang.hpp"

namespace ivc {

bool is_reserved_name(const std::string& n) { return n.rfind("__", 0) == 0; }

namespace {

void walk_exprs(const CExprPtr& e, const std::function<void(const CExpr&)>& fn) {
  if (!e) return;
  fn(*e);
  if (e->kind == CExpr::Kind::BinOp) {
    walk_exprs(e->lhs, fn);
    walk_exprs(e->rhs, fn);
  }
}

// True if `temp` appears as the index expression (exactly a TempRef) of the
// named map anywhere in `body`, or of any map when `map` is empty.
bool used_as_index(const StmtList& body, const std::string& temp, const std::string& map) {
  for (const auto& s : body) {
    const Address* a = nullptr;
    if (s->kind == Statement::Kind::Load || s->kind == Statement::Kind::Store) a = &s->addr;
    if (a && (map.empty() || a->var == map)) {
      for (const auto& ix : a->indices)
        if (ix->kind == CExpr::Kind::TempRef && ix->name == temp) return true;
    }
    if (!s->body.empty() && used_as_index(s->body, temp, map)) return true;
  }
  return false;
}

class Checker {
 public:
  Checker(const Program& p, ParseOptions opts) : p_(p), opts_(opts) {}

  void run() {
    std::set<std::string> names;
    for (const auto& d : p_.decls) {
      if (!names.insert(d.name).second)
        throw CheckError("DuplicateState", "state variable '" + d.name + "' declared twice");
      check_name(d.name);
    }
    std::set<std::string> fns;
    for (const auto& f : p_.functions) {
      if (!fns.insert(f.name).second)
        throw CheckError("DuplicateFunction", "function '" + f.name + "' defined twice");
      check_name(f.name);
    }
    for (const auto& f : p_.functions) check_function(f);
  }

 private:
  void check_name(const std::string& n) {
    if (opts_.reject_reserved && is_reserved_name(n))
      throw CheckError("ReservedIdentifier",
                       "'" + n + "' uses the reserved '__' instrumentation namespace");
  }

  void check_function(const Function& f) {
    std::set<std::string> defined;
    for (const auto& prm : f.params) {
      check_name(prm);
      if (!defined.insert(prm).second)
        throw CheckError("DuplicateParam", "parameter '" + prm + "' duplicated in " + f.name);
    }
    check_block(f.body, defined, f.name);
  }

  void check_expr(const CExprPtr& e, const std::set<std::string>& defined,
                  const std::string& fn, SourcePos pos) {
    walk_exprs(e, [&](const CExpr& x) {
      if (x.kind == CExpr::Kind::TempRef && !defined.count(x.name))
        throw CheckError("UndeclaredTemp",
                         "temp '" + x.name + "' used before assignment in " + fn, pos);
    });
  }

  void check_addr(const Address& a, const std::set<std::string>& defined,
                  const std::string& fn, SourcePos pos) {
    const StateDecl* d = p_.find_decl(a.var);
    if (!d)
      throw CheckError("UnknownStateVar", "'" + a.var + "' is not declared in " + fn, pos);
    if (static_cast<int>(a.indices.size()) != d->arity)
      throw CheckError("AddressArityMismatch",
                       a.var + " has arity " + std::to_string(d->arity) + " but is indexed with " +
                           std::to_string(a.indices.size()) + " keys in " + fn,
                       pos);
    for (const auto& ix : a.indices) check_expr(ix, defined, fn, pos);
  }

  // Definitions made inside nested blocks propagate out; a temp read before
  // any textual assignment on every path evaluates to 0 at runtime, so the
  // static rule only rejects temps with no earlier assignment at all.
  void check_block(const StmtList& body, std::set<std::string>& defined, const std::string& fn) {
    for (const auto& s : body) {
      switch (s->kind) {
        case Statement::Kind::Assign:
          check_name(s->temp);
          check_expr(s->expr, defined, fn, s->pos);
          defined.insert(s->temp);
          break;
        case Statement::Kind::Load:
          check_name(s->temp);
          check_addr(s->addr, defined, fn, s->pos);
          defined.insert(s->temp);
          break;
        case Statement::Kind::Store:
          check_addr(s->addr, defined, fn, s->pos);
          check_expr(s->expr, defined, fn, s->pos);
          break;
        case Statement::Kind::Assert:
          check_expr(s->expr, defined, fn, s->pos);
          break;
        case Statement::Kind::If:
          check_expr(s->expr, defined, fn, s->pos);
          check_block(const_cast<StmtList&>(s->body), defined, fn);
          break;
        case Statement::Kind::ForIn:
          check_forin(*s, defined, fn);
          break;
        case Statement::Kind::Call: {
          const Function* callee = p_.find_function(s->callee);
          if (!callee)
            throw CheckError("UnknownCallee", "call to undefined function '" + s->callee + "'",
                             s->pos);
          if (callee->params.size() != s->args.size())
            throw CheckError("CallArityMismatch",
                             s->callee + " takes " + std::to_string(callee->params.size()) +
                                 " arguments, got " + std::to_string(s->args.size()),
                             s->pos);
          for (const auto& a : s->args) check_expr(a, defined, fn, s->pos);
          break;
        }
      }
    }
  }

  void check_forin(const Statement& s, std::set<std::string>& defined, const std::string& fn) {
    const StateDecl* d = p_.find_decl(s.callee);
    if (!d)
      throw CheckError("UnknownStateVar", "'" + s.callee + "' is not declared in " + fn, s.pos);
    if (d->arity == 0)
      throw CheckError("ForInScalar", "cannot iterate scalar '" + s.callee + "'", s.pos);
    if (static_cast<int>(s.iters.size()) > d->arity)
      throw CheckError("ForInArityMismatch",
                       "for-in over " + s.callee + " names more temps than its arity", s.pos);
    std::set<std::string> seen;
    for (const auto& t : s.iters) {
      check_name(t);
      if (!seen.insert(t).second)
        throw CheckError("DuplicateParam", "iterator '" + t + "' duplicated", s.pos);
      if (defined.count(t))
        throw CheckError("IteratorShadowing", "iterator '" + t + "' shadows an existing temp",
                         s.pos);
      defined.insert(t);
    }
    check_block(const_cast<StmtList&>(s.body), defined, fn);
    // Full-tuple form binds positionally and only needs each temp used
    // somewhere; the projection form needs usage on the iterated map itself
    // to fix each temp's key positions.
    bool full_tuple = static_cast<int>(s.iters.size()) == d->arity;
    for (const auto& t : s.iters) {
      if (!used_as_index(s.body, t, full_tuple ? std::string() : s.callee))
        throw CheckError("ForInUnusedIterator",
                         "iterator '" + t + "' is not used as a map index in the loop body",
                         s.pos);
      defined.erase(t);
    }
  }

  const Program& p_;
  ParseOptions opts_;
};

}  // namespace

void check_program(const Program& p, ParseOptions opts) { Checker(p, opts).run(); }

std::map<std::string, std::set<std::string>> call_graph(const Program& p) {
  std::map<std::string, std::set<std::string>> g;
  std::function<void(const StmtList&, std::set<std::string>&)> scan =
      [&](const StmtList& body, std::set<std::string>& out) {
        for (const auto& s : body) {
          if (s->kind == Statement::Kind::Call) {
            if (!p.find_function(s->callee))
              throw CheckError("UnknownCallee", "call to undefined function '" + s->callee + "'");
            out.insert(s->callee);
          }
          if (!s->body.empty()) scan(s->body, out);
        }
      };
  for (const auto& f : p.functions) scan(f.body, g[f.name]);
  return g;
}

std::set<std::string> reachable_functions(const Program& p, const std::string& entry) {
  auto g = call_graph(p);
  std::set<std::string> seen;
  std::vector<std::string> work{entry};
  while (!work.empty()) {
    std::string f = work.back();
    work.pop_back();
    if (!seen.insert(f).second) continue;
    for (const auto& callee : g[f]) work.push_back(callee);
  }
  return seen;
}

}  // namespace ivc
