#include <sstream>

#include "ivc/spec_ast.hpp"

namespace ivc {

namespace {

int precedence(BinOpKind op) { return op == BinOpKind::Add || op == BinOpKind::Sub ? 1 : 2; }

void print_iexpr(std::ostream& os, const IExprPtr& e, int parent_prec, bool right_side) {
  switch (e->kind) {
    case IExpr::Kind::IntConst: os << e->value.str(); return;
    case IExpr::Kind::VarRef:
    case IExpr::Kind::FreeVarRef: os << e->name; return;
    case IExpr::Kind::MapAccess:
      os << e->name;
      for (const auto& ix : e->indices) os << "[" << ix << "]";
      return;
    case IExpr::Kind::BinOp: {
      int p = precedence(e->op);
      bool parens = p < parent_prec || (p == parent_prec && right_side);
      if (parens) os << "(";
      print_iexpr(os, e->lhs, p, false);
      os << " " << binop_text(e->op) << " ";
      print_iexpr(os, e->rhs, p, true);
      if (parens) os << ")";
      return;
    }
  }
}

void print_icond(std::ostream& os, const ICondPtr& c) {
  switch (c->kind) {
    case ICond::Kind::And:
      print_icond(os, c->cl);
      os << " && ";
      print_icond(os, c->cr);
      return;
    case ICond::Kind::Cmp:
      print_iexpr(os, c->lhs, 0, false);
      os << " " << binop_text(c->op) << " ";
      print_iexpr(os, c->rhs, 0, false);
      return;
    case ICond::Kind::EqFree:
      print_iexpr(os, c->expr, 0, false);
      os << " == " << c->var;
      return;
  }
}

void print_vars(std::ostream& os, const std::vector<std::string>& vars, bool leading_space) {
  for (size_t i = 0; i < vars.size(); ++i) os << (i ? ", " : (leading_space ? " " : "")) << vars[i];
}

}  // namespace

std::string pretty_print(const IExprPtr& e) {
  std::ostringstream os;
  print_iexpr(os, e, 0, false);
  return os.str();
}

std::string pretty_print(const ICondPtr& c) {
  std::ostringstream os;
  print_icond(os, c);
  return os.str();
}

std::string pretty_print(const InvariantSpec& s) {
  std::ostringstream os;
  for (const auto& r : s.rules) {
    if (r.kind == Rule::Kind::MapSum) {
      os << r.target << " = Map";
      print_vars(os, r.index_vars, true);
      os << " Sum ";
      print_iexpr(os, r.body, 0, false);
      os << " Over";
      print_vars(os, r.over_vars, true);
      if (r.where) {
        os << " Where ";
        print_icond(os, r.where);
      }
      os << ";\n";
    } else {
      os << "ForAll";
      print_vars(os, r.quant_vars, true);
      os << " Assert ";
      print_icond(os, r.assert_body);
      os << ";\n";
    }
  }
  return os.str();
}

bool equal(const IExprPtr& a, const IExprPtr& b) {
  if (!a || !b) return !a && !b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case IExpr::Kind::IntConst: return a->value == b->value;
    case IExpr::Kind::VarRef:
    case IExpr::Kind::FreeVarRef: return a->name == b->name;
    case IExpr::Kind::MapAccess: return a->name == b->name && a->indices == b->indices;
    case IExpr::Kind::BinOp:
      return a->op == b->op && equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
  }
  return false;
}

bool equal(const ICondPtr& a, const ICondPtr& b) {
  if (!a || !b) return !a && !b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ICond::Kind::Cmp:
      return a->op == b->op && equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
    case ICond::Kind::EqFree: return a->var == b->var && equal(a->expr, b->expr);
    case ICond::Kind::And: return equal(a->cl, b->cl) && equal(a->cr, b->cr);
  }
  return false;
}

bool equal(const InvariantSpec& a, const InvariantSpec& b) {
  if (a.rules.size() != b.rules.size()) return false;
  for (size_t i = 0; i < a.rules.size(); ++i) {
    const Rule& ra = a.rules[i];
    const Rule& rb = b.rules[i];
    if (ra.kind != rb.kind || ra.target != rb.target) return false;
    if (ra.index_vars != rb.index_vars || ra.over_vars != rb.over_vars ||
        ra.quant_vars != rb.quant_vars)
      return false;
    if (!equal(ra.body, rb.body) || !equal(ra.where, rb.where) ||
        !equal(ra.assert_body, rb.assert_body))
      return false;
  }
  return true;
}

}  // namespace ivc
