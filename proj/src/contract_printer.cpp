#include <sstream>

#include "ivc/contract_lang.hpp"

namespace ivc {

namespace {

int precedence(BinOpKind op) {
  if (is_comparison(op)) return 1;
  if (op == BinOpKind::Add || op == BinOpKind::Sub) return 2;
  return 3;
}

void print_expr(std::ostream& os, const CExprPtr& e, int parent_prec, bool right_side) {
  switch (e->kind) {
    case CExpr::Kind::IntConst: os << e->value.str(); return;
    case CExpr::Kind::TempRef: os << e->name; return;
    case CExpr::Kind::Sender: os << "sender"; return;
    case CExpr::Kind::CallDepth: os << "calldepth"; return;
    case CExpr::Kind::BinOp: {
      int p = precedence(e->op);
      bool parens = p < parent_prec || (p == parent_prec && (right_side || p == 1));
      if (parens) os << "(";
      print_expr(os, e->lhs, p, false);
      os << " " << binop_text(e->op) << " ";
      print_expr(os, e->rhs, p, true);
      if (parens) os << ")";
      return;
    }
  }
}

void print_addr(std::ostream& os, const Address& a) {
  os << a.var;
  for (const auto& ix : a.indices) {
    os << "[";
    print_expr(os, ix, 0, false);
    os << "]";
  }
}

void print_stmts(std::ostream& os, const StmtList& body, int depth) {
  std::string pad(static_cast<size_t>(depth) * 2, ' ');
  for (const auto& s : body) {
    os << pad;
    switch (s->kind) {
      case Statement::Kind::Assign:
        os << s->temp << " = ";
        print_expr(os, s->expr, 0, false);
        os << ";\n";
        break;
      case Statement::Kind::Load:
        os << s->temp << " = load ";
        print_addr(os, s->addr);
        os << ";\n";
        break;
      case Statement::Kind::Store:
        os << "store ";
        print_addr(os, s->addr);
        os << ", ";
        print_expr(os, s->expr, 0, false);
        os << ";\n";
        break;
      case Statement::Kind::If:
        os << "if ";
        print_expr(os, s->expr, 0, false);
        os << " {\n";
        print_stmts(os, s->body, depth + 1);
        os << pad << "}\n";
        break;
      case Statement::Kind::ForIn: {
        os << "for ";
        for (size_t i = 0; i < s->iters.size(); ++i)
          os << (i ? ", " : "") << s->iters[i];
        os << " in " << s->callee << " {\n";
        print_stmts(os, s->body, depth + 1);
        os << pad << "}\n";
        break;
      }
      case Statement::Kind::Assert:
        os << "assert ";
        print_expr(os, s->expr, 0, false);
        os << ";\n";
        break;
      case Statement::Kind::Call: {
        os << "call " << s->callee << "(";
        for (size_t i = 0; i < s->args.size(); ++i) {
          if (i) os << ", ";
          print_expr(os, s->args[i], 0, false);
        }
        os << ");\n";
        break;
      }
    }
  }
}

}  // namespace

std::string pretty_print(const CExprPtr& e) {
  std::ostringstream os;
  print_expr(os, e, 0, false);
  return os.str();
}

std::string pretty_print(const Address& a) {
  std::ostringstream os;
  print_addr(os, a);
  return os.str();
}

std::string pretty_print(const Program& p) {
  std::ostringstream os;
  for (const auto& d : p.decls) {
    os << (d.kind == VarKind::State ? "state " : "memory ") << d.name << ": ";
    if (d.arity == 0)
      os << "int";
    else
      os << "map^" << d.arity;
    os << ";\n";
  }
  for (const auto& f : p.functions) {
    os << "\n";
    if (f.is_entry) os << "entry ";
    os << "fn " << f.name << "(";
    for (size_t i = 0; i < f.params.size(); ++i) os << (i ? ", " : "") << f.params[i];
    os << ") {\n";
    print_stmts(os, f.body, 1);
    os << "}\n";
  }
  return os.str();
}

bool equal(const CExprPtr& a, const CExprPtr& b) {
  if (!a || !b) return !a && !b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case CExpr::Kind::IntConst: return a->value == b->value;
    case CExpr::Kind::TempRef: return a->name == b->name;
    case CExpr::Kind::Sender:
    case CExpr::Kind::CallDepth: return true;
    case CExpr::Kind::BinOp:
      return a->op == b->op && equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
  }
  return false;
}

bool equal(const Address& a, const Address& b) {
  if (a.var != b.var || a.indices.size() != b.indices.size()) return false;
  for (size_t i = 0; i < a.indices.size(); ++i)
    if (!equal(a.indices[i], b.indices[i])) return false;
  return true;
}

bool equal(const StmtPtr& a, const StmtPtr& b) {
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Statement::Kind::Assign:
      return a->temp == b->temp && equal(a->expr, b->expr);
    case Statement::Kind::Load:
      return a->temp == b->temp && equal(a->addr, b->addr);
    case Statement::Kind::Store:
      return equal(a->addr, b->addr) && equal(a->expr, b->expr);
    case Statement::Kind::If:
      return equal(a->expr, b->expr) && equal(a->body, b->body);
    case Statement::Kind::ForIn:
      return a->iters == b->iters && a->callee == b->callee && equal(a->body, b->body);
    case Statement::Kind::Assert:
      return equal(a->expr, b->expr);
    case Statement::Kind::Call: {
      if (a->callee != b->callee || a->args.size() != b->args.size()) return false;
      for (size_t i = 0; i < a->args.size(); ++i)
        if (!equal(a->args[i], b->args[i])) return false;
      return true;
    }
  }
  return false;
}

bool equal(const StmtList& a, const StmtList& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!equal(a[i], b[i])) return false;
  return true;
}

bool equal(const Program& a, const Program& b) {
  if (a.decls.size() != b.decls.size() || a.functions.size() != b.functions.size()) return false;
  for (size_t i = 0; i < a.decls.size(); ++i) {
    const auto& da = a.decls[i];
    const auto& db = b.decls[i];
    if (da.name != db.name || da.arity != db.arity || da.kind != db.kind) return false;
  }
  for (size_t i = 0; i < a.functions.size(); ++i) {
    const auto& fa = a.functions[i];
    const auto& fb = b.functions[i];
    if (fa.name != fb.name || fa.params != fb.params || fa.is_entry != fb.is_entry) return false;
    if (!equal(fa.body, fb.body)) return false;
  }
  return true;
}

}  // namespace ivc
