#include <algorithm>
#include <set>

#include "ivc/lexer.hpp"
#include "ivc/spec_ast.hpp"

namespace ivc {

namespace {

const std::set<std::string> kSpecKeywords = {"Map", "Sum", "Over", "Where", "ForAll", "Assert"};

class SpecParser {
 public:
  explicit SpecParser(const std::string& text) : lx_(text) {}

  InvariantSpec parse() {
    InvariantSpec out;
    while (!lx_.at_end()) {
      Rule r = parse_rule();
      if (r.kind == Rule::Kind::MapSum) {
        if (!out.intermediates.emplace(r.target, static_cast<int>(r.index_vars.size())).second)
          throw ParseError("DuplicateIntermediate",
                           "intermediate '" + r.target + "' declared twice", r.pos);
      }
      out.rules.push_back(std::move(r));
    }
    return out;
  }

 private:
  Rule parse_rule() {
    Rule r;
    r.pos = lx_.peek().pos;
    if (lx_.accept_ident("ForAll")) {
      r.kind = Rule::Kind::ForAllAssert;
      r.quant_vars = parse_var_list("Assert");
      lx_.expect_keyword("Assert");
      r.assert_body = parse_cond();
      lx_.expect_punct(";");
      resolve_rule(r);
      return r;
    }
    r.kind = Rule::Kind::MapSum;
    r.target = expect_name();
    lx_.expect_punct("=");
    lx_.expect_keyword("Map");
    r.index_vars = parse_var_list("Sum");
    lx_.expect_keyword("Sum");
    r.body = parse_expr();
    lx_.expect_keyword("Over");
    if (!lx_.is_punct(";") && !lx_.is_ident("Where")) {
      r.over_vars.push_back(expect_name());
      while (lx_.accept_punct(",")) r.over_vars.push_back(expect_name());
    }
    if (lx_.accept_ident("Where")) r.where = parse_cond();
    lx_.expect_punct(";");
    check_disjoint(r);
    resolve_rule(r);
    return r;
  }

  std::vector<std::string> parse_var_list(const std::string& terminator) {
    std::vector<std::string> vars;
    if (lx_.is_ident(terminator)) return vars;
    vars.push_back(expect_name());
    while (lx_.accept_punct(",")) vars.push_back(expect_name());
    return vars;
  }

  void check_disjoint(const Rule& r) {
    std::set<std::string> seen;
    for (const auto& v : r.index_vars)
      if (!seen.insert(v).second)
        throw ParseError("DuplicateFreeVar", "free variable '" + v + "' listed twice", r.pos);
    for (const auto& v : r.over_vars)
      if (!seen.insert(v).second)
        throw ParseError("DuplicateFreeVar",
                         "free variable '" + v + "' appears in both Map and Over lists", r.pos);
  }

  ICondPtr parse_cond() {
    ICondPtr c = parse_cmp();
    while (lx_.accept_punct("&&")) c = ICond::make_and(std::move(c), parse_cmp());
    return c;
  }

  ICondPtr parse_cmp() {
    IExprPtr l = parse_expr();
    for (auto [sp, op] : {std::pair{"==", BinOpKind::Eq}, {"!=", BinOpKind::Ne},
                          {"<=", BinOpKind::Le}, {">=", BinOpKind::Ge},
                          {"<", BinOpKind::Lt}, {">", BinOpKind::Gt}}) {
      if (lx_.is_punct(sp)) {
        lx_.next();
        return ICond::make_cmp(op, std::move(l), parse_expr());
      }
    }
    lx_.fail("expected comparison operator");
  }

  IExprPtr parse_expr() {
    IExprPtr l = parse_term();
    while (true) {
      reject_unknown_op();
      if (lx_.is_punct("+") || lx_.is_punct("-")) {
        BinOpKind op = lx_.next().text == "+" ? BinOpKind::Add : BinOpKind::Sub;
        l = IExpr::make_binop(op, std::move(l), parse_term());
        continue;
      }
      return l;
    }
  }

  IExprPtr parse_term() {
    IExprPtr l = parse_atom();
    while (true) {
      reject_unknown_op();
      if (lx_.is_punct("*") || lx_.is_punct("/")) {
        BinOpKind op = lx_.next().text == "*" ? BinOpKind::Mul : BinOpKind::Div;
        l = IExpr::make_binop(op, std::move(l), parse_atom());
        continue;
      }
      return l;
    }
  }

  IExprPtr parse_atom() {
    if (lx_.peek().kind == Token::Kind::Int) return IExpr::make_int(lx_.next().value);
    if (lx_.accept_punct("(")) {
      IExprPtr e = parse_expr();
      lx_.expect_punct(")");
      return e;
    }
    std::string name = expect_name();
    if (!lx_.is_punct("[")) return IExpr::make_var(name);
    std::vector<std::string> idx;
    while (lx_.accept_punct("[")) {
      idx.push_back(expect_name());
      lx_.expect_punct("]");
    }
    return IExpr::make_map(std::move(name), std::move(idx));
  }

  void reject_unknown_op() {
    for (const char* op : {"%", "!", "|", "&"})
      if (lx_.is_punct(op))
        throw ParseError("UnknownOperator", std::string("operator '") + op + "' is not supported",
                         lx_.peek().pos);
  }

  std::string expect_name() {
    if (lx_.peek().kind != Token::Kind::Ident) lx_.fail("expected identifier");
    if (kSpecKeywords.count(lx_.peek().text)) lx_.fail("keyword used as identifier");
    return lx_.next().text;
  }

  // Over-variables follow the Sum body textually, so names are classified
  // only once the whole rule is parsed: a bare name in the rule's variable
  // lists becomes a FreeVarRef, and `expr == freevar` comparisons become
  // EqFree conjuncts.
  void resolve_rule(Rule& r) {
    std::set<std::string> vars(r.bound_vars().begin(), r.bound_vars().end());
    vars.insert(r.over_vars.begin(), r.over_vars.end());
    if (r.body) r.body = resolve_expr(r.body, vars);
    if (r.where) r.where = resolve_cond(r.where, vars);
    if (r.assert_body) r.assert_body = resolve_cond(r.assert_body, vars);
  }

  IExprPtr resolve_expr(const IExprPtr& e, const std::set<std::string>& vars) {
    switch (e->kind) {
      case IExpr::Kind::VarRef:
        return vars.count(e->name) ? IExpr::make_free(e->name) : e;
      case IExpr::Kind::BinOp:
        return IExpr::make_binop(e->op, resolve_expr(e->lhs, vars), resolve_expr(e->rhs, vars));
      default:
        return e;
    }
  }

  ICondPtr resolve_cond(const ICondPtr& c, const std::set<std::string>& vars) {
    if (c->kind == ICond::Kind::And)
      return ICond::make_and(resolve_cond(c->cl, vars), resolve_cond(c->cr, vars));
    IExprPtr l = resolve_expr(c->lhs, vars);
    IExprPtr r = resolve_expr(c->rhs, vars);
    if (c->op == BinOpKind::Eq && r->kind == IExpr::Kind::FreeVarRef)
      return ICond::make_eqfree(std::move(l), r->name);
    return ICond::make_cmp(c->op, std::move(l), std::move(r));
  }

  Lexer lx_;
};

}  // namespace

InvariantSpec parse_spec(const std::string& text) { return SpecParser(text).parse(); }

}  // namespace ivc
