#include <set>

#include "ivc/contract_lang.hpp"
#include "ivc/lexer.hpp"

namespace ivc {

namespace {

const std::set<std::string> kKeywords = {"state",  "memory", "int",  "map",  "fn",
                                         "entry",  "load",   "store", "if",  "for",
                                         "in",     "assert", "call", "sender", "calldepth"};

class ContractParser {
 public:
  explicit ContractParser(const std::string& text) : lx_(text) {}

  Program parse(const std::string& name) {
    Program p;
    p.name = name;
    while (lx_.is_ident("state") || lx_.is_ident("memory")) p.decls.push_back(parse_decl());
    while (!lx_.at_end()) p.functions.push_back(parse_function());
    return p;
  }

 private:
  StateDecl parse_decl() {
    StateDecl d;
    d.kind = lx_.next().text == "state" ? VarKind::State : VarKind::Memory;
    d.name = expect_name();
    lx_.expect_punct(":");
    if (lx_.accept_ident("int")) {
      d.arity = 0;
    } else if (lx_.accept_ident("map")) {
      lx_.expect_punct("^");
      Value k = lx_.expect_int();
      if (k < 1 || k > 8) lx_.fail("map arity must be in 1..8");
      d.arity = static_cast<int>(k);
    } else {
      lx_.fail("expected 'int' or 'map^k'");
    }
    lx_.expect_punct(";");
    return d;
  }

  Function parse_function() {
    Function f;
    f.is_entry = lx_.accept_ident("entry");
    lx_.expect_keyword("fn");
    f.name = expect_name();
    lx_.expect_punct("(");
    if (!lx_.is_punct(")")) {
      f.params.push_back(expect_name());
      while (lx_.accept_punct(",")) f.params.push_back(expect_name());
    }
    lx_.expect_punct(")");
    f.body = parse_block();
    return f;
  }

  StmtList parse_block() {
    lx_.expect_punct("{");
    StmtList out;
    while (!lx_.is_punct("}")) out.push_back(parse_statement());
    lx_.expect_punct("}");
    return out;
  }

  StmtPtr parse_statement() {
    SourcePos pos = lx_.peek().pos;
    StmtPtr s;
    if (lx_.accept_ident("store")) {
      Address a = parse_address();
      lx_.expect_punct(",");
      CExprPtr e = parse_expr();
      lx_.expect_punct(";");
      s = Statement::store(std::move(a), std::move(e));
    } else if (lx_.accept_ident("if")) {
      CExprPtr c = parse_expr();
      s = Statement::if_(std::move(c), parse_block());
    } else if (lx_.accept_ident("for")) {
      std::vector<std::string> temps;
      temps.push_back(expect_name());
      while (lx_.accept_punct(",")) temps.push_back(expect_name());
      lx_.expect_keyword("in");
      std::string map = expect_name();
      s = Statement::for_in(std::move(temps), std::move(map), parse_block());
    } else if (lx_.accept_ident("assert")) {
      CExprPtr c = parse_expr();
      lx_.expect_punct(";");
      s = Statement::assert_(std::move(c));
    } else if (lx_.accept_ident("call")) {
      std::string fn = expect_name();
      lx_.expect_punct("(");
      std::vector<CExprPtr> args;
      if (!lx_.is_punct(")")) {
        args.push_back(parse_expr());
        while (lx_.accept_punct(",")) args.push_back(parse_expr());
      }
      lx_.expect_punct(")");
      lx_.expect_punct(";");
      s = Statement::call(std::move(fn), std::move(args));
    } else {
      std::string t = expect_name();
      lx_.expect_punct("=");
      if (lx_.accept_ident("load")) {
        Address a = parse_address();
        lx_.expect_punct(";");
        s = Statement::load(std::move(t), std::move(a));
      } else {
        CExprPtr e = parse_expr();
        lx_.expect_punct(";");
        s = Statement::assign(std::move(t), std::move(e));
      }
    }
    const_cast<Statement*>(s.get())->pos = pos;
    return s;
  }

  Address parse_address() {
    Address a;
    a.var = expect_name();
    while (lx_.accept_punct("[")) {
      a.indices.push_back(parse_expr());
      lx_.expect_punct("]");
    }
    return a;
  }

  // expr := add [cop add]; chained comparisons need explicit parens.
  CExprPtr parse_expr() {
    CExprPtr l = parse_add();
    for (auto [sp, op] : {std::pair{"==", BinOpKind::Eq}, {"!=", BinOpKind::Ne},
                          {"<=", BinOpKind::Le}, {">=", BinOpKind::Ge},
                          {"<", BinOpKind::Lt}, {">", BinOpKind::Gt}}) {
      if (lx_.is_punct(sp)) {
        lx_.next();
        return CExpr::make_binop(op, std::move(l), parse_add());
      }
    }
    return l;
  }

  CExprPtr parse_add() {
    CExprPtr l = parse_mul();
    while (lx_.is_punct("+") || lx_.is_punct("-")) {
      BinOpKind op = lx_.next().text == "+" ? BinOpKind::Add : BinOpKind::Sub;
      l = CExpr::make_binop(op, std::move(l), parse_mul());
    }
    return l;
  }

  CExprPtr parse_mul() {
    CExprPtr l = parse_atom();
    while (lx_.is_punct("*") || lx_.is_punct("/")) {
      BinOpKind op = lx_.next().text == "*" ? BinOpKind::Mul : BinOpKind::Div;
      l = CExpr::make_binop(op, std::move(l), parse_atom());
    }
    return l;
  }

  CExprPtr parse_atom() {
    if (lx_.peek().kind == Token::Kind::Int) return CExpr::make_int(lx_.next().value);
    if (lx_.accept_punct("(")) {
      CExprPtr e = parse_expr();
      lx_.expect_punct(")");
      return e;
    }
    if (lx_.accept_ident("sender")) return CExpr::make_sender();
    if (lx_.accept_ident("calldepth")) return CExpr::make_calldepth();
    return CExpr::make_temp(expect_name());
  }

  std::string expect_name() {
    if (lx_.peek().kind != Token::Kind::Ident) lx_.fail("expected identifier");
    if (kKeywords.count(lx_.peek().text)) lx_.fail("keyword used as identifier");
    return lx_.next().text;
  }

  Lexer lx_;
};

}  // namespace

Program parse_contract(const std::string& text, const std::string& name, ParseOptions opts) {
  ContractParser parser(text);
  Program p = parser.parse(name);
  check_program(p, opts);
  return p;
}

}  // namespace ivc
