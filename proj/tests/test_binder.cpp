#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ivc/binder.hpp"
#include "ivc/contract_lang.hpp"
#include "ivc/oracle.hpp"
#include "ivc/spec_ast.hpp"
#include "ivc/vm.hpp"

using namespace ivc;

namespace {

std::string fixture(const std::string& name) {
  std::ifstream in(std::string(IVC_FIXTURE_DIR) + "/" + name);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// weights/ballots environment of the vote invariant
NameEnv vote_env() {
  NameEnv env;
  env.table["weights"] = {"weights", 2};
  env.table["ballots"] = {"ballots", 2};
  env.table["weightedVoteCount"] = {"weightedVoteCount", 2};
  env.table["s"] = {"__iv_s", 2};
  env.table["balances"] = {"balances", 1};
  env.table["totalSupply"] = {"totalSupply", 0};
  return env;
}

Address addr(const std::string& var, std::vector<CExprPtr> idx = {}) {
  return Address{var, std::move(idx)};
}

std::string set_str(const BindingSet& b) { return to_json(b); }

const Rule& mapsum_rule(const InvariantSpec& s) {
  REQUIRE(s.rules[0].kind == Rule::Kind::MapSum);
  return s.rules[0];
}

}  // namespace

TEST_CASE("bind_expr follows the matching rules") {
  NameEnv env = vote_env();
  InvariantSpec spec = parse_spec(
      "s = Map a, b Sum weights[a][c] Over c Where ballots[a][c] == b && b != 0;");
  const Rule& r = mapsum_rule(spec);

  Address ballots_addr =
      addr("ballots", {CExpr::make_temp("issueId"), CExpr::make_sender()});

  SUBCASE("matching map occurrence binds positionally") {
    // occurrence ballots[a][c] in the Where clause
    BindingSet b = bind_expr(ballots_addr, r.where, env);
    REQUIRE(b.maps.size() == 1);
    REQUIRE(b.maps[0].pairs.size() == 2);
    CHECK(b.maps[0].pairs[0].free_var == "a");
    CHECK(pretty_print(b.maps[0].pairs[0].expr) == "issueId");
    CHECK(b.maps[0].pairs[1].free_var == "c");
    CHECK(pretty_print(b.maps[0].pairs[1].expr) == "sender");
  }

  SUBCASE("different base variable yields the empty set") {
    Address ij = addr("ballots", {CExpr::make_temp("i"), CExpr::make_temp("j")});
    BindingSet b = bind_expr(ij, r.body, env);  // body is weights[a][c]
    CHECK(b.maps.empty());
  }

  SUBCASE("constants bind nothing") {
    BindingSet b = bind_expr(addr("totalSupply"), IExpr::make_int(0), env);
    CHECK(b.maps.empty());
  }

  SUBCASE("matching scalar yields the set holding the empty map") {
    BindingSet b = bind_expr(addr("totalSupply"), IExpr::make_var("totalSupply"), env);
    REQUIRE(b.maps.size() == 1);
    CHECK(b.maps[0].pairs.empty());
  }

  SUBCASE("union over operands deduplicates") {
    // balances[y] + balances[y] against a store to balances[k]
    InvariantSpec s2 = parse_spec("t = Map Sum balances[y] + balances[y] Over y;");
    BindingSet b = bind_expr(addr("balances", {CExpr::make_temp("k")}),
                             mapsum_rule(s2).body, env);
    CHECK(b.maps.size() == 1);
  }
}

TEST_CASE("bind_cond scans conjuncts left to right") {
  NameEnv env = vote_env();

  SUBCASE("ballots[a][c] == b && b != 0 binds b") {
    InvariantSpec s = parse_spec(
        "s = Map a, b Sum weights[a][c] Over c Where ballots[a][c] == b && b != 0;");
    CondBinding cb = bind_cond(addr("ballots"), mapsum_rule(s).where);
    REQUIRE(cb.bound);
    CHECK(cb.free_var == "b");
    CHECK(pretty_print(cb.expr) == "ballots[a][c]");
  }

  SUBCASE("x occurring in the left side yields no binding") {
    InvariantSpec s = parse_spec("t = Map Sum balances[x] Over x Where balances[x] + 1 == x;");
    CondBinding cb = bind_cond(addr("balances"), mapsum_rule(s).where);
    CHECK(!cb.bound);
  }

  SUBCASE("plain comparisons yield no binding") {
    InvariantSpec s = parse_spec("t = Map Sum balances[y] Over y Where balances[y] > 0;");
    CHECK(!bind_cond(addr("balances"), mapsum_rule(s).where).bound);
  }

  SUBCASE("leftmost EqFree wins") {
    InvariantSpec s = parse_spec(
        "t = Map i Sum balances[i] Over y Where balances[y] == i && totalSupply == i;");
    CondBinding cb = bind_cond(addr("balances"), mapsum_rule(s).where);
    REQUIRE(cb.bound);
    CHECK(cb.free_var == "i");
    CHECK(pretty_print(cb.expr) == "balances[y]");
  }
}

TEST_CASE("rewrite: the worked vote example") {
  NameEnv env = vote_env();
  InvariantSpec spec = parse_spec(
      "s = Map a, b Sum weights[a][c] Over c Where ballots[a][c] == b && b != 0;");
  const Rule& r = mapsum_rule(spec);

  // pre template: if c { t = load s[a][b]; t' = t - e; store s[a][b], t' }
  std::vector<TExprPtr> idx{TExpr::make_free("a"), TExpr::make_free("b")};
  TExprPtr read = TExpr::make_read("__iv_s", idx);
  TExprPtr val = TExpr::make_binop(BinOpKind::Sub, read, to_template(r.body, env));
  std::vector<TStmtPtr> tmpl{
      TStmt::if_(to_conjuncts(r.where, env), {TStmt::store("__iv_s", idx, val)})};

  Address ballots_addr =
      addr("ballots", {CExpr::make_temp("issueId"), CExpr::make_sender()});
  BindingSet b = bind_expr(ballots_addr, r.where, env);
  CondBinding cb = bind_cond(ballots_addr, r.where);
  FreshNames names;
  StmtList out = rewrite(tmpl, b, cb, {}, env, names);

  // Expected shape (Fig. 4's conditional decrement):
  //   t0 = load ballots[issueId][sender];
  //   if t0 != 0 { t1 = load weights..; t2 = load __iv_s[issueId][t0]; ... }
  REQUIRE(out.size() == 2);
  CHECK(out[0]->kind == Statement::Kind::Load);
  CHECK(pretty_print(out[0]->addr) == "ballots[issueId][sender]");
  REQUIRE(out[1]->kind == Statement::Kind::If);
  CHECK(pretty_print(out[1]->expr) == "__t0 != 0");
  bool found_store = false;
  for (const auto& s : out[1]->body) {
    if (s->kind == Statement::Kind::Store) {
      found_store = true;
      CHECK(pretty_print(s->addr) == "__iv_s[issueId][__t0]");
    }
  }
  CHECK(found_store);

  SUBCASE("rewrite is deterministic") {
    FreshNames n2;
    StmtList out2 = rewrite(tmpl, b, cb, {}, env, n2);
    CHECK(equal(out, out2));
  }
}

TEST_CASE("rewrite: duplicate pairs become an equality guard") {
  NameEnv env = vote_env();
  // invariant expression ballots[a][a] forces <a,i> and <a,j> for a store to
  // ballots[i][j]
  InvariantSpec spec = parse_spec("u = Map a Sum ballots[a][a] Over;");
  const Rule& r = mapsum_rule(spec);
  env.table["u"] = {"__iv_u", 1};

  Address st = addr("ballots", {CExpr::make_temp("i"), CExpr::make_temp("j")});
  BindingSet b = bind_expr(st, r.body, env);
  REQUIRE(b.maps.size() == 1);
  REQUIRE(b.maps[0].pairs.size() == 2);

  std::vector<TExprPtr> idx{TExpr::make_free("a")};
  std::vector<TStmtPtr> tmpl{TStmt::store(
      "__iv_u", idx,
      TExpr::make_binop(BinOpKind::Add, TExpr::make_read("__iv_u", idx),
                        to_template(r.body, env)))};
  FreshNames names;
  StmtList out = rewrite(tmpl, b, CondBinding::none(), {}, env, names);
  REQUIRE(out.size() == 1);
  REQUIRE(out[0]->kind == Statement::Kind::If);
  CHECK(pretty_print(out[0]->expr) == "i == j");
}

TEST_CASE("rewrite: unbound variable synthesizes a loop over its map") {
  NameEnv env = vote_env();
  InvariantSpec spec = parse_spec("t = Map Sum balances[y] Over y;");
  const Rule& r = mapsum_rule(spec);
  env.table["t"] = {"__iv_t", 0};

  // store to totalSupply does not bind y; the template still sums balances[y]
  std::vector<TStmtPtr> tmpl{TStmt::store(
      "__iv_t", {},
      TExpr::make_binop(BinOpKind::Add, TExpr::make_read("__iv_t", {}),
                        to_template(r.body, env)))};
  BindingSet b{{BindingMap{}}};  // one empty binding map
  FreshNames names;
  StmtList out = rewrite(tmpl, b, CondBinding::none(), {}, env, names);
  REQUIRE(out.size() == 1);
  REQUIRE(out[0]->kind == Statement::Kind::ForIn);
  CHECK(out[0]->callee == "balances");

  SUBCASE("no map at all is an error") {
    std::vector<TStmtPtr> bad{TStmt::store("__iv_t", {}, TExpr::make_free("q"))};
    CHECK_THROWS_WITH_AS(rewrite(bad, b, CondBinding::none(), {}, env, names),
                         doctest::Contains("UnboundFreeVarNoMap"), CheckError);
  }
}

TEST_CASE("rewrite output has no residual free variables and empty set means no code") {
  NameEnv env = vote_env();
  std::vector<TStmtPtr> tmpl{TStmt::store("totalSupply", {}, TExpr::make_int(1))};
  FreshNames names;
  CHECK(rewrite(tmpl, BindingSet{}, CondBinding::none(), {}, env, names).empty());
}

// Soundness on the vote rule, by enumeration: for random stores, every
// (a, b) instance whose denotation changes is covered by the binding maps
// evaluated before or after the store (condition binding included).
TEST_CASE("binding soundness by enumeration") {
  Program vote = parse_contract(fixture("erc1202.mini"), "vote");
  InvariantSpec spec = parse_spec(fixture("erc1202.inv"));
  TypedSpec ts = check_spec(spec, vote);
  Oracle oracle(ts, IntMode::Bigint);
  NameEnv env = vote_env();
  const Rule& r = ts.spec.rules[0];

  std::mt19937_64 rng(2024);
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };

  for (int iter = 0; iter < 300; ++iter) {
    // random small state over keys {1,2,3}
    StateStore st;
    for (int i = 0; i < 6; ++i) {
      Key k{1 + pick(3), 1 + pick(3)};
      st.maps["weights"][k] = pick(4);
      Key k2{1 + pick(3), 1 + pick(3)};
      st.maps["ballots"][k2] = pick(3);  // 0 = not voted
    }
    // random store to weights or ballots
    bool to_weights = pick(2) == 0;
    Key tgt{1 + pick(3), 1 + pick(3)};
    Value newval = pick(4);

    // denotations before/after at all instances
    auto denote_all = [&](const StateStore& s) {
      std::map<Key, Value> vals;
      for (int a = 1; a <= 3; ++a)
        for (int b = 0; b <= 3; ++b) vals[{a, b}] = oracle.denote_at(s, "s", {a, b});
      return vals;
    };
    auto before = denote_all(st);

    // covered instances: binding maps of the address, with the condition
    // binding evaluated on the pre and the post state
    Address a;
    a.var = to_weights ? "weights" : "ballots";
    a.indices = {CExpr::make_int(tgt[0]), CExpr::make_int(tgt[1])};
    BindingSet bs = bind_expr(a, r.body, env);
    bs = union_sets(std::move(bs), bind_expr(a, r.where, env));
    CondBinding cb = bind_cond(a, r.where);

    StateStore after = st;
    after.maps[a.var][tgt] = newval;
    auto post = denote_all(after);

    auto covered = [&](const StateStore& s, const Key& inst) {
      for (const auto& m : bs.maps) {
        Value av = -1, bv = -1;  // unconstrained marker
        bool ok = true;
        for (const auto& p : m.pairs) {
          Value v = p.expr->value;  // indices are constants in this test
          if (p.free_var == "a") av = v;
          if (p.free_var == "c") {
            // c is an over-variable: any value is covered
          }
        }
        if (cb.bound && cb.free_var == "b") {
          // b := ballots[a][c] evaluated under this map's a/c values
          Value ca = -1, cc = -1;
          for (const auto& p : m.pairs) {
            if (p.free_var == "a") ca = p.expr->value;
            if (p.free_var == "c") cc = p.expr->value;
          }
          auto mit = s.maps.find("ballots");
          Value bval = 0;
          if (mit != s.maps.end())
            if (auto e = mit->second.find({ca, cc}); e != mit->second.end()) bval = e->second;
          bv = bval;
        }
        if (av != -1 && inst[0] != av) ok = false;
        if (bv != -1 && inst[1] != bv) ok = false;
        if (ok) return true;
      }
      return false;
    };

    for (int ai = 1; ai <= 3; ++ai) {
      for (int bi = 0; bi <= 3; ++bi) {
        Key inst{ai, bi};
        if (before[inst] != post[inst]) {
          CAPTURE(iter);
          CAPTURE(ai);
          CAPTURE(bi);
          bool cov = covered(st, inst) || covered(after, inst);
          CHECK(cov);
        }
      }
    }
  }
}
