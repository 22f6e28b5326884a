#include <fstream>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "ivc/contract_lang.hpp"
#include "ivc/harness.hpp"
#include "ivc/instrument.hpp"
#include "ivc/oracle.hpp"
#include "ivc/tracegen.hpp"
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

struct Compiled {
  Program program;
  TypedSpec spec;
};

Compiled load(const std::string& contract, const std::string& spec) {
  Program p = parse_contract(fixture(contract), contract, {true});
  TypedSpec ts = check_spec(parse_spec(fixture(spec)), p);
  return {std::move(p), std::move(ts)};
}

int count_stmts(const StmtList& body, const std::function<bool(const Statement&)>& pred) {
  int n = 0;
  for (const auto& s : body) {
    if (pred(*s)) ++n;
    n += count_stmts(s->body, pred);
  }
  return n;
}

int count_fn(const Program& p, const std::string& fn,
             const std::function<bool(const Statement&)>& pred) {
  const Function* f = p.find_function(fn);
  REQUIRE(f != nullptr);
  return count_stmts(f->body, pred);
}

bool stores_to(const Statement& s, const std::string& var) {
  return s.kind == Statement::Kind::Store && s.addr.var == var;
}
bool loads_from(const Statement& s, const std::string& var) {
  return s.kind == Statement::Kind::Load && s.addr.var == var;
}

}  // namespace

TEST_CASE("instrument delta: vote contract matches the worked example's shape") {
  Compiled c = load("erc1202.mini", "erc1202.inv");
  InstrumentStats stats;
  Program out = instrument(c.program, c.spec, InstrumentMode::Delta, {}, &stats);

  // fresh declarations: persistent intermediate + transaction-memory marker
  const StateDecl* iv = out.find_decl("__iv_s");
  REQUIRE(iv);
  CHECK(iv->arity == 2);
  CHECK(iv->kind == VarKind::State);
  const StateDecl* mk = out.find_decl("__mk_1");
  REQUIRE(mk);
  CHECK(mk->arity == 2);
  CHECK(mk->kind == VarKind::Memory);
  CHECK(out.find_decl("__cd"));

  // conditional -/+ updates around the ballots store: two __iv_s stores in
  // vote (pre and post), each guarded by a ballots-derived condition
  CHECK(count_fn(out, "vote", [](const Statement& s) { return stores_to(s, "__iv_s"); }) >= 2);
  // markers recorded both before and after stores
  CHECK(count_fn(out, "vote", [](const Statement& s) { return stores_to(s, "__mk_1"); }) >= 6);
  // depth-gated final check loop over the marker map
  CHECK(count_fn(out, "vote", [](const Statement& s) {
          return s.kind == Statement::Kind::ForIn && s.callee == "__mk_1";
        }) == 1);
  CHECK(stats.checks_emitted == 2);  // one per entry function
  CHECK(stats.updates_emitted > 0);
  CHECK(stats.markers_emitted > 0);

  // instrumented output reparses and round-trips
  Program back = parse_contract(pretty_print(out), "back");
  CHECK(equal(out, back));
}

TEST_CASE("instrument delta: ERC20 scalar intermediate") {
  Compiled c = load("erc20.mini", "erc20.inv");
  Program out = instrument(c.program, c.spec, InstrumentMode::Delta);
  const StateDecl* iv = out.find_decl("__iv_t");
  REQUIRE(iv);
  CHECK(iv->arity == 0);
  // each balances store is wrapped by a -/+ update pair
  CHECK(count_fn(out, "transfer", [](const Statement& s) { return stores_to(s, "__iv_t"); }) ==
        4);
  // exit check asserts the intermediate against totalSupply
  CHECK(count_fn(out, "transfer", [](const Statement& s) {
          return s.kind == Statement::Kind::Assert;
        }) >= 2);
}

TEST_CASE("instrument: empty spec") {
  Program p = parse_contract(fixture("erc20.mini"), "erc20", {true});
  TypedSpec empty = check_spec(parse_spec(""), p);

  SUBCASE("mode none is the identity") {
    Program out = instrument(p, empty, InstrumentMode::None);
    CHECK(equal(out, p));
  }

  SUBCASE("delta and naive add only call-depth plumbing") {
    for (InstrumentMode m : {InstrumentMode::Delta, InstrumentMode::Naive}) {
      Program out = instrument(p, empty, m);
      CHECK(out.find_decl("__cd"));
      // exactly two extra stores per entry function (increment + restore)
      CHECK(count_fn(out, "transfer", [](const Statement& s) { return stores_to(s, "__cd"); }) ==
            2);
      // and no checks at all
      CHECK(count_fn(out, "transfer", [](const Statement& s) {
              return s.kind == Statement::Kind::If;
            }) == 0);
    }
  }
}

TEST_CASE("instrument rejects reserved names in input") {
  Program p = parse_contract("state __iv_x: int;\nentry fn f() { store __iv_x, 1; }", "bad");
  TypedSpec empty = check_spec(parse_spec(""), p);
  CHECK_THROWS_WITH_AS(instrument(p, empty, InstrumentMode::Delta),
                       doctest::Contains("InstrumentationCollision"), CheckError);
}

TEST_CASE("prune_checks removes checks an entry function cannot affect") {
  Compiled c = load("erc20.mini", "erc20.inv");

  SUBCASE("integrated: approve loses the supply checks") {
    InstrumentStats stats;
    Program out = instrument(c.program, c.spec, InstrumentMode::Delta, {true, false}, &stats);
    CHECK(stats.checks_pruned > 0);
    // approve writes only allowed: no gated block at all
    CHECK(count_fn(out, "approve", [](const Statement& s) {
            return s.kind == Statement::Kind::If;
          }) == 0);
    // transfer keeps its checks
    CHECK(count_fn(out, "transfer", [](const Statement& s) {
            return s.kind == Statement::Kind::ForIn && s.callee == "__mk_2";
          }) == 1);
  }

  SUBCASE("standalone pass matches on unpruned output") {
    Program un = instrument(c.program, c.spec, InstrumentMode::Delta);
    InstrumentStats stats;
    Program pruned = prune_checks(un, c.spec, &stats);
    CHECK(stats.checks_pruned > 0);
    CHECK(count_fn(pruned, "approve", [](const Statement& s) {
            return s.kind == Statement::Kind::If;
          }) == 0);
    CHECK(count_fn(pruned, "transfer", [](const Statement& s) {
            return s.kind == Statement::Kind::ForIn && s.callee == "__mk_2";
          }) == 1);
  }

  SUBCASE("calls and cycles keep checks reachable stores can affect") {
    Program p = parse_contract(fixture("calls.mini"), "calls", {true});
    TypedSpec ts = check_spec(parse_spec(fixture("erc20.inv")), p);
    InstrumentStats stats;
    Program out = instrument(p, ts, InstrumentMode::Delta, {true, false}, &stats);
    // transfer reaches _move which stores balances: checks retained
    CHECK(count_fn(out, "transfer", [](const Statement& s) {
            return s.kind == Statement::Kind::If;
          }) > 0);
    // ping reaches pong (cycle) which stores balances: retained
    CHECK(count_fn(out, "ping", [](const Statement& s) {
            return s.kind == Statement::Kind::If;
          }) > 0);
    // approve writes only allowed: pruned
    CHECK(count_fn(out, "approve", [](const Statement& s) {
            return s.kind == Statement::Kind::If;
          }) == 0);
  }

  SUBCASE("pruning never changes verdicts or final state") {
    TraceSpec ts;
    ts.kind = TraceSpec::Kind::Erc20Transfer;
    ts.accounts = 8;
    ts.txs = 120;
    ts.seed = 5;
    auto trace = gen_trace(ts);
    // add approvals, which exercise the pruned path
    for (int i = 0; i < 20; ++i) trace.push_back({1 + i % 8, "approve", {2, 7}});
    VMConfig cfg;
    Program plain = instrument(c.program, c.spec, InstrumentMode::Delta);
    Program opt = instrument(c.program, c.spec, InstrumentMode::Delta, {true, true});
    StateStore s1, s2;
    TraceResult r1 = run_trace(s1, plain, trace, cfg);
    TraceResult r2 = run_trace(s2, opt, trace, cfg);
    REQUIRE(r1.outcomes.size() == r2.outcomes.size());
    for (size_t i = 0; i < r1.outcomes.size(); ++i)
      CHECK(r1.outcomes[i].accepted() == r2.outcomes[i].accepted());
    CHECK(s1 == s2);
    // the optimized pipeline must not cost more
    CHECK(r2.total.state_accesses() <= r1.total.state_accesses());
  }
}

TEST_CASE("cache_state_vars") {
  SUBCASE("repeated address collapses to one load and one writeback") {
    // the instrumented vote function loads ballots[issueId][sender] and
    // weights[issueId][sender] several times
    Compiled c = load("erc1202.mini", "erc1202.inv");
    Program delta = instrument(c.program, c.spec, InstrumentMode::Delta);
    InstrumentStats stats;
    Program cached = cache_state_vars(delta, &stats);
    CHECK(stats.cached_addresses > 0);

    VMConfig cfg;
    TraceSpec ts;
    ts.kind = TraceSpec::Kind::Erc1202Vote;
    ts.accounts = 6;
    ts.txs = 30;
    ts.seed = 3;
    auto trace = gen_trace(ts);
    StateStore s1, s2;
    TraceResult r1 = run_trace(s1, delta, trace, cfg);
    TraceResult r2 = run_trace(s2, cached, trace, cfg);
    for (size_t i = 0; i < r1.outcomes.size(); ++i)
      CHECK(r1.outcomes[i].accepted() == r2.outcomes[i].accepted());
    CHECK(s1 == s2);
    CHECK(r2.total.sload + r2.total.sstore < r1.total.sload + r1.total.sstore);
  }

  SUBCASE("address indexed by a reassigned temp is not cached") {
    const char* src =
        "state sum_votes: map^1;\n"
        "entry fn f(issueId) {\n"
        "  opt = 1;\n"
        "  a = load sum_votes[opt];\n"
        "  opt = 2;\n"
        "  b = load sum_votes[opt];\n"
        "  store sum_votes[opt], a + b;\n"
        "}\n";
    Program p = parse_contract(src, "reassign");
    Program out = cache_state_vars(p);
    CHECK(equal(out, p));  // untouched
  }

  SUBCASE("single accesses stay as they are") {
    const char* src =
        "state x: int;\nstate y: int;\n"
        "entry fn f() { a = load x; store y, a; }\n";
    Program p = parse_contract(src, "single");
    CHECK(equal(cache_state_vars(p), p));
  }

  SUBCASE("aliasing across different syntactic addresses is flushed") {
    // two names for the same dynamic slot when a == b
    const char* src =
        "state m: map^1;\n"
        "entry fn f(a, b) {\n"
        "  t1 = load m[a];\n"
        "  store m[a], t1 + 1;\n"
        "  t2 = load m[b];\n"
        "  store m[b], t2 + 1;\n"
        "  t3 = load m[a];\n"
        "  store m[a], t3 + 1;\n"
        "}\n";
    Program p = parse_contract(src, "alias");
    Program cached = cache_state_vars(p);
    VMConfig cfg;
    for (Value a : {1, 2}) {
      StateStore s1, s2;
      execute(s1, p, {1, "f", {a, 2}}, cfg);
      execute(s2, cached, {1, "f", {a, 2}}, cfg);
      CHECK(s1 == s2);  // including the a == b aliasing case
    }
  }
}

TEST_CASE("delta intermediates equal the oracle denotation after every accepted tx") {
  for (auto [cname, sname, kind] :
       {std::tuple{"erc20.mini", "erc20.inv", TraceSpec::Kind::Erc20Transfer},
        std::tuple{"erc721.mini", "erc721.inv", TraceSpec::Kind::Erc721Transfer},
        std::tuple{"erc1202.mini", "erc1202.inv", TraceSpec::Kind::Erc1202Vote}}) {
    CAPTURE(cname);
    Compiled c = load(cname, sname);
    TraceSpec ts;
    ts.kind = kind;
    ts.accounts = 6;
    ts.txs = 60;
    ts.seed = 11;
    VMConfig cfg;
    BenchReport rep = differential_test(c.program, c.spec, gen_trace(ts), cfg);
    CHECK(rep.mismatches.empty());
  }
}

TEST_CASE("cost dominance: delta per-transfer state accesses independent of N") {
  Compiled c = load("erc20.mini", "erc20.inv");
  VMConfig cfg;
  Program delta = instrument(c.program, c.spec, InstrumentMode::Delta, {true, true});
  Program naive = instrument(c.program, c.spec, InstrumentMode::Naive);

  std::vector<std::uint64_t> delta_last, naive_last;
  for (int n : {10, 100, 1000}) {
    TraceSpec ts;
    ts.kind = TraceSpec::Kind::Erc20Transfer;
    ts.accounts = n;
    ts.txs = n - 1;  // funding phase only: every account ends up with a balance
    ts.seed = 2;
    auto trace = gen_trace(ts);
    // identical measurement transaction against the fully populated state
    trace.push_back({1, "transfer", {2, 123}});
    StateStore sd, sn;
    TraceResult rd = run_trace(sd, delta, trace, cfg);
    TraceResult rn = run_trace(sn, naive, trace, cfg);
    REQUIRE(rd.outcomes.back().accepted());
    REQUIRE(rn.outcomes.back().accepted());
    delta_last.push_back(rd.outcomes.back().cost.state_accesses());
    naive_last.push_back(rn.outcomes.back().cost.state_accesses());
  }
  CHECK(delta_last[0] == delta_last[1]);
  CHECK(delta_last[1] == delta_last[2]);
  CHECK(naive_last[0] < naive_last[1]);
  CHECK(naive_last[1] < naive_last[2]);
  // two orders of magnitude at N=1000, already visible per transaction
  CHECK(naive_last[2] >= 100 * delta_last[2]);
}

TEST_CASE("golden instrumented outputs are reproduced bit for bit") {
  // regenerate with:
  //   ivc instrument --contract fixtures/erc1202.mini --spec fixtures/erc1202.inv \
  //     --mode delta -o fixtures/golden/erc1202_delta.mini
  //   ivc instrument --contract fixtures/erc20.mini --spec fixtures/erc20.inv \
  //     --mode delta --prune --cache -o fixtures/golden/erc20_delta_opt.mini
  {
    Compiled c = load("erc1202.mini", "erc1202.inv");
    Program out = instrument(c.program, c.spec, InstrumentMode::Delta);
    CHECK(pretty_print(out) == fixture("golden/erc1202_delta.mini"));
  }
  {
    Compiled c = load("erc20.mini", "erc20.inv");
    Program out = instrument(c.program, c.spec, InstrumentMode::Delta, {true, true});
    CHECK(pretty_print(out) == fixture("golden/erc20_delta_opt.mini"));
  }
}
