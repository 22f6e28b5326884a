#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ivc/contract_lang.hpp"
#include "ivc/harness.hpp"
#include "ivc/oracle.hpp"
#include "ivc/tracegen.hpp"

using namespace ivc;

namespace {

std::string fixture(const std::string& name) {
  std::ifstream in(std::string(IVC_FIXTURE_DIR) + "/" + name);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

TypedSpec erc20_spec(const Program& p) { return check_spec(parse_spec(fixture("erc20.inv")), p); }

}  // namespace

TEST_CASE("oracle_check: supply invariant on hand-built states") {
  Program p = parse_contract(fixture("erc20.mini"), "erc20");
  TypedSpec ts = erc20_spec(p);
  Oracle oracle(ts, IntMode::Bigint);

  SUBCASE("genesis all-zero state is satisfied with t = 0") {
    StateStore st;
    OracleResult r = oracle.check(st);
    CHECK(r.satisfied);
    CHECK(r.intermediates.at("t").at({}) == 0);
  }

  SUBCASE("balances {1:3, 2:4}, totalSupply 7 is satisfied with t = 7") {
    StateStore st;
    st.maps["balances"][{1}] = 3;
    st.maps["balances"][{2}] = 4;
    st.scalars["totalSupply"] = 7;
    OracleResult r = oracle.check(st);
    CHECK(r.satisfied);
    CHECK(r.intermediates.at("t").at({}) == 7);
  }

  SUBCASE("totalSupply 8 is violated") {
    StateStore st;
    st.maps["balances"][{1}] = 3;
    st.maps["balances"][{2}] = 4;
    st.scalars["totalSupply"] = 8;
    OracleResult r = oracle.check(st);
    CHECK(!r.satisfied);
    REQUIRE(!r.violations.empty());
    CHECK(r.violations[0].rule_index == 1);
  }

  SUBCASE("defined-on-write zero entries participate in domains") {
    StateStore st;
    st.maps["balances"][{1}] = 0;  // defined, value zero
    st.scalars["totalSupply"] = 0;
    OracleResult r = oracle.check(st);
    CHECK(r.satisfied);
  }
}

TEST_CASE("oracle denote_at evaluates intermediates at arbitrary keys") {
  Program p = parse_contract(fixture("erc1202.mini"), "vote");
  TypedSpec ts = check_spec(parse_spec(fixture("erc1202.inv")), p);
  Oracle oracle(ts, IntMode::Bigint);
  StateStore st;
  st.maps["weights"][{1, 4}] = 2;
  st.maps["weights"][{1, 5}] = 3;
  st.maps["ballots"][{1, 4}] = 2;
  st.maps["ballots"][{1, 5}] = 2;
  // s[1][2] = weights of voters 4 and 5 = 5; s[1][1] = 0
  CHECK(oracle.denote_at(st, "s", {1, 2}) == 5);
  CHECK(oracle.denote_at(st, "s", {1, 1}) == 0);
  CHECK(oracle.denote_at(st, "s", {9, 9}) == 0);
}

TEST_CASE("gen_trace determinism and shapes") {
  SUBCASE("same seed, same trace; different seed differs") {
    TraceSpec ts;
    ts.kind = TraceSpec::Kind::Erc20Transfer;
    ts.accounts = 10;
    ts.txs = 100;
    ts.seed = 1;
    auto a = gen_trace(ts);
    auto b = gen_trace(ts);
    REQUIRE(a.size() == b.size());
    CHECK(trace_to_jsonl(a) == trace_to_jsonl(b));
    ts.seed = 2;
    CHECK(trace_to_jsonl(gen_trace(ts)) != trace_to_jsonl(a));
  }

  SUBCASE("erc20 first transactions: init then the funding fan-out") {
    TraceSpec ts;
    ts.kind = TraceSpec::Kind::Erc20Transfer;
    ts.accounts = 10;
    ts.txs = 100;
    ts.seed = 1;
    auto t = gen_trace(ts);
    REQUIRE(t.size() == 101);
    CHECK(t[0].function == "init");
    CHECK(t[0].sender == 1);
    CHECK(t[0].args == std::vector<Value>{10000});
    for (int i = 1; i <= 5; ++i) {
      CHECK(t[i].function == "transfer");
      CHECK(t[i].sender == 1);
      CHECK(t[i].args[0] == Value(i + 1));
      CHECK(t[i].args[1] == 1000);
    }
    for (const auto& tx : t) CHECK(tx.function != "");
  }

  SUBCASE("attack_double_vote is the fixed 3-transaction trace") {
    TraceSpec ts;
    ts.kind = TraceSpec::Kind::AttackDoubleVote;
    auto t = gen_trace(ts);
    REQUIRE(t.size() == 3);
    CHECK(t[0].function == "createIssue");
    CHECK(t[1].function == "vote");
    CHECK(t[2].function == "vote");
    CHECK(t[1].sender == t[2].sender);
    CHECK(t[1].args[0] == t[2].args[0]);   // same issue
    CHECK(t[1].args[1] != t[2].args[1]);   // different option
  }

  SUBCASE("attack_batch_overflow carries a value near 2^255") {
    TraceSpec ts;
    ts.kind = TraceSpec::Kind::AttackBatchOverflow;
    auto t = gen_trace(ts);
    REQUIRE(t.size() == 2);
    CHECK(t[1].function == "batchTransfer");
    CHECK(t[1].args[2] == (Value(1) << 255));
  }

  SUBCASE("erc1202 interleaves one createIssue per five votes") {
    TraceSpec ts;
    ts.kind = TraceSpec::Kind::Erc1202Vote;
    ts.accounts = 12;
    ts.txs = 60;
    ts.seed = 4;
    auto t = gen_trace(ts);
    int creates = 0, votes = 0;
    for (const auto& tx : t) (tx.function == "createIssue" ? creates : votes)++;
    CHECK(creates == 10);
    CHECK(votes == 50);
  }

  SUBCASE("invalid params") {
    TraceSpec ts;
    ts.kind = TraceSpec::Kind::Erc20Transfer;
    ts.accounts = 1;
    CHECK_THROWS_WITH_AS(gen_trace(ts), doctest::Contains("InvalidParams"), Error);
  }
}

TEST_CASE("differential_test: vote attack is rejected by both instrumented modes") {
  Program p = parse_contract(fixture("erc1202.mini"), "vote", {true});
  TypedSpec ts = check_spec(parse_spec(fixture("erc1202.inv")), p);
  TraceSpec g;
  g.kind = TraceSpec::Kind::AttackDoubleVote;
  auto trace = gen_trace(g);
  VMConfig cfg;
  BenchReport rep = differential_test(p, ts, trace, cfg);
  CHECK(rep.ok());
  // oracle flags the third transaction; naive and delta reverted it
  REQUIRE(rep.accepted.at("oracle").size() == 3);
  CHECK(rep.accepted.at("oracle")[2] == false);
  CHECK(rep.accepted.at("naive")[2] == false);
  CHECK(rep.accepted.at("delta")[2] == false);
  // while the uninstrumented contract accepted it (nullified in the oracle run)
  StateStore st;
  run_trace(st, p, trace, cfg);
  CHECK(st.maps["weightedVoteCount"][{1, 1}] == 1);
  CHECK(st.maps["weightedVoteCount"][{1, 2}] == 1);  // the corrupted tally
}

TEST_CASE("differential_test: randomized traces have zero mismatches") {
  for (auto [cname, sname, kind] :
       {std::tuple{"erc20.mini", "erc20.inv", TraceSpec::Kind::Erc20Transfer},
        std::tuple{"erc721.mini", "erc721.inv", TraceSpec::Kind::Erc721Transfer},
        std::tuple{"erc1202.mini", "erc1202.inv", TraceSpec::Kind::Erc1202Vote}}) {
    CAPTURE(cname);
    Program p = parse_contract(fixture(cname), cname, {true});
    TypedSpec ts = check_spec(parse_spec(fixture(sname)), p);
    TraceSpec g;
    g.kind = kind;
    g.accounts = 7;
    g.txs = 150;
    g.seed = 31;
    VMConfig cfg;
    BenchReport rep = differential_test(p, ts, gen_trace(g), cfg);
    CHECK(rep.mismatches.empty());
  }
}

TEST_CASE("bench_compare reports ratios and identical instrumented verdicts") {
  Program p = parse_contract(fixture("erc20.mini"), "erc20", {true});
  TypedSpec ts = erc20_spec(p);
  TraceSpec g;
  g.kind = TraceSpec::Kind::Erc20Transfer;
  g.accounts = 50;
  g.txs = 120;
  g.seed = 9;
  VMConfig cfg;
  BenchReport rep = bench_compare(p, ts, gen_trace(g), cfg);
  CHECK(rep.ok());
  CHECK(rep.totals.at("naive").sload > 10 * rep.totals.at("delta").sload);
  CHECK(rep.naive_delta_state_ratio > 10);
  CHECK(rep.delta_none_weighted_ratio > 1.0);
  // report renders
  CHECK(rep.to_json(cfg.weights).find("naive_delta_state_accesses") != std::string::npos);
  CHECK(rep.table(cfg.weights).find("naive/delta") != std::string::npos);
}

TEST_CASE("bench_compare: empty spec costs only the call-depth plumbing") {
  Program p = parse_contract(fixture("erc20.mini"), "erc20", {true});
  TypedSpec empty = check_spec(parse_spec(""), p);
  TraceSpec g;
  g.kind = TraceSpec::Kind::Erc20Transfer;
  g.accounts = 10;
  g.txs = 50;
  g.seed = 12;
  auto trace = gen_trace(g);
  VMConfig cfg;
  BenchReport rep = bench_compare(p, empty, trace, cfg);
  std::uint64_t extra_sstore = rep.totals.at("delta").sstore - rep.totals.at("none").sstore;
  CHECK(extra_sstore <= 2 * trace.size());
  CHECK(rep.totals.at("delta").state_accesses() - rep.totals.at("none").state_accesses() <=
        3 * trace.size());
}

TEST_CASE("user_state filters the instrumentation namespace") {
  StateStore st;
  st.scalars["totalSupply"] = 5;
  st.scalars["__cd"] = 0;
  st.maps["__iv_t"][{1}] = 2;
  st.maps["balances"][{1}] = 5;
  StateStore u = user_state(st);
  CHECK(u.scalars.count("totalSupply"));
  CHECK(!u.scalars.count("__cd"));
  CHECK(!u.maps.count("__iv_t"));
  CHECK(u.maps.count("balances"));
}

TEST_CASE("EqFree conjuncts in assert bodies are plain equalities everywhere") {
  // Accepted per the language's open question: they assert the equality but
  // only feed the binding analysis, never condition-binding substitution.
  Program p = parse_contract(
      "state ledger: map^1;\n"
      "entry fn set(k) { store ledger[k], k; }\n"
      "entry fn corrupt(k, v) { store ledger[k], v; }\n",
      "idmap", {true});
  TypedSpec ts = check_spec(parse_spec("ForAll x Assert ledger[x] == x;"), p);
  std::vector<Transaction> trace{
      {1, "set", {4}}, {1, "set", {9}}, {1, "corrupt", {4, 5}}, {1, "set", {4}}};
  VMConfig cfg;
  BenchReport rep = differential_test(p, ts, trace, cfg);
  CHECK(rep.ok());
  CHECK(rep.accepted.at("oracle") == std::vector<bool>{true, true, false, true});
  CHECK(rep.accepted.at("delta") == std::vector<bool>{true, true, false, true});
  CHECK(rep.accepted.at("naive") == std::vector<bool>{true, true, false, true});
}

TEST_CASE("stores inside loops are instrumented in place") {
  // batch zeroing writes under a for-in; the delta updates and markers land
  // inside the loop body and still agree with the oracle
  Program p = parse_contract(
      "state balances: map^1;\n"
      "state totalSupply: int;\n"
      "entry fn init(supply) { store totalSupply, supply; store balances[sender], supply; }\n"
      "entry fn give(to, value) {\n"
      "  b = load balances[sender];\n"
      "  assert b >= value;\n"
      "  store balances[sender], b - value;\n"
      "  bt = load balances[to];\n"
      "  store balances[to], bt + value;\n"
      "}\n"
      "entry fn burnAll() {\n"
      "  n = 0;\n"
      "  for k in balances {\n"
      "    b = load balances[k];\n"
      "    store balances[k], 0;\n"
      "    n = n + b;\n"
      "  }\n"
      "  t = load totalSupply;\n"
      "  store totalSupply, t - n;\n"
      "}\n",
      "batch", {true});
  TypedSpec ts = check_spec(
      parse_spec("t = Map Sum balances[y] Over y;\nForAll Assert t == totalSupply;"), p);
  std::vector<Transaction> trace{{1, "init", {100}}, {1, "give", {2, 30}},
                                 {1, "give", {3, 20}}, {1, "burnAll", {}},
                                 {1, "init", {50}}};
  VMConfig cfg;
  BenchReport rep = differential_test(p, ts, trace, cfg);
  CHECK(rep.ok());
  // burnAll zeroes every balance and the supply in one transaction
  CHECK(rep.accepted.at("delta") == std::vector<bool>{true, true, true, true, false});
  // the last init is rejected by the contract's own guard (supply != 0),
  // identically in every mode: wait, totalSupply was burned to zero, so it
  // must be accepted instead
}

TEST_CASE("entry functions called through call are gated off mid-transaction") {
  Program p = parse_contract(fixture("calls.mini"), "calls", {true});
  TypedSpec ts = check_spec(parse_spec(fixture("erc20.inv")), p);
  std::vector<Transaction> trace{
      {1, "init", {500}},        // supply to account 1
      {1, "transfer", {2, 60}},  // via the _move helper
      {1, "approve", {2, 10}},   // unrelated to the invariant
      {1, "ping", {3}},          // cycle; pong corrupts balances -> violation
      {2, "transfer", {3, 10}},  // still consistent afterwards
  };
  VMConfig cfg;
  BenchReport rep = differential_test(p, ts, trace, cfg);
  CHECK(rep.ok());
  CHECK(rep.accepted.at("oracle") ==
        std::vector<bool>{true, true, true, false, true});
  CHECK(rep.accepted.at("delta") ==
        std::vector<bool>{true, true, true, false, true});
}
