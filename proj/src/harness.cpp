#include <set>
#include <sstream>

#include "ivc/contract_lang.hpp"
#include "ivc/harness.hpp"
#include "json.hpp"

namespace ivc {

namespace {

std::string tx_label(size_t i, const Transaction& tx) {
  return "tx " + std::to_string(i) + " (" + tx.function + ")";
}

nlohmann::json counters_json(const CostCounters& c, const CostWeights& w) {
  return {{"sload", c.sload},   {"sstore", c.sstore}, {"mload", c.mload},
          {"mstore", c.mstore}, {"arith", c.arith},   {"weighted", weighted_cost(c, w)}};
}

// Delta-maintained intermediates must equal the oracle denotation on the
// union of the stored keys and the oracle's enumerable entry set.
void compare_intermediates(const StateStore& delta_state, const StateStore& ref_state,
                           const TypedSpec& spec, const Oracle& oracle,
                           const OracleResult& ores, size_t txi, const Transaction& tx,
                           std::vector<std::string>& mismatches) {
  for (const auto& r : spec.spec.rules) {
    if (r.kind != Rule::Kind::MapSum) continue;
    std::string iv = intermediate_state_name(r.target);
    if (r.index_vars.empty()) {
      Value got = 0;
      if (auto it = delta_state.scalars.find(iv); it != delta_state.scalars.end())
        got = it->second;
      Value want = oracle.denote_at(ref_state, r.target, {});
      if (got != want)
        mismatches.push_back(tx_label(txi, tx) + ": intermediate " + r.target + " = " +
                             got.str() + ", oracle " + want.str());
      continue;
    }
    std::set<Key> keys;
    if (auto it = delta_state.maps.find(iv); it != delta_state.maps.end())
      for (const auto& [k, v] : it->second) keys.insert(k);
    if (auto it = ores.intermediates.find(r.target); it != ores.intermediates.end())
      for (const auto& [k, v] : it->second) keys.insert(k);
    for (const auto& k : keys) {
      Value got = 0;
      if (auto it = delta_state.maps.find(iv); it != delta_state.maps.end())
        if (auto e = it->second.find(k); e != it->second.end()) got = e->second;
      Value want = oracle.denote_at(ref_state, r.target, k);
      if (got != want) {
        std::string ks;
        for (const auto& kv : k) ks += (ks.empty() ? "" : ",") + kv.str();
        mismatches.push_back(tx_label(txi, tx) + ": intermediate " + r.target + "[" + ks +
                             "] = " + got.str() + ", oracle " + want.str());
      }
    }
  }
}

}  // namespace

StateStore user_state(const StateStore& s) {
  StateStore out;
  for (const auto& [name, v] : s.scalars)
    if (!is_reserved_name(name)) out.scalars.emplace(name, v);
  for (const auto& [name, m] : s.maps)
    if (!is_reserved_name(name)) out.maps.emplace(name, m);
  return out;
}

BenchReport differential_test(const Program& contract, const TypedSpec& spec,
                              const std::vector<Transaction>& trace, const VMConfig& config,
                              InstrumentOptions delta_opts) {
  BenchReport rep;
  Program naive = instrument(contract, spec, InstrumentMode::Naive);
  Program delta = instrument(contract, spec, InstrumentMode::Delta, delta_opts);
  Oracle oracle(spec, config.mode);

  StateStore sa, sb, sc;
  auto& va = rep.accepted["oracle"];
  auto& vb = rep.accepted["naive"];
  auto& vc = rep.accepted["delta"];

  for (size_t i = 0; i < trace.size(); ++i) {
    const Transaction& tx = trace[i];
    StateStore before_a = sa;
    ExecOutcome oa = execute(sa, contract, tx, config);
    rep.totals["none"] += oa.cost;
    bool oracle_violated = false;
    OracleResult ores;
    if (oa.accepted()) {
      ores = oracle.check(sa);
      if (!ores.satisfied) {
        oracle_violated = true;
        sa = std::move(before_a);  // nullify the offending transaction
      }
    }
    bool expect_accept = oa.accepted() && !oracle_violated;
    va.push_back(expect_accept);

    ExecOutcome ob = execute(sb, naive, tx, config);
    rep.totals["naive"] += ob.cost;
    vb.push_back(ob.accepted());
    if (ob.accepted() != expect_accept)
      rep.mismatches.push_back(tx_label(i, tx) + ": naive " +
                               (ob.accepted() ? "accepted" : "reverted") + ", oracle says " +
                               (expect_accept ? "accept" : "reject"));

    ExecOutcome oc = execute(sc, delta, tx, config);
    rep.totals["delta"] += oc.cost;
    vc.push_back(oc.accepted());
    if (oc.accepted() != expect_accept)
      rep.mismatches.push_back(tx_label(i, tx) + ": delta " +
                               (oc.accepted() ? "accepted" : "reverted") + ", oracle says " +
                               (expect_accept ? "accept" : "reject"));

    if (user_state(sb) != user_state(sa))
      rep.mismatches.push_back(tx_label(i, tx) + ": naive user state diverged");
    if (user_state(sc) != user_state(sa))
      rep.mismatches.push_back(tx_label(i, tx) + ": delta user state diverged");

    if (expect_accept && oc.accepted())
      compare_intermediates(sc, sa, spec, oracle, ores, i, tx, rep.mismatches);
  }
  return rep;
}

BenchReport bench_compare(const Program& contract, const TypedSpec& spec,
                          const std::vector<Transaction>& trace, const VMConfig& config) {
  BenchReport rep;
  std::map<std::string, Program> programs;
  programs["none"] = contract;
  programs["delta"] = instrument(contract, spec, InstrumentMode::Delta, {true, true});
  programs["delta_noopt"] = instrument(contract, spec, InstrumentMode::Delta);
  programs["naive"] = instrument(contract, spec, InstrumentMode::Naive);

  for (const auto& [mode, prog] : programs) {
    StateStore state;
    TraceResult res = run_trace(state, prog, trace, config);
    rep.totals[mode] = res.total;
    auto& acc = rep.accepted[mode];
    for (const auto& o : res.outcomes) acc.push_back(o.accepted());
  }
  // Instrumented runs must agree with each other on every verdict; the
  // uninstrumented run may of course accept violating transactions.
  for (size_t i = 0; i < trace.size(); ++i) {
    if (rep.accepted["delta"][i] != rep.accepted["naive"][i] ||
        rep.accepted["delta"][i] != rep.accepted["delta_noopt"][i])
      rep.mismatches.push_back(tx_label(i, trace[i]) + ": instrumented verdicts disagree");
  }
  auto state_accesses = [&](const std::string& m) {
    return rep.totals[m].state_accesses();
  };
  if (state_accesses("delta") > 0)
    rep.naive_delta_state_ratio = static_cast<double>(state_accesses("naive")) /
                                  static_cast<double>(state_accesses("delta"));
  std::uint64_t wnone = weighted_cost(rep.totals["none"], config.weights);
  if (wnone > 0)
    rep.delta_none_weighted_ratio =
        static_cast<double>(weighted_cost(rep.totals["delta"], config.weights)) /
        static_cast<double>(wnone);
  return rep;
}

std::string BenchReport::to_json(const CostWeights& w) const {
  nlohmann::json j;
  j["prng"] = prng;
  j["seed"] = seed;
  for (const auto& [mode, c] : totals) j["totals"][mode] = counters_json(c, w);
  for (const auto& [mode, acc] : accepted) {
    std::uint64_t n = 0;
    for (bool b : acc)
      if (b) ++n;
    j["accepted"][mode] = n;
    j["transactions"] = acc.size();
  }
  j["ratios"]["naive_delta_state_accesses"] = naive_delta_state_ratio;
  j["ratios"]["delta_none_weighted"] = delta_none_weighted_ratio;
  j["mismatches"] = mismatches;
  return j.dump(2);
}

std::string BenchReport::table(const CostWeights& w) const {
  std::ostringstream os;
  os << "mode          sload    sstore   mload    mstore   arith    weighted\n";
  for (const auto& [mode, c] : totals) {
    os << mode;
    for (size_t i = mode.size(); i < 14; ++i) os << ' ';
    auto col = [&](std::uint64_t v) {
      std::string s = std::to_string(v);
      os << s;
      for (size_t i = s.size(); i < 9; ++i) os << ' ';
    };
    col(c.sload);
    col(c.sstore);
    col(c.mload);
    col(c.mstore);
    col(c.arith);
    os << weighted_cost(c, w) << "\n";
  }
  os << "naive/delta state accesses: " << naive_delta_state_ratio << "\n";
  os << "delta/none weighted cost:   " << delta_none_weighted_ratio << "\n";
  if (!mismatches.empty()) os << "MISMATCHES: " << mismatches.size() << "\n";
  return os.str();
}

}  // namespace ivc
