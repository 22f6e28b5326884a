#pragma once

#include <map>
#include <string>
#include <vector>

#include "ivc/instrument.hpp"
#include "ivc/oracle.hpp"
#include "ivc/vm.hpp"

namespace ivc {

struct BenchReport {
  std::uint64_t seed = 0;
  std::string prng = "mt19937_64";
  std::map<std::string, CostCounters> totals;            // per mode
  std::map<std::string, std::vector<bool>> accepted;     // per mode, per tx
  std::vector<std::string> mismatches;
  // naive vs delta persistent-state accesses, delta vs uninstrumented
  // weighted cost; 0 when a denominator is 0
  double naive_delta_state_ratio = 0;
  double delta_none_weighted_ratio = 0;

  bool ok() const { return mismatches.empty(); }
  std::string to_json(const CostWeights& w) const;
  std::string table(const CostWeights& w) const;
};

// Runs the trace three ways: (a) uninstrumented with the brute-force oracle
// checked after every transaction (a violating transaction is rolled back so
// the runs stay state-aligned), (b) naive instrumentation, (c) delta
// instrumentation. Any divergence in verdicts, user-visible state, or
// delta-maintained intermediate values is a mismatch.
BenchReport differential_test(const Program& contract, const TypedSpec& spec,
                              const std::vector<Transaction>& trace, const VMConfig& config,
                              InstrumentOptions delta_opts = {});

// Cost comparison: uninstrumented, full delta pipeline (prune + cache, the
// configuration the paper evaluates), plain delta, and naive recheck.
BenchReport bench_compare(const Program& contract, const TypedSpec& spec,
                          const std::vector<Transaction>& trace, const VMConfig& config);

// Persistent state restricted to contract-declared variables (drops the
// "__" instrumentation namespace).
StateStore user_state(const StateStore& s);

}  // namespace ivc
