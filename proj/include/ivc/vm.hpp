#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ivc/contract_ast.hpp"
#include "ivc/value.hpp"

namespace ivc {

// Persistent per-contract state. Reads of undefined slots yield 0 and do not
// define them; a slot becomes defined on first store, even when storing 0.
// Defined-key sets drive for-in loops, quantifier domains and sum domains.
struct StateStore {
  std::map<std::string, Value> scalars;
  std::map<std::string, std::map<Key, Value>> maps;

  bool operator==(const StateStore& o) const = default;
};

// Canonical JSON (sorted keys, decimal-string values) for golden tests and
// byte-identical revert-atomicity comparisons.
std::string snapshot_json(const StateStore& s);

struct Transaction {
  Value sender;
  std::string function;
  std::vector<Value> args;
};

struct CostCounters {
  std::uint64_t sload = 0, sstore = 0, mload = 0, mstore = 0, arith = 0;

  CostCounters& operator+=(const CostCounters& o) {
    sload += o.sload;
    sstore += o.sstore;
    mload += o.mload;
    mstore += o.mstore;
    arith += o.arith;
    return *this;
  }
  std::uint64_t state_accesses() const { return sload + sstore; }
};

struct CostWeights {
  std::uint64_t sload = 100, sstore = 100, mload = 1, mstore = 1, arith = 1;
};

inline std::uint64_t weighted_cost(const CostCounters& c, const CostWeights& w) {
  return c.sload * w.sload + c.sstore * w.sstore + c.mload * w.mload + c.mstore * w.mstore +
         c.arith * w.arith;
}

struct VMConfig {
  IntMode mode = IntMode::Bigint;
  int depth_limit = 64;
  CostWeights weights;
};

struct ExecOutcome {
  enum class Status { Accepted, Reverted };
  Status status = Status::Accepted;
  std::string revert_reason;                // empty when accepted
  CostCounters cost;
  std::vector<std::string> changed_slots;   // empty when reverted

  bool accepted() const { return status == Status::Accepted; }
};

// Big-step interpretation of one transaction. A failing assert, division by
// zero or exceeded call depth reverts every state effect; the store is left
// bit-for-bit at its pre-transaction content.
ExecOutcome execute(StateStore& state, const Program& program, const Transaction& tx,
                    const VMConfig& config);

struct TraceResult {
  std::vector<ExecOutcome> outcomes;
  CostCounters total;
};

TraceResult run_trace(StateStore& state, const Program& program,
                      const std::vector<Transaction>& trace, const VMConfig& config);

}  // namespace ivc
