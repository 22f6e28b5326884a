#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ivc/vm.hpp"

namespace ivc {

// Deterministic pseudo-random traces. The generator is mt19937_64 seeded
// directly with `seed`; values are reduced with plain modulo so traces
// reproduce across platforms and reimplementations.
struct TraceSpec {
  enum class Kind {
    Erc20Transfer,
    Erc721Transfer,
    Erc1202Vote,
    AttackBatchOverflow,
    AttackDoubleVote,
  };
  Kind kind = Kind::Erc20Transfer;
  int accounts = 10;   // N
  int txs = 100;       // M (setup transactions come on top)
  std::uint64_t seed = 1;
};

TraceSpec::Kind trace_kind_from_string(const std::string& s);
std::string to_string(TraceSpec::Kind k);

std::vector<Transaction> gen_trace(const TraceSpec& spec);

std::string trace_to_jsonl(const std::vector<Transaction>& trace);
std::vector<Transaction> trace_from_jsonl(const std::string& text);

}  // namespace ivc
