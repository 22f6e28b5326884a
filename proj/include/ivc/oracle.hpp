#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ivc/spec_ast.hpp"
#include "ivc/vm.hpp"

namespace ivc {

struct OracleViolation {
  size_t rule_index;
  Key assignment;  // quantifier variable values, rule order
};

struct OracleResult {
  bool satisfied = true;
  std::vector<OracleViolation> violations;
  // Intermediate denotations over their enumerable entry sets (the product
  // of the index variables' key domains).
  std::map<std::string, std::map<Key, Value>> intermediates;
};

// Brute-force reference semantics: every free variable ranges over the union
// of projected defined keys of the maps it indexes (an intermediate's key
// set being the product of its index domains), every MapSum entry is the
// conditional sum over the over-variables' domains, and every ForAll
// instance over the quantifier domains must hold. Arithmetic runs in the
// same integer ring as the VM. Division by zero in any rule marks the whole
// check violated.
class Oracle {
 public:
  Oracle(const TypedSpec& spec, IntMode mode);

  OracleResult check(const StateStore& state) const;

  // Denotation of one intermediate at an arbitrary key, for comparing
  // delta-maintained state entries outside the enumerable entry set.
  Value denote_at(const StateStore& state, const std::string& target, const Key& key) const;

 private:
  struct Eval;
  const TypedSpec& spec_;
  IntMode mode_;
};

}  // namespace ivc
