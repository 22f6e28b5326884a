#pragma once

#include <string>

#include "ivc/binder.hpp"
#include "ivc/contract_ast.hpp"
#include "ivc/spec_ast.hpp"

namespace ivc {

// delta: maintain intermediates incrementally around every store and check
//   only marked assertion instances at transaction exit.
// naive: recompute every intermediate and every assertion instance from
//   scratch at transaction exit.
// none: identity.
enum class InstrumentMode { Delta, Naive, None };

struct InstrumentOptions {
  bool prune = false;  // drop exit checks an entry function can never affect
  bool cache = false;  // state-variable cache pass on the result
};

struct InstrumentStats {
  int stores_instrumented = 0;
  int updates_emitted = 0;
  int markers_emitted = 0;
  int checks_emitted = 0;
  int checks_pruned = 0;
  int cached_addresses = 0;
};

Program instrument(const Program& program, const TypedSpec& spec, InstrumentMode mode,
                   InstrumentOptions opts = {}, InstrumentStats* stats = nullptr);

// Standalone passes over an already instrumented program. instrument() runs
// them itself when the options ask for it.
Program prune_checks(const Program& instrumented, const TypedSpec& spec,
                     InstrumentStats* stats = nullptr);
Program cache_state_vars(const Program& program, InstrumentStats* stats = nullptr);

std::string stats_json(const InstrumentStats& s);

// Fresh-name scheme (reserved "__" namespace, rejected in instrumenter input):
//   __iv_<target>  persistent state for a delta-maintained intermediate
//   __nv_<target>  transaction-memory intermediate in naive mode
//   __mk_<rule>    transaction-memory marker map for a ForAll rule
//   __dm_<rule>_<var>  naive-mode quantifier domain scratch
//   __cd, __cd_t, __cd_t1  call-depth plumbing
//   __t<n>, __sc<n>  lowering temps / cache temps
inline std::string intermediate_state_name(const std::string& target) { return "__iv_" + target; }
inline std::string intermediate_memory_name(const std::string& target) { return "__nv_" + target; }
inline std::string marker_name(size_t rule_index) { return "__mk_" + std::to_string(rule_index); }

}  // namespace ivc
