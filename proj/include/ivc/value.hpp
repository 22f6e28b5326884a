#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <string>
#include <vector>

#include "ivc/diag.hpp"

namespace ivc {

// All runtime integers are arbitrary-precision; wrap256 mode reduces every
// arithmetic result into [0, 2^256), modelling EVM unsigned words.
using Value = boost::multiprecision::cpp_int;
using Key = std::vector<Value>;

enum class IntMode { Bigint, Wrap256 };

enum class BinOpKind { Add, Sub, Mul, Div, Eq, Ne, Lt, Le, Gt, Ge };

inline const Value& wrap_modulus() {
  static const Value m = Value(1) << 256;
  return m;
}

inline Value normalize(Value v, IntMode mode) {
  if (mode == IntMode::Bigint) return v;
  v %= wrap_modulus();
  if (v < 0) v += wrap_modulus();
  return v;
}

// Division by zero is signalled to the caller; the VM turns it into a revert
// and the oracle treats the enclosing rule as violated.
struct DivisionByZero {};

inline Value eval_binop(BinOpKind op, const Value& a, const Value& b, IntMode mode) {
  switch (op) {
    case BinOpKind::Add: return normalize(a + b, mode);
    case BinOpKind::Sub: return normalize(a - b, mode);
    case BinOpKind::Mul: return normalize(a * b, mode);
    case BinOpKind::Div:
      if (b == 0) throw DivisionByZero{};
      return normalize(a / b, mode);  // cpp_int truncates toward zero
    case BinOpKind::Eq: return Value(a == b ? 1 : 0);
    case BinOpKind::Ne: return Value(a != b ? 1 : 0);
    case BinOpKind::Lt: return Value(a < b ? 1 : 0);
    case BinOpKind::Le: return Value(a <= b ? 1 : 0);
    case BinOpKind::Gt: return Value(a > b ? 1 : 0);
    case BinOpKind::Ge: return Value(a >= b ? 1 : 0);
  }
  throw Error("Internal", "unhandled binop");
}

inline bool is_comparison(BinOpKind op) {
  switch (op) {
    case BinOpKind::Eq:
    case BinOpKind::Ne:
    case BinOpKind::Lt:
    case BinOpKind::Le:
    case BinOpKind::Gt:
    case BinOpKind::Ge: return true;
    default: return false;
  }
}

inline std::string binop_text(BinOpKind op) {
  switch (op) {
    case BinOpKind::Add: return "+";
    case BinOpKind::Sub: return "-";
    case BinOpKind::Mul: return "*";
    case BinOpKind::Div: return "/";
    case BinOpKind::Eq: return "==";
    case BinOpKind::Ne: return "!=";
    case BinOpKind::Lt: return "<";
    case BinOpKind::Le: return "<=";
    case BinOpKind::Gt: return ">";
    case BinOpKind::Ge: return ">=";
  }
  return "?";
}

}  // namespace ivc
