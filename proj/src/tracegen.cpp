#include <algorithm>
#include <random>
#include <sstream>

#include "ivc/diag.hpp"
#include "ivc/tracegen.hpp"
#include "json.hpp"

namespace ivc {

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  // modulo reduction: the slight bias is irrelevant here and the results are
  // identical on every platform, unlike std::uniform_int_distribution
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }
  int pick(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

 private:
  std::mt19937_64 gen_;
};

// init mints the supply to account 1; a distribution phase then transfers a
// stake to every other account (all N accounts hold a balance, as on a real
// token ledger), and the rest of the trace is random valid transfers.
std::vector<Transaction> erc20_trace(const TraceSpec& spec) {
  if (spec.accounts < 2) throw Error("InvalidParams", "erc20 trace needs at least 2 accounts");
  Rng rng(spec.seed);
  std::vector<Transaction> out;
  int n = spec.accounts;
  std::vector<Value> bal(static_cast<size_t>(n) + 1, 0);
  Value supply = Value(1000) * n;
  out.push_back({1, "init", {supply}});
  bal[1] = supply;
  std::vector<int> funded{1};
  for (int i = 0; i < spec.txs; ++i) {
    int fund_target = 2 + i;
    if (fund_target <= n) {
      out.push_back({1, "transfer", {fund_target, 1000}});
      bal[1] -= 1000;
      bal[static_cast<size_t>(fund_target)] += 1000;
      funded.push_back(fund_target);
      continue;
    }
    int from = funded[static_cast<size_t>(rng.pick(static_cast<int>(funded.size())))];
    int to = 1 + rng.pick(n);
    Value max = bal[static_cast<size_t>(from)];
    Value value = Value(1) + Value(rng.below(1000)) % max;
    out.push_back({from, "transfer", {to, value}});
    bal[static_cast<size_t>(from)] -= value;
    bal[static_cast<size_t>(to)] += value;
    if (bal[static_cast<size_t>(from)] == 0)
      funded.erase(std::find(funded.begin(), funded.end(), from));
    if (std::find(funded.begin(), funded.end(), to) == funded.end())
      funded.push_back(to);
  }
  return out;
}

std::vector<Transaction> erc721_trace(const TraceSpec& spec) {
  if (spec.accounts < 2) throw Error("InvalidParams", "erc721 trace needs at least 2 accounts");
  Rng rng(spec.seed);
  std::vector<Transaction> out;
  std::vector<int> owner{0};  // tokenId -> owner, index 0 unused
  int n = spec.accounts;
  for (int i = 0; i < spec.txs; ++i) {
    bool mint = owner.size() <= 1 || rng.pick(100) < 30;
    if (mint) {
      int to = 1 + rng.pick(n);
      out.push_back({1, "mint", {to, static_cast<int>(owner.size())}});
      owner.push_back(to);
    } else {
      int tid = 1 + rng.pick(static_cast<int>(owner.size()) - 1);
      int to = 1 + rng.pick(n);
      out.push_back({owner[static_cast<size_t>(tid)], "transfer", {to, tid}});
      owner[static_cast<size_t>(tid)] = to;
    }
  }
  return out;
}

// One createIssue followed by five votes from (mostly) distinct voters; a
// small repeat-voter rate exercises the double-vote violation path.
std::vector<Transaction> erc1202_trace(const TraceSpec& spec) {
  if (spec.accounts < 5) throw Error("InvalidParams", "erc1202 trace needs at least 5 voters");
  Rng rng(spec.seed);
  std::vector<Transaction> out;
  int n = spec.accounts;
  int issue = 0;
  while (static_cast<int>(out.size()) < spec.txs) {
    ++issue;
    int options = 2 + rng.pick(3);
    out.push_back({1, "createIssue", {issue, options}});
    std::vector<int> voted;
    for (int v = 0; v < 5 && static_cast<int>(out.size()) < spec.txs; ++v) {
      int voter;
      if (!voted.empty() && rng.pick(100) < 8) {
        voter = voted[static_cast<size_t>(rng.pick(static_cast<int>(voted.size())))];
      } else {
        do {
          voter = 1 + rng.pick(n);
        } while (std::find(voted.begin(), voted.end(), voter) != voted.end());
      }
      voted.push_back(voter);
      out.push_back({voter, "vote", {issue, 1 + rng.pick(options)}});
    }
  }
  return out;
}

}  // namespace

TraceSpec::Kind trace_kind_from_string(const std::string& s) {
  if (s == "erc20_transfer") return TraceSpec::Kind::Erc20Transfer;
  if (s == "erc721_transfer") return TraceSpec::Kind::Erc721Transfer;
  if (s == "erc1202_vote") return TraceSpec::Kind::Erc1202Vote;
  if (s == "attack_batch_overflow") return TraceSpec::Kind::AttackBatchOverflow;
  if (s == "attack_double_vote") return TraceSpec::Kind::AttackDoubleVote;
  if (s == "custom")
    throw Error("InvalidParams", "custom traces are plain JSONL files; pass them to run/difftest directly");
  throw Error("InvalidParams", "unknown trace kind: " + s);
}

std::string to_string(TraceSpec::Kind k) {
  switch (k) {
    case TraceSpec::Kind::Erc20Transfer: return "erc20_transfer";
    case TraceSpec::Kind::Erc721Transfer: return "erc721_transfer";
    case TraceSpec::Kind::Erc1202Vote: return "erc1202_vote";
    case TraceSpec::Kind::AttackBatchOverflow: return "attack_batch_overflow";
    case TraceSpec::Kind::AttackDoubleVote: return "attack_double_vote";
  }
  return "?";
}

std::vector<Transaction> gen_trace(const TraceSpec& spec) {
  switch (spec.kind) {
    case TraceSpec::Kind::Erc20Transfer: return erc20_trace(spec);
    case TraceSpec::Kind::Erc721Transfer: return erc721_trace(spec);
    case TraceSpec::Kind::Erc1202Vote: return erc1202_trace(spec);
    case TraceSpec::Kind::AttackBatchOverflow: {
      // The BEC-style exploit: 2 * 2^255 wraps to 0, bypassing the balance
      // guard while crediting both receivers 2^255.
      Value huge = Value(1) << 255;
      return {{1, "init", {1000}}, {1, "batchTransfer", {2, 3, huge}}};
    }
    case TraceSpec::Kind::AttackDoubleVote:
      return {{1, "createIssue", {1, 3}}, {2, "vote", {1, 1}}, {2, "vote", {1, 2}}};
  }
  throw Error("InvalidParams", "bad trace kind");
}

std::string trace_to_jsonl(const std::vector<Transaction>& trace) {
  std::ostringstream os;
  for (const auto& tx : trace) {
    nlohmann::json j;
    // values beyond 2^53 are not exact in JSON numbers; emit decimal strings
    auto encode = [](const Value& v) -> nlohmann::json {
      static const Value max_exact = (Value(1) << 53);
      if (v >= 0 && v < max_exact) return static_cast<std::uint64_t>(v);
      return v.str();
    };
    j["sender"] = encode(tx.sender);
    j["function"] = tx.function;
    auto args = nlohmann::json::array();
    for (const auto& a : tx.args) args.push_back(encode(a));
    j["args"] = std::move(args);
    os << j.dump() << "\n";
  }
  return os.str();
}

std::vector<Transaction> trace_from_jsonl(const std::string& text) {
  std::vector<Transaction> out;
  std::istringstream is(text);
  std::string line;
  auto decode = [](const nlohmann::json& j) -> Value {
    if (j.is_string()) return Value(j.get<std::string>());
    if (j.is_number_unsigned()) return Value(j.get<std::uint64_t>());
    if (j.is_number_integer()) return Value(j.get<std::int64_t>());
    throw Error("InvalidParams", "trace values must be integers or decimal strings");
  };
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError("SyntaxError", "bad JSON on trace line " + std::to_string(lineno));
    Transaction tx;
    tx.sender = decode(j.at("sender"));
    tx.function = j.at("function").get<std::string>();
    for (const auto& a : j.at("args")) tx.args.push_back(decode(a));
    out.push_back(std::move(tx));
  }
  return out;
}

}  // namespace ivc
