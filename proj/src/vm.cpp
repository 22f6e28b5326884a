#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "ivc/vm.hpp"
#include "json.hpp"

namespace ivc {

namespace {

struct Revert {
  std::string reason;
};

struct JournalEntry {
  std::string var;
  Key key;        // empty = scalar
  bool existed;
  Value old_value;
};

struct Frame {
  std::map<std::string, Value> temps;
};

class Interp {
 public:
  Interp(StateStore& state, const Program& prog, const VMConfig& cfg)
      : state_(state), prog_(prog), cfg_(cfg) {}

  ExecOutcome run(const Transaction& tx) {
    ExecOutcome out;
    const Function* f = prog_.find_function(tx.function);
    if (!f || !f->is_entry) {
      out.status = ExecOutcome::Status::Reverted;
      out.revert_reason = "UnknownEntry: " + tx.function;
      return out;
    }
    if (f->params.size() != tx.args.size()) {
      out.status = ExecOutcome::Status::Reverted;
      out.revert_reason = "ArgCountMismatch: " + tx.function;
      return out;
    }
    sender_ = normalize(tx.sender, cfg_.mode);
    Frame frame;
    for (size_t i = 0; i < f->params.size(); ++i)
      frame.temps[f->params[i]] = normalize(tx.args[i], cfg_.mode);
    frames_.push_back(std::move(frame));
    try {
      exec_block(f->body);
      out.status = ExecOutcome::Status::Accepted;
      for (const auto& j : journal_) {
        Value now = j.key.empty() ? state_.scalars[j.var] : state_.maps[j.var][j.key];
        if (!j.existed || now != j.old_value) out.changed_slots.push_back(slot_name(j));
      }
      std::sort(out.changed_slots.begin(), out.changed_slots.end());
    } catch (const Revert& r) {
      rollback();
      out.status = ExecOutcome::Status::Reverted;
      out.revert_reason = r.reason;
    }
    out.cost = cost_;
    return out;
  }

 private:
  static std::string slot_name(const JournalEntry& j) {
    std::string s = j.var;
    for (const auto& k : j.key) s += "[" + k.str() + "]";
    return s;
  }

  void rollback() {
    for (auto it = journal_.rbegin(); it != journal_.rend(); ++it) {
      if (it->key.empty()) {
        if (it->existed)
          state_.scalars[it->var] = it->old_value;
        else
          state_.scalars.erase(it->var);
      } else {
        if (it->existed)
          state_.maps[it->var][it->key] = it->old_value;
        else {
          auto mit = state_.maps.find(it->var);
          if (mit != state_.maps.end()) {
            mit->second.erase(it->key);
            if (mit->second.empty()) state_.maps.erase(mit);
          }
        }
      }
    }
    journal_.clear();
  }

  const StateDecl& decl_of(const std::string& var, SourcePos pos) {
    const StateDecl* d = prog_.find_decl(var);
    if (!d) throw VmError("UnknownStateVar", var, pos);
    return *d;
  }

  Value eval(const CExprPtr& e) {
    switch (e->kind) {
      case CExpr::Kind::IntConst: return normalize(e->value, cfg_.mode);
      case CExpr::Kind::TempRef: {
        auto& temps = frames_.back().temps;
        auto it = temps.find(e->name);
        return it == temps.end() ? Value(0) : it->second;  // unassigned temps read 0
      }
      case CExpr::Kind::Sender: return sender_;
      case CExpr::Kind::CallDepth: return Value(static_cast<int>(frames_.size()));
      case CExpr::Kind::BinOp: {
        Value a = eval(e->lhs);
        Value b = eval(e->rhs);
        ++cost_.arith;
        try {
          return eval_binop(e->op, a, b, cfg_.mode);
        } catch (const DivisionByZero&) {
          throw Revert{"DivisionByZero"};
        }
      }
    }
    throw VmError("Internal", "bad expr");
  }

  Key eval_key(const Address& a) {
    Key k;
    k.reserve(a.indices.size());
    for (const auto& ix : a.indices) k.push_back(eval(ix));
    return k;
  }

  Value read_slot(const Address& a, SourcePos pos) {
    const StateDecl& d = decl_of(a.var, pos);
    Key k = eval_key(a);
    if (d.kind == VarKind::State) {
      ++cost_.sload;
      if (d.arity == 0) {
        auto it = state_.scalars.find(a.var);
        return it == state_.scalars.end() ? Value(0) : it->second;
      }
      auto mit = state_.maps.find(a.var);
      if (mit == state_.maps.end()) return 0;
      auto it = mit->second.find(k);
      return it == mit->second.end() ? Value(0) : it->second;
    }
    ++cost_.mload;
    if (d.arity == 0) {
      auto it = mem_scalars_.find(a.var);
      return it == mem_scalars_.end() ? Value(0) : it->second;
    }
    auto mit = mem_maps_.find(a.var);
    if (mit == mem_maps_.end()) return 0;
    auto it = mit->second.find(k);
    return it == mit->second.end() ? Value(0) : it->second;
  }

  void write_slot(const Address& a, Value v, SourcePos pos) {
    const StateDecl& d = decl_of(a.var, pos);
    Key k = eval_key(a);
    if (d.kind == VarKind::State) {
      ++cost_.sstore;
      if (d.arity == 0) {
        auto it = state_.scalars.find(a.var);
        if (!written_.count({a.var, {}}))
          journal_.push_back({a.var, {}, it != state_.scalars.end(),
                              it != state_.scalars.end() ? it->second : Value(0)});
        written_.insert({a.var, {}});
        state_.scalars[a.var] = std::move(v);
      } else {
        auto& m = state_.maps[a.var];
        auto it = m.find(k);
        if (!written_.count({a.var, k}))
          journal_.push_back({a.var, k, it != m.end(), it != m.end() ? it->second : Value(0)});
        written_.insert({a.var, k});
        m[k] = std::move(v);
      }
    } else {
      ++cost_.mstore;
      if (d.arity == 0)
        mem_scalars_[a.var] = std::move(v);
      else
        mem_maps_[a.var][k] = std::move(v);
    }
  }

  const std::map<Key, Value>* map_entries(const std::string& var, VarKind kind) {
    if (kind == VarKind::State) {
      auto it = state_.maps.find(var);
      return it == state_.maps.end() ? nullptr : &it->second;
    }
    auto it = mem_maps_.find(var);
    return it == mem_maps_.end() ? nullptr : &it->second;
  }

  // Iteration assignments for a for-in loop, snapshotted at loop entry.
  // With one temp per key position the loop walks full key tuples; with
  // fewer temps each temp projects the key positions where it indexes the
  // map in the body, and distinct consistent projections are iterated in
  // ascending order.
  std::set<std::vector<Value>> forin_domain(const Statement& s) {
    const StateDecl& d = decl_of(s.callee, s.pos);
    if (d.arity == 0) throw VmError("ForInScalar", s.callee, s.pos);
    std::set<std::vector<Value>> dom;
    const auto* entries = map_entries(s.callee, d.kind);
    if (!entries) return dom;
    size_t n = s.iters.size();
    if (static_cast<int>(n) == d.arity) {
      for (const auto& [k, v] : *entries) dom.insert(k);
      return dom;
    }
    std::vector<std::vector<int>> positions(n);
    for (size_t i = 0; i < n; ++i) positions[i] = index_positions(s.body, s.callee, s.iters[i]);
    for (const auto& [k, v] : *entries) {
      std::vector<Value> assign(n);
      bool ok = true;
      for (size_t i = 0; i < n && ok; ++i) {
        if (positions[i].empty()) {
          ok = false;
          break;
        }
        assign[i] = k[static_cast<size_t>(positions[i][0])];
        for (int p : positions[i])
          if (k[static_cast<size_t>(p)] != assign[i]) ok = false;
      }
      if (ok) dom.insert(std::move(assign));
    }
    return dom;
  }

  static std::vector<int> index_positions(const StmtList& body, const std::string& map,
                                          const std::string& temp) {
    std::vector<int> out;
    std::function<void(const StmtList&)> scan = [&](const StmtList& b) {
      for (const auto& s : b) {
        if (s->kind == Statement::Kind::Load || s->kind == Statement::Kind::Store) {
          if (s->addr.var == map) {
            for (size_t i = 0; i < s->addr.indices.size(); ++i) {
              const auto& ix = s->addr.indices[i];
              if (ix->kind == CExpr::Kind::TempRef && ix->name == temp) {
                if (std::find(out.begin(), out.end(), static_cast<int>(i)) == out.end())
                  out.push_back(static_cast<int>(i));
              }
            }
          }
        }
        if (!s->body.empty()) scan(s->body);
      }
    };
    scan(body);
    std::sort(out.begin(), out.end());
    return out;
  }

  void exec_block(const StmtList& body) {
    for (const auto& s : body) exec_stmt(*s);
  }

  void exec_stmt(const Statement& s) {
    switch (s.kind) {
      case Statement::Kind::Assign:
        frames_.back().temps[s.temp] = eval(s.expr);
        return;
      case Statement::Kind::Load:
        frames_.back().temps[s.temp] = read_slot(s.addr, s.pos);
        return;
      case Statement::Kind::Store:
        write_slot(s.addr, eval(s.expr), s.pos);
        return;
      case Statement::Kind::Assert:
        if (eval(s.expr) == 0) throw Revert{"AssertFailed"};
        return;
      case Statement::Kind::If:
        if (eval(s.expr) != 0) exec_block(s.body);
        return;
      case Statement::Kind::ForIn: {
        auto dom = forin_domain(s);
        auto& temps = frames_.back().temps;
        for (const auto& assign : dom) {
          ++cost_.arith;  // per-iteration bookkeeping
          for (size_t i = 0; i < s.iters.size(); ++i) temps[s.iters[i]] = assign[i];
          exec_block(s.body);
        }
        for (const auto& t : s.iters) temps.erase(t);
        return;
      }
      case Statement::Kind::Call: {
        const Function* callee = prog_.find_function(s.callee);
        if (!callee) throw VmError("UnknownCallee", s.callee, s.pos);
        if (static_cast<int>(frames_.size()) >= cfg_.depth_limit)
          throw Revert{"DepthLimitExceeded"};
        Frame frame;
        for (size_t i = 0; i < s.args.size(); ++i)
          frame.temps[callee->params[i]] = eval(s.args[i]);
        frames_.push_back(std::move(frame));
        exec_block(callee->body);
        frames_.pop_back();
        return;
      }
    }
  }

  StateStore& state_;
  const Program& prog_;
  const VMConfig& cfg_;
  Value sender_;
  std::vector<Frame> frames_;
  std::vector<JournalEntry> journal_;
  std::set<std::pair<std::string, Key>> written_;
  // Transaction-scoped memory arena: zeroed per transaction, never journaled,
  // never part of snapshots.
  std::map<std::string, Value> mem_scalars_;
  std::map<std::string, std::map<Key, Value>> mem_maps_;
  CostCounters cost_;
};

}  // namespace

ExecOutcome execute(StateStore& state, const Program& program, const Transaction& tx,
                    const VMConfig& config) {
  Interp interp(state, program, config);
  return interp.run(tx);
}

TraceResult run_trace(StateStore& state, const Program& program,
                      const std::vector<Transaction>& trace, const VMConfig& config) {
  TraceResult res;
  res.outcomes.reserve(trace.size());
  for (const auto& tx : trace) {
    res.outcomes.push_back(execute(state, program, tx, config));
    res.total += res.outcomes.back().cost;
  }
  return res;
}

std::string snapshot_json(const StateStore& s) {
  nlohmann::json j;
  j["scalars"] = nlohmann::json::object();
  j["maps"] = nlohmann::json::object();
  for (const auto& [name, v] : s.scalars) j["scalars"][name] = v.str();
  for (const auto& [name, entries] : s.maps) {
    auto& obj = j["maps"][name] = nlohmann::json::object();
    for (const auto& [k, v] : entries) {
      std::string key;
      for (size_t i = 0; i < k.size(); ++i) key += (i ? "," : "") + k[i].str();
      obj[key] = v.str();
    }
  }
  return j.dump(2);
}

}  // namespace ivc
