#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ivc/binder.hpp"
#include "ivc/contract_lang.hpp"
#include "ivc/harness.hpp"
#include "ivc/instrument.hpp"
#include "ivc/oracle.hpp"
#include "ivc/spec_ast.hpp"
#include "ivc/tracegen.hpp"
#include "json.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ivc::Error("IoError", "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ivc::Error("IoError", "cannot write " + path);
  out << content;
}

std::string stem_of(const std::string& path) {
  size_t slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  size_t dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

struct VmFlags {
  std::string int_mode = "bigint";
  std::string weights;
  int depth_limit = 64;

  void attach(CLI::App* cmd) {
    cmd->add_option("--int-mode", int_mode, "bigint|wrap256")
        ->check(CLI::IsMember({"bigint", "wrap256"}));
    cmd->add_option("--weights", weights, "cost weights, e.g. sload=100,sstore=100,arith=1");
    cmd->add_option("--depth-limit", depth_limit, "call depth limit");
  }

  ivc::VMConfig config() const {
    ivc::VMConfig cfg;
    cfg.mode = int_mode == "wrap256" ? ivc::IntMode::Wrap256 : ivc::IntMode::Bigint;
    cfg.depth_limit = depth_limit;
    std::istringstream is(weights);
    std::string item;
    while (std::getline(is, item, ',')) {
      if (item.empty()) continue;
      size_t eq = item.find('=');
      if (eq == std::string::npos)
        throw ivc::Error("InvalidParams", "bad weight entry: " + item);
      std::string key = item.substr(0, eq);
      std::uint64_t v = std::stoull(item.substr(eq + 1));
      if (key == "sload")
        cfg.weights.sload = v;
      else if (key == "sstore")
        cfg.weights.sstore = v;
      else if (key == "mload")
        cfg.weights.mload = v;
      else if (key == "mstore")
        cfg.weights.mstore = v;
      else if (key == "arith")
        cfg.weights.arith = v;
      else
        throw ivc::Error("InvalidParams", "unknown weight: " + key);
    }
    return cfg;
  }
};

ivc::Program load_contract(const std::string& path, bool reject_reserved) {
  return ivc::parse_contract(read_file(path), stem_of(path), {reject_reserved});
}

// Traces generated by gen-trace carry "# mt19937_64 seed=S ..." headers.
std::uint64_t seed_of_trace(const std::string& text) {
  if (text.rfind("# mt19937_64 seed=", 0) != 0) return 0;
  return std::stoull(text.substr(18));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ivc: invariant instrumentation compiler and reference VM"};
  app.require_subcommand(1);

  // instrument
  auto* inst = app.add_subcommand("instrument", "compile a contract against an invariant spec");
  std::string contract_path, spec_path, out_path, stats_path, mode = "delta";
  bool prune = false, cache = false;
  inst->add_option("--contract", contract_path)->required();
  inst->add_option("--spec", spec_path)->required();
  inst->add_option("--mode", mode)->check(CLI::IsMember({"delta", "naive", "none"}));
  inst->add_flag("--prune", prune, "prune exit checks per entry function");
  inst->add_flag("--cache", cache, "state-variable cache pass");
  inst->add_option("-o,--output", out_path)->required();
  inst->add_option("--stats", stats_path, "write instrumentation statistics JSON");

  // run
  auto* run = app.add_subcommand("run", "execute a transaction trace");
  std::string run_contract, trace_path, report_path, state_out;
  VmFlags run_vm;
  run->add_option("--contract", run_contract)->required();
  run->add_option("--trace", trace_path)->required();
  run->add_option("--report", report_path);
  run->add_option("--state-out", state_out, "write final state snapshot JSON");
  run_vm.attach(run);

  // gen-trace
  auto* gen = app.add_subcommand("gen-trace", "generate a deterministic transaction trace");
  std::string kind = "erc20_transfer", gen_out;
  int accounts = 10, txs = 100;
  std::uint64_t seed = 1;
  gen->add_option("--kind", kind)->required();
  gen->add_option("--accounts", accounts);
  gen->add_option("--txs", txs);
  gen->add_option("--seed", seed);
  gen->add_option("-o,--output", gen_out)->required();

  // difftest
  auto* diff = app.add_subcommand("difftest", "oracle vs naive vs delta differential test");
  std::string d_contract, d_spec, d_trace, d_report;
  bool d_prune = false, d_cache = false;
  VmFlags d_vm;
  diff->add_option("--contract", d_contract)->required();
  diff->add_option("--spec", d_spec)->required();
  diff->add_option("--trace", d_trace)->required();
  diff->add_option("--report", d_report);
  diff->add_flag("--prune", d_prune, "run the delta leg with pruning");
  diff->add_flag("--cache", d_cache, "run the delta leg with the cache pass");
  d_vm.attach(diff);

  // bench
  auto* bench = app.add_subcommand("bench", "cost comparison none/delta/naive");
  std::string b_contract, b_spec, b_trace, b_report;
  VmFlags b_vm;
  bench->add_option("--contract", b_contract)->required();
  bench->add_option("--spec", b_spec)->required();
  bench->add_option("--trace", b_trace)->required();
  bench->add_option("--report", b_report);
  b_vm.attach(bench);

  // bindings (debug dump)
  auto* bind = app.add_subcommand("bindings", "dump binding sets per store and rule as JSON");
  std::string bi_contract, bi_spec, bi_out;
  bind->add_option("--contract", bi_contract)->required();
  bind->add_option("--spec", bi_spec)->required();
  bind->add_option("-o,--output", bi_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*inst) {
      ivc::Program p = load_contract(contract_path, true);
      ivc::InvariantSpec raw = ivc::parse_spec(read_file(spec_path));
      ivc::TypedSpec spec = ivc::check_spec(raw, p);
      ivc::InstrumentMode m = mode == "delta"   ? ivc::InstrumentMode::Delta
                              : mode == "naive" ? ivc::InstrumentMode::Naive
                                                : ivc::InstrumentMode::None;
      ivc::InstrumentStats stats;
      ivc::Program out = ivc::instrument(p, spec, m, {prune, cache}, &stats);
      write_file(out_path, ivc::pretty_print(out));
      if (!stats_path.empty()) write_file(stats_path, ivc::stats_json(stats));
      return 0;
    }
    if (*run) {
      ivc::Program p = load_contract(run_contract, false);
      auto trace = ivc::trace_from_jsonl(read_file(trace_path));
      ivc::VMConfig cfg = run_vm.config();
      ivc::StateStore state;
      ivc::TraceResult res = ivc::run_trace(state, p, trace, cfg);
      size_t accepted = 0;
      for (const auto& o : res.outcomes)
        if (o.accepted()) ++accepted;
      nlohmann::json j;
      j["transactions"] = res.outcomes.size();
      j["accepted"] = accepted;
      j["reverted"] = res.outcomes.size() - accepted;
      j["cost"] = {{"sload", res.total.sload},
                   {"sstore", res.total.sstore},
                   {"mload", res.total.mload},
                   {"mstore", res.total.mstore},
                   {"arith", res.total.arith},
                   {"weighted", weighted_cost(res.total, cfg.weights)}};
      auto outcomes = nlohmann::json::array();
      for (const auto& o : res.outcomes)
        outcomes.push_back(o.accepted() ? "accepted" : "reverted: " + o.revert_reason);
      j["outcomes"] = std::move(outcomes);
      std::string text = j.dump(2);
      if (!report_path.empty())
        write_file(report_path, text);
      else
        std::cout << text << "\n";
      if (!state_out.empty()) write_file(state_out, ivc::snapshot_json(state));
      return 0;
    }
    if (*gen) {
      ivc::TraceSpec ts;
      ts.kind = ivc::trace_kind_from_string(kind);
      ts.accounts = accounts;
      ts.txs = txs;
      ts.seed = seed;
      std::string header = "# mt19937_64 seed=" + std::to_string(seed) + " kind=" + kind +
                           " accounts=" + std::to_string(accounts) +
                           " txs=" + std::to_string(txs) + "\n";
      write_file(gen_out, header + ivc::trace_to_jsonl(ivc::gen_trace(ts)));
      return 0;
    }
    if (*diff) {
      ivc::Program p = load_contract(d_contract, true);
      ivc::TypedSpec spec = ivc::check_spec(ivc::parse_spec(read_file(d_spec)), p);
      auto trace = ivc::trace_from_jsonl(read_file(d_trace));
      ivc::VMConfig cfg = d_vm.config();
      ivc::BenchReport rep =
          ivc::differential_test(p, spec, trace, cfg, {d_prune, d_cache});
      rep.seed = seed_of_trace(read_file(d_trace));
      if (!d_report.empty()) write_file(d_report, rep.to_json(cfg.weights));
      std::cout << (rep.ok() ? "difftest OK: " : "difftest FAILED: ")
                << trace.size() << " transactions, " << rep.mismatches.size()
                << " mismatches\n";
      for (const auto& m : rep.mismatches) std::cout << "  " << m << "\n";
      return rep.ok() ? 0 : 1;
    }
    if (*bench) {
      ivc::Program p = load_contract(b_contract, true);
      ivc::TypedSpec spec = ivc::check_spec(ivc::parse_spec(read_file(b_spec)), p);
      auto trace = ivc::trace_from_jsonl(read_file(b_trace));
      ivc::VMConfig cfg = b_vm.config();
      ivc::BenchReport rep = ivc::bench_compare(p, spec, trace, cfg);
      rep.seed = seed_of_trace(read_file(b_trace));
      if (!b_report.empty()) write_file(b_report, rep.to_json(cfg.weights));
      std::cout << rep.table(cfg.weights);
      return rep.ok() ? 0 : 1;
    }
    if (*bind) {
      ivc::Program p = load_contract(bi_contract, true);
      ivc::TypedSpec spec = ivc::check_spec(ivc::parse_spec(read_file(bi_spec)), p);
      ivc::NameEnv env;
      for (const auto& d : p.decls) env.table[d.name] = {d.name, d.arity};
      for (const auto& [name, arity] : spec.spec.intermediates)
        env.table[name] = {ivc::intermediate_state_name(name), arity};
      nlohmann::json out = nlohmann::json::array();
      for (const auto& f : p.functions) {
        std::function<void(const ivc::StmtList&)> scan = [&](const ivc::StmtList& body) {
          for (const auto& s : body) {
            if (s->kind == ivc::Statement::Kind::Store) {
              nlohmann::json entry;
              entry["function"] = f.name;
              entry["store"] = ivc::pretty_print(s->addr);
              auto rules = nlohmann::json::array();
              for (const auto& r : spec.spec.rules) {
                nlohmann::json jr;
                if (r.kind == ivc::Rule::Kind::MapSum) {
                  ivc::BindingSet b = ivc::bind_expr(s->addr, r.body, env);
                  if (r.where)
                    b = ivc::union_sets(std::move(b), ivc::bind_expr(s->addr, r.where, env));
                  jr["rule"] = r.target;
                  jr["bind_expr"] = nlohmann::json::parse(ivc::to_json(b));
                  jr["bind_cond"] = nlohmann::json::parse(ivc::to_json(
                      r.where ? ivc::bind_cond(s->addr, r.where) : ivc::CondBinding::none()));
                } else {
                  jr["rule"] = "assert";
                  jr["bind_expr"] =
                      nlohmann::json::parse(ivc::to_json(ivc::bind_expr(s->addr, r.assert_body, env)));
                }
                rules.push_back(std::move(jr));
              }
              entry["rules"] = std::move(rules);
              out.push_back(std::move(entry));
            }
            if (!s->body.empty()) scan(s->body);
          }
        };
        scan(f.body);
      }
      std::string text = out.dump(2);
      if (!bi_out.empty())
        write_file(bi_out, text);
      else
        std::cout << text << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
