#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "admarket/extract.hpp"
#include "admarket/instances.hpp"
#include "admarket/io.hpp"
#include "admarket/oracle.hpp"
#include "admarket/reduce.hpp"
#include "admarket/solver.hpp"

namespace {

using namespace admarket;
using admarket::io::json;
using admarket::io::ordered_json;

enum Exit { Ok = 0, Invalid = 1, Capped = 2, Uncertified = 3 };

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

void emit(const ordered_json& doc, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << doc.dump(2) << "\n";
}

int trace_level(int requested) {
  if (const char* env = std::getenv("AD_TRACE_LEVEL")) {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
      std::cerr << "ignoring malformed AD_TRACE_LEVEL\n";
    }
  }
  return requested;
}

// n-lists like "4,6,10:16:2"
std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::vector<std::size_t> parts;
    std::stringstream is(item);
    std::string part;
    while (std::getline(is, part, ':')) parts.push_back(std::stoul(part));
    if (parts.size() == 1) {
      out.push_back(parts[0]);
    } else if (parts.size() == 2 || parts.size() == 3) {
      const std::size_t step = parts.size() == 3 ? parts[2] : 1;
      if (step == 0) throw std::invalid_argument("zero step in size range");
      for (auto v = parts[0]; v <= parts[1]; v += step) out.push_back(v);
    } else {
      throw std::invalid_argument("bad size item: " + item);
    }
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct SolveOptions {
  std::string instance;
  std::string policy = "general";
  std::string epsilon;
  std::optional<std::size_t> max_iters;
  std::string trace;
  std::string R = "60";
  bool decimal = false;
  int trace_level = 1;
};

int run_solve(const SolveOptions& o) {
  MarketInstance inst;
  SolverConfig cfg;
  try {
    inst = io::instance_from_json(read_json(o.instance));
    cfg.policy = parse_policy(o.policy);
    cfg.R = parse_rational(o.R);
    if (!o.epsilon.empty()) cfg.epsilon = parse_rational(o.epsilon);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Invalid;
  }
  cfg.max_iterations = o.max_iters;
  cfg.trace_level = o.trace.empty() ? 0 : trace_level(o.trace_level);

  std::ofstream trace_out;
  if (!o.trace.empty()) {
    trace_out.open(o.trace);
    if (!trace_out) {
      std::cerr << "error: cannot write " << o.trace << "\n";
      return Invalid;
    }
  }
  // Stream records as they happen so a capped or failed run still leaves
  // its partial trace behind.
  SolveObserver observer;
  if (trace_out.is_open())
    observer = [&](const IterationView& v) {
      if (v.record) trace_out << io::record_to_json(*v.record).dump() << "\n";
    };
  SolveResult result;
  ordered_json doc;
  doc["policy"] = policy_name(cfg.policy);
  int code = Ok;
  try {
    result = solve(inst, cfg, observer);
    doc["status"] = result.status == SolveStatus::Equilibrium ? "equilibrium" : "iteration_cap";
    code = result.status == SolveStatus::Equilibrium ? Ok : Capped;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Invalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Invalid;
  } catch (const ExtractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    doc["status"] = "certification_failed";
    doc["error"] = e.what();
    std::cout << doc.dump(2) << "\n";
    return Uncertified;
  }
  const auto& t = result.trace;
  doc["certified"] = result.status == SolveStatus::Equilibrium;
  doc["prices"] = io::rationals_to_json(result.prices);
  if (o.decimal) doc["prices_decimal"] = io::decimals_to_json(result.prices);
  doc["iterations"] = t.iteration_count;
  doc["network_changes"] = t.network_changes;
  doc["light_iterations"] = t.light_iterations;
  doc["heavy_iterations"] = t.heavy_iterations;
  doc["final_l2sq"] = to_fraction_string(t.final_l2sq);
  if (o.decimal) doc["final_l2sq_decimal"] = to_double(t.final_l2sq);
  std::cout << doc.dump(2) << "\n";
  return code;
}

int run_check(const std::string& inst_path, const std::string& prices_path, const std::string& flow_path) {
  MarketInstance inst;
  PriceVector p;
  std::optional<FlowMatrix> flow;
  try {
    inst = io::instance_from_json(read_json(inst_path));
    p = io::prices_from_json(read_json(prices_path));
    if (!flow_path.empty()) flow = io::flow_from_json(read_json(flow_path));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Invalid;
  }
  EquilibriumCheck check;
  try {
    check = check_equilibrium(inst, p, flow ? &*flow : nullptr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Invalid;
  }
  ordered_json doc;
  doc["ok"] = check.ok();
  if (check.ok()) {
    doc["flow"] = io::flow_to_json(check.flow);
  } else {
    const auto& v = *check.violation;
    doc["violation"] = {{"condition", condition_name(v.condition)},
                        {"index", v.index},
                        {"deficit", to_fraction_string(v.deficit)},
                        {"message", v.message()}};
  }
  std::cout << doc.dump(2) << "\n";
  return check.ok() ? Ok : Invalid;
}

struct BenchRow {
  std::string line;
};

int run_bench(const std::string& family, const std::string& sizes, std::int64_t U, const std::string& policies,
              const std::string& epsilon, std::optional<std::size_t> max_iters, unsigned jobs, bool timing) {
  struct Job {
    std::size_t n;
    Policy policy;
  };
  std::vector<Job> work;
  try {
    if (family != "chain" && family != "blocks") throw std::invalid_argument("family must be chain or blocks");
    for (auto n : parse_sizes(sizes))
      for (const auto& name : split_commas(policies)) work.push_back({n, parse_policy(name)});
    if (!epsilon.empty()) parse_rational(epsilon);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Invalid;
  }

  std::vector<std::string> rows(work.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  auto worker = [&] {
    for (auto k = next++; k < work.size(); k = next++) {
      const auto& job = work[k];
      std::ostringstream row;
      row << family << ',' << job.n << ',' << U << ',' << policy_name(job.policy) << ',';
      try {
        const MarketInstance inst = family == "chain" ? gen_hard_chain(job.n, U) : gen_hard_blocks(job.n, U).instance;
        SolverConfig cfg;
        cfg.policy = job.policy;
        cfg.trace_level = 0;
        cfg.max_iterations = max_iters;
        if (!epsilon.empty()) cfg.epsilon = parse_rational(epsilon);
        const auto start = std::chrono::steady_clock::now();
        const auto res = solve(inst, cfg);
        const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        const auto& t = res.trace;
        row << (res.status == SolveStatus::Equilibrium ? "equilibrium" : "iteration_cap") << ','
            << t.iteration_count << ',' << t.light_iterations << ',' << t.heavy_iterations << ','
            << t.network_changes;
        if (timing) row << ',' << static_cast<long long>(ms);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        std::cerr << "error: n=" << job.n << " " << policy_name(job.policy) << ": " << e.what() << "\n";
        failed = true;
        row << "error,,,,";
        if (timing) row << ',';
      }
      rows[k] = row.str();
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(work.size())));
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::cout << "family,n,U,policy,status,iterations,light,heavy,network_changes";
  if (timing) std::cout << ",wall_ms";
  std::cout << "\n";
  for (const auto& r : rows) std::cout << r << "\n";
  return failed ? Uncertified : Ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact linear exchange-market equilibrium solver"};
  app.require_subcommand(1);
  int code = Ok;

  auto* gen = app.add_subcommand("gen", "Generate an instance");
  gen->require_subcommand(1);
  std::string gen_out;
  gen->add_option("-o,--output", gen_out, "Output file (default: standard output)");
  gen->fallthrough();  // lets -o follow the family name too

  std::size_t chain_n = 0;
  std::int64_t chain_U = 2;
  auto* chain = gen->add_subcommand("chain", "Chain instance with exponential price ratio");
  chain->add_option("--n", chain_n, "Even number of agents")->required();
  chain->add_option("--U", chain_U, "Utility scale (>= 2)");
  chain->callback([&] {
    try {
      emit(io::instance_to_json(gen_hard_chain(chain_n, chain_U)), gen_out);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      code = Invalid;
    }
  });

  std::size_t blocks_n = 0;
  std::int64_t blocks_U = 2;
  std::string blocks_path;
  auto* blocks = gen->add_subcommand("blocks", "Block instance with disjoint price-raising phases");
  blocks->add_option("--n", blocks_n, "Terminal block size (>= 9)")->required();
  blocks->add_option("--U", blocks_U, "Utility scale (>= 2)");
  blocks->add_option("--blocks", blocks_path, "Also write the block layout to this file");
  blocks->callback([&] {
    try {
      const auto b = gen_hard_blocks(blocks_n, blocks_U);
      auto doc = io::instance_to_json(b.instance);
      const auto layout = io::blocks_to_json(b);
      doc["blocks"] = layout;
      emit(doc, gen_out);
      if (!blocks_path.empty()) emit(layout, blocks_path);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      code = Invalid;
    }
  });

  std::size_t rn = 2, rm = 2;
  std::int64_t rU = 3, rW = 3;
  double density = 0.7;
  std::uint64_t seed = 1;
  auto* random = gen->add_subcommand("random", "Random valid irreducible instance");
  random->add_option("--n", rn, "Agents");
  random->add_option("--m", rm, "Goods");
  random->add_option("--U", rU, "Maximum utility");
  random->add_option("--W", rW, "Maximum endowment");
  random->add_option("--density", density, "Probability that an entry is positive");
  random->add_option("--seed", seed, "RNG seed");
  random->callback([&] {
    try {
      emit(io::instance_to_json(gen_random(rn, rm, rU, rW, density, seed)), gen_out);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      code = Invalid;
    }
  });

  SolveOptions so;
  auto* solve_cmd = app.add_subcommand("solve", "Compute exact equilibrium prices");
  solve_cmd->add_option("instance", so.instance, "Instance JSON")->required();
  solve_cmd->add_option("--policy", so.policy, "general | dgm | dm");
  solve_cmd->add_option("--epsilon", so.epsilon, "Termination threshold as a fraction");
  solve_cmd->add_option("--max-iters", so.max_iters, "Iteration cap");
  solve_cmd->add_option("--trace", so.trace, "Write JSON-lines iteration trace here");
  solve_cmd->add_option("--trace-level", so.trace_level, "1 summary, 2 adds S and Γ(S), 3 adds prices and surpluses");
  solve_cmd->add_option("--R", so.R, "Step constant (>= 60)");
  solve_cmd->add_flag("--decimal", so.decimal, "Add approximate decimals");
  solve_cmd->callback([&] { code = run_solve(so); });

  std::string ci, cp, cf;
  auto* check = app.add_subcommand("check", "Certify prices (and optionally a flow)");
  check->add_option("instance", ci, "Instance JSON")->required();
  check->add_option("prices", cp, "Prices JSON (array or object with \"prices\")")->required();
  check->add_option("--flow", cf, "Flow JSON (matrix or object with \"flow\")");
  check->callback([&] { code = run_check(ci, cp, cf); });

  std::string ri, ro;
  auto* reduce = app.add_subcommand("reduce", "Blow up to a one-good-per-agent market");
  reduce->add_option("instance", ri, "Instance JSON")->required();
  reduce->add_option("-o,--output", ro, "Output file");
  reduce->callback([&] {
    try {
      emit(io::special_to_json(to_special(io::instance_from_json(read_json(ri)))), ro);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      code = Invalid;
    }
  });

  std::string family = "chain", sizes = "4,6", policies = "general,dgm,dm", bench_eps;
  std::int64_t bench_U = 2;
  std::optional<std::size_t> bench_cap;
  unsigned jobs = std::max(1U, std::thread::hardware_concurrency());
  bool timing = false;
  auto* bench = app.add_subcommand("bench", "Iteration counts per size and policy as CSV");
  bench->add_option("--family", family, "chain | blocks");
  bench->add_option("--n", sizes, "Sizes, e.g. 4,6 or 4:10:2");
  bench->add_option("--U", bench_U, "Utility scale");
  bench->add_option("--policies", policies, "Comma-separated policies");
  bench->add_option("--epsilon", bench_eps, "Termination threshold");
  bench->add_option("--max-iters", bench_cap, "Iteration cap per run");
  bench->add_option("--jobs", jobs, "Worker threads");
  bench->add_flag("--timing", timing, "Append a wall-time column (makes output run dependent)");
  bench->callback([&] { code = run_bench(family, sizes, bench_U, policies, bench_eps, bench_cap, jobs, timing); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : Invalid;
  }
  return code;
}
