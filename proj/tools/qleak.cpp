// qleak - conditional min-entropy certification, two-party protocol runs,
// and randomized chain-rule audits from the command line.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qleak/audit.hpp"
#include "qleak/io.hpp"

namespace {

using namespace qleak;

std::vector<std::string> split_labels(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int cmd_entropy(const std::string& statefile, const std::string& a_csv, const std::string& b_csv,
                const std::string& witness_dir) {
  DensityOperator rho = load_state(statefile);
  const std::vector<std::string> a = split_labels(a_csv);
  const std::vector<std::string> b = split_labels(b_csv);
  EntropySolution sol = hmin(rho, a, b);
  const double pguess = std::pow(2.0, -sol.hmin);
  std::cout << "hmin=" << sol.hmin << " gap=" << sol.gap << " pguess=" << pguess << "\n";
  if (!witness_dir.empty()) {
    std::filesystem::create_directories(witness_dir);
    save_matrix(witness_dir + "/primal_sigma.mat", sol.primal_sigma);
    save_matrix(witness_dir + "/dual_x.mat", sol.dual_x);
  }
  return 0;
}

int cmd_run(const std::string& protofile, const std::string& trace_dir, bool as_json) {
  const std::filesystem::path path(protofile);
  const std::string base = path.has_parent_path() ? path.parent_path().string() : ".";
  ProtocolSpec spec = parse_protocol(read_text_file(protofile), base);
  DensityOperator input = build_input(spec);
  RunResult res = run(spec, input);

  if (!trace_dir.empty()) {
    std::filesystem::create_directories(trace_dir);
    for (const StepRecord& rec : res.trace) {
      std::ostringstream name;
      name << trace_dir << "/step_" << rec.index << ".qst";
      save_state(name.str(), rec.state);
    }
  }

  if (as_json) {
    nlohmann::ordered_json j;
    j["protocol"] = spec.name;
    j["rounds"] = spec.rounds;
    j["m_a"] = res.stats.m_a;
    j["m_b"] = res.stats.m_b;
    nlohmann::ordered_json regs = nlohmann::ordered_json::array();
    for (const Subsystem& s : res.final_state.layout.subsystems()) {
      nlohmann::ordered_json r;
      r["label"] = s.label;
      r["dim"] = s.dim;
      r["classical"] = s.classical;
      r["owner"] = party_name(res.final_owner.at(s.label));
      regs.push_back(std::move(r));
    }
    j["final_registers"] = std::move(regs);
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "protocol " << spec.name << ": " << spec.rounds << " round(s), m_a=" << res.stats.m_a
              << " m_b=" << res.stats.m_b << "\n";
    std::cout << "final registers:";
    for (const Subsystem& s : res.final_state.layout.subsystems())
      std::cout << ' ' << s.label << "(dim " << s.dim << (s.classical ? ",c" : ",q") << ","
                << party_name(res.final_owner.at(s.label)) << ")";
    std::cout << "\n";
  }
  return 0;
}

int cmd_audit(const std::string& rule_id, std::size_t trials, std::uint64_t seed,
              const std::string& json_path, std::size_t threads, bool measured) {
  std::optional<Rule> rule = rule_from_name(rule_id);
  if (!rule) {
    std::cerr << "unknown rule " << rule_id << "; valid: SEP_LCR GEN_LCR INTERACTIVE_LCR "
                 "ENTANGLED_LCR COMM_TOTAL COMM_ONEWAY\n";
    return 2;
  }
  AuditOptions opts;
  opts.master_seed = seed;
  opts.trials = trials;
  opts.threads = threads;
  opts.measured = measured;
  AuditReport rep = run_audit(*rule, opts);
  std::cout << "rule=" << rule_name(rep.rule) << " trials=" << rep.trials
            << " failures=" << rep.failures << " tightest_slack=" << rep.tightest_slack << "\n";
  if (!json_path.empty()) {
    std::ofstream f(json_path);
    if (!f.good()) {
      std::cerr << "cannot write " << json_path << "\n";
      return 2;
    }
    f << rep.to_json();
  }
  return rep.failures == 0 ? 0 : 1;
}

int cmd_demo(const std::string& which, std::uint64_t seed) {
  DemoResult res;
  if (which == "superdense") {
    res = demo_superdense();
  } else if (which == "bitsend") {
    res = demo_bitsend();
  } else if (which == "lo-attack") {
    res = demo_lo_attack(seed);
  } else {
    std::cerr << "unknown demo " << which << "; valid: superdense bitsend lo-attack\n";
    return 2;
  }
  std::cout << res.text;
  return res.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale min-entropy and leakage chain-rule engine"};
  app.require_subcommand(1);

  std::string statefile, a_csv, b_csv, witness_dir;
  CLI::App* entropy = app.add_subcommand("entropy", "certified H_min(A|B) of a state file");
  entropy->add_option("statefile", statefile)->required();
  entropy->add_option("--a", a_csv, "comma-separated A labels")->required();
  entropy->add_option("--b", b_csv, "comma-separated B labels (may be empty)");
  entropy->add_option("--witness-dir", witness_dir, "write primal/dual witnesses here");

  std::string protofile, trace_dir;
  bool run_json = false;
  CLI::App* runcmd = app.add_subcommand("run", "execute a protocol file");
  runcmd->add_option("protocolfile", protofile)->required();
  runcmd->add_option("--trace-dir", trace_dir, "write per-step states here");
  runcmd->add_flag("--json", run_json, "machine-readable output");

  std::string rule_id = "SEP_LCR", json_path;
  std::size_t trials = 100, threads = 1;
  std::uint64_t seed = 0;
  bool measured = false;
  CLI::App* audit = app.add_subcommand("audit", "randomized chain-rule audit");
  audit->add_option("--rule", rule_id, "rule identifier")->required();
  audit->add_option("--trials", trials, "number of seeded instances");
  audit->add_option("--seed", seed, "master seed");
  audit->add_option("--json", json_path, "write the JSON report to this file");
  audit->add_option("--threads", threads, "worker threads (report is identical)");
  audit->add_flag("--measured", measured,
                  "comm bounds use Bob's classical output registers only");

  std::string which;
  std::uint64_t demo_seed = 1;
  CLI::App* demo = app.add_subcommand("demo", "tightness and attack demos");
  demo->add_option("name", which, "superdense | bitsend | lo-attack")->required();
  demo->add_option("--seed", demo_seed, "seed for randomized demos");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*entropy) return cmd_entropy(statefile, a_csv, b_csv, witness_dir);
    if (*runcmd) return cmd_run(protofile, trace_dir, run_json);
    if (*audit) return cmd_audit(rule_id, trials, seed, json_path, threads, measured);
    if (*demo) return cmd_demo(which, demo_seed);
  } catch (const qleak::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == qleak::Errc::SolverDiverged ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
