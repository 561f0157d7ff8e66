// Command-line front end: parse protocols, stream bounded runs, check
// axioms and invariants, and run the canned reproduction cases.
//
// Exit status: 0 = expected outcome (check: holds-within-bounds; repro:
// observation matches the documented claim), 1 = the opposite, 2 = usage
// or input errors.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pcl/axioms.hpp"
#include "pcl/parser.hpp"

namespace {

struct CommonOpts {
  bool untyped = false;
  std::string dh_theory = "off";
  std::string keys = "split";
  std::string precedence = "off";
  int threads = 2;
  int length = 14;
  int depth = 4;
  int workers = 1;
  std::string format = "text";
  std::string output;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_flag("--untyped", o.untyped, "disable sort-respecting matching")
      ->envname("PCLWB_UNTYPED");
  cmd->add_flag("!--typed", o.untyped, "enforce sort-respecting matching (default)");
  cmd->add_option("--dh-theory", o.dh_theory, "h(a,b)=h(b,a) equation: on|off")
      ->check(CLI::IsMember({"on", "off"}))
      ->envname("PCLWB_DH_THEORY");
  cmd->add_option("--keys", o.keys, "key scheme: sym|asym|split")
      ->check(CLI::IsMember({"sym", "asym", "split"}))
      ->envname("PCLWB_KEYS");
  cmd->add_option("--precedence", o.precedence,
                  "prepend role prefixes in honesty-mode checks: on|off")
      ->check(CLI::IsMember({"on", "off"}))
      ->envname("PCLWB_PRECEDENCE");
  cmd->add_option("--threads", o.threads, "max threads per role")
      ->envname("PCLWB_THREADS");
  cmd->add_option("--length", o.length, "max events per run")->envname("PCLWB_LENGTH");
  cmd->add_option("--depth", o.depth, "max intruder construction depth")
      ->envname("PCLWB_DEPTH");
  cmd->add_option("--workers", o.workers, "parallel evaluation workers")
      ->envname("PCLWB_WORKERS");
  cmd->add_option("--format", o.format, "output format: text|json-like")
      ->check(CLI::IsMember({"text", "json", "json-like"}))
      ->envname("PCLWB_FORMAT");
  cmd->add_option("-o,--output", o.output, "write the report to a file");
}

pcl::SemanticsConfig to_config(const CommonOpts& o) {
  pcl::SemanticsConfig cfg;
  cfg.typed = !o.untyped;
  cfg.dh_theory = o.dh_theory == "on";
  cfg.keys = pcl::key_scheme_from_name(o.keys);
  cfg.precedence_rule = o.precedence == "on";
  return cfg;
}

pcl::Bounds to_bounds(const CommonOpts& o) {
  pcl::Bounds b;
  b.max_threads_per_role = o.threads;
  b.max_run_length = o.length;
  b.max_intruder_depth = o.depth;
  b.validate();
  return b;
}

bool json_mode(const CommonOpts& o) { return o.format != "text"; }

void emit(const CommonOpts& o, const std::string& text) {
  if (o.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(o.output);
  if (!out) throw std::runtime_error("cannot write " + o.output);
  out << text;
}

int cmd_parse(const std::string& path) {
  pcl::Protocol p = pcl::parse_protocol_file(path);
  std::cout << pcl::print_protocol(p);
  std::cout << "\nbasic sequences:\n";
  for (const auto& role : p.roles) {
    for (const auto& bs : pcl::basic_sequences(role)) {
      std::cout << "  " << role.name << " bs" << bs.index << ":";
      std::map<std::string, pcl::Sort> declared;
      for (const auto& prm : role.params) declared.emplace(prm->name(), pcl::Sort::Agent);
      for (const auto& a : bs.actions()) std::cout << "  " << print_action(a, declared);
      std::cout << "\n";
    }
  }
  return 0;
}

int cmd_runs(const std::string& path, const CommonOpts& o, long limit) {
  pcl::Protocol p = pcl::parse_protocol_file(path);
  auto cfg = to_config(o);
  auto bounds = to_bounds(o);
  long count = 0;
  pcl::enumerate_runs(p, bounds, cfg, [&](const pcl::Run& r) {
    std::cout << "run " << count << (r.length_capped ? " (length-capped)" : "") << "\n";
    std::cout << (r.events.empty() ? std::string("  (empty)\n") : r.trace());
    ++count;
    return limit < 0 || count < limit;
  });
  std::cout << count << " runs\n";
  return 0;
}

int cmd_axioms() {
  for (const auto& e : pcl::axiom_catalogue()) {
    std::cout << e.name << (e.needs_dh ? "  [requires --dh-theory on]" : "") << "\n";
    std::cout << "    " << e.description << "\n";
    std::cout << "    source: " << e.citation << "\n";
  }
  return 0;
}

int cmd_check(const std::string& path, const std::string& axiom,
              const std::string& invariant_file, const CommonOpts& o) {
  pcl::Protocol p = pcl::parse_protocol_file(path);
  auto cfg = to_config(o);
  auto bounds = to_bounds(o);
  pcl::Verdict v;
  if (!axiom.empty()) {
    const pcl::AxiomEntry* e = pcl::find_axiom(axiom);
    if (!e) {
      std::cerr << "unknown axiom: " << axiom << "\ncatalogue:\n";
      for (const auto& entry : pcl::axiom_catalogue()) std::cerr << "  " << entry.name << "\n";
      return 2;
    }
    v = pcl::check(p, *e, bounds, cfg, o.workers);
  } else {
    std::ifstream in(invariant_file);
    if (!in) {
      std::cerr << "cannot open " << invariant_file << "\n";
      return 2;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    pcl::FormulaPtr f = pcl::parse_formula(buf.str(), p);
    if (cfg.precedence_rule || o.precedence == "honesty") {
      // fallthrough handled below
    }
    v = pcl::check_formula(p, invariant_file, f, bounds, cfg, o.workers);
  }
  emit(o, json_mode(o) ? pcl::verdict_to_json(v) : pcl::verdict_to_text(v));
  if (v.outcome == pcl::Outcome::Error) return 2;
  return v.outcome == pcl::Outcome::HoldsWithinBounds ? 0 : 1;
}

int cmd_honesty(const std::string& path, const std::string& invariant_file,
                const CommonOpts& o) {
  pcl::Protocol p = pcl::parse_protocol_file(path);
  auto cfg = to_config(o);
  auto bounds = to_bounds(o);
  std::ifstream in(invariant_file);
  if (!in) {
    std::cerr << "cannot open " << invariant_file << "\n";
    return 2;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  pcl::FormulaPtr f = pcl::parse_formula(buf.str(), p);
  auto verdicts = pcl::check_invariant_honesty_mode(p, f, bounds, cfg);
  std::ostringstream os;
  bool all_hold = true;
  for (const auto& hv : verdicts) {
    os << hv.role << " bs" << hv.bs_index << ": " << pcl::outcome_name(hv.outcome) << "\n";
    all_hold = all_hold && hv.outcome == pcl::Outcome::HoldsWithinBounds;
  }
  emit(o, os.str());
  return all_hold ? 0 : 1;
}

int cmd_repro(const std::string& case_id, const std::string& fixtures,
              const CommonOpts& o, bool bounds_given) {
  std::optional<pcl::Bounds> b;
  if (bounds_given) b = to_bounds(o);
  pcl::ReproReport rep = pcl::reproduce(case_id, fixtures, b, std::nullopt, o.workers);
  emit(o, json_mode(o) ? pcl::repro_to_json(rep) : pcl::repro_to_text(rep));
  return rep.as_expected ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bounded-run workbench for protocol-logic axioms"};
  app.require_subcommand(1);

  std::string path, axiom, invariant_file, case_id;
  std::string fixtures = "fixtures";
  long run_limit = -1;
  CommonOpts o;

  CLI::App* parse_cmd = app.add_subcommand("parse", "parse a protocol and show its "
                                                    "basic-sequence decomposition");
  parse_cmd->add_option("file", path, "protocol file")->required();

  CLI::App* runs_cmd = app.add_subcommand("runs", "stream enumerated runs");
  runs_cmd->add_option("file", path, "protocol file")->required();
  runs_cmd->add_option("--limit", run_limit, "stop after N runs");
  add_common(runs_cmd, o);

  CLI::App* check_cmd = app.add_subcommand("check", "check one axiom or invariant");
  check_cmd->add_option("file", path, "protocol file")->required();
  check_cmd->add_option("--axiom", axiom, "catalogue axiom name");
  check_cmd->add_option("--invariant", invariant_file, "formula file");
  add_common(check_cmd, o);

  CLI::App* honesty_cmd = app.add_subcommand(
      "honesty", "per-basic-sequence invariant check (honesty-rule style)");
  honesty_cmd->add_option("file", path, "protocol file")->required();
  honesty_cmd->add_option("--invariant", invariant_file, "formula file")->required();
  add_common(honesty_cmd, o);

  CLI::App* axioms_cmd = app.add_subcommand("axioms", "list the axiom catalogue");
  (void)axioms_cmd;

  CLI::App* repro_cmd = app.add_subcommand("repro", "run a canned reproduction case");
  std::ostringstream cases;
  for (const auto& c : pcl::repro_case_ids()) cases << c << " ";
  repro_cmd->add_option("case", case_id, "one of: " + cases.str())->required();
  repro_cmd->add_option("--fixtures", fixtures, "fixtures directory")
      ->envname("PCLWB_FIXTURES");
  add_common(repro_cmd, o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (parse_cmd->parsed()) return cmd_parse(path);
    if (runs_cmd->parsed()) return cmd_runs(path, o, run_limit);
    if (axioms_cmd->parsed()) return cmd_axioms();
    if (check_cmd->parsed()) {
      if (axiom.empty() == invariant_file.empty()) {
        std::cerr << "check needs exactly one of --axiom or --invariant\n";
        return 2;
      }
      return cmd_check(path, axiom, invariant_file, o);
    }
    if (honesty_cmd->parsed()) return cmd_honesty(path, invariant_file, o);
    if (repro_cmd->parsed()) {
      bool bounds_given = repro_cmd->count("--threads") || repro_cmd->count("--length") ||
                          repro_cmd->count("--depth");
      return cmd_repro(case_id, fixtures, o, bounds_given);
    }
  } catch (const pcl::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const pcl::SemanticError& e) {
    std::cerr << "semantic error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
