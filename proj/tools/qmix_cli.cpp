// Configuration-driven command-line front end.
//
// Subcommands:
//   moments        joint moments of a model family by one or more methods
//   converge       finite-size estimates against the limiting value along a sweep
//   epsilon-check  graph-structured freeness verification of a coupling matrix
//   stats          overlap statistics of random index subsets
//
// Global flags: --config PATH, --seed U64, --threads N, --out PATH,
// --format {csv,json}, --timings.  Exit codes: 0 ok, 2 config error,
// 3 resource cap exceeded.
//
// Determinism contract: identical config + seed + thread count produce
// bit-identical output files.  Wall-clock columns are reported as 0 unless
// --timings is given, since real timings would break that contract.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qmix/epsilon_graph.hpp"
#include "qmix/errors.hpp"
#include "qmix/estimate.hpp"
#include "qmix/overlap_stats.hpp"
#include "qmix/partitions.hpp"
#include "qmix/rng.hpp"
#include "qmix/syk.hpp"

#ifndef QMIX_CLI_VERSION
#define QMIX_CLI_VERSION "0.0.0"
#endif

namespace {

using nlohmann::json;
using qmix::MomentEstimate;
using qmix::partitions::Word;

// Schema violations detected by the front end (the library throws
// std::invalid_argument for its own contract violations; both map to exit 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Output assembly.

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;

  void add_row(std::vector<json> row) {
    if (row.size() != columns.size()) {
      throw std::logic_error("row width does not match the column count");
    }
    rows.push_back(std::move(row));
  }
};

std::string csv_escape(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string cell_text(const json& cell) {
  if (cell.is_string()) return cell.get<std::string>();
  return cell.dump();  // shortest round-trip form for numbers and bools
}

void write_csv(const Table& table, const json& meta, std::ostream& os) {
  for (const auto& [key, value] : meta.items()) {
    os << "# " << key << " " << cell_text(value) << "\n";
  }
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) os << ",";
    os << csv_escape(table.columns[c]);
  }
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ",";
      os << csv_escape(cell_text(row[c]));
    }
    os << "\n";
  }
}

void write_json(const Table& table, const json& meta, std::ostream& os) {
  json doc;
  doc["meta"] = meta;
  doc["columns"] = table.columns;
  doc["rows"] = json::array();
  for (const auto& row : table.rows) doc["rows"].push_back(row);
  os << doc.dump(2) << "\n";
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    const auto d = std::chrono::steady_clock::now() - start_;
    return std::chrono::duration<double, std::milli>(d).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Wall-clock cell: a real measurement with --timings, otherwise the constant
// 0 so that outputs stay bit-identical across runs.
json wall_cell(const Stopwatch& sw, bool timings) {
  return timings ? json(sw.ms()) : json(0.0);
}

// ---------------------------------------------------------------------------
// Config parsing.

const json& require_field(const json& j, const char* key, const char* where) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ConfigError(std::string(where) + " needs a '" + key + "' field");
  }
  return *it;
}

std::vector<int> parse_domain(const json& j, const std::string& where) {
  if (j.is_array()) return j.get<std::vector<int>>();
  if (!j.is_object()) {
    throw ConfigError(where + ": a domain is an array of indices or an object "
                      "with 'first_n', 'range', or 'explicit'");
  }
  if (j.contains("first_n")) {
    const int n = j.at("first_n").get<int>();
    if (n < 1) throw ConfigError(where + ": 'first_n' must be >= 1");
    std::vector<int> d(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = i + 1;
    return d;
  }
  if (j.contains("range")) {
    const auto pair = j.at("range").get<std::vector<long long>>();
    if (pair.size() != 2 || pair[0] > pair[1]) {
      throw ConfigError(where + ": 'range' is [first, last] with first <= last");
    }
    std::vector<int> d;
    for (long long v = pair[0]; v <= pair[1]; ++v) d.push_back(static_cast<int>(v));
    return d;
  }
  if (j.contains("explicit")) return j.at("explicit").get<std::vector<int>>();
  throw ConfigError(where + ": domain object needs 'first_n', 'range', or 'explicit'");
}

qmix::syk::CouplingLaw parse_law(const json& j, const std::string& where) {
  const std::string name = j.get<std::string>();
  if (name == "gaussian") return qmix::syk::CouplingLaw::kGaussian;
  if (name == "rademacher") return qmix::syk::CouplingLaw::kRademacher;
  throw ConfigError(where + ": coupling law must be 'gaussian' or 'rademacher'");
}

std::vector<qmix::syk::SykModelSpec> parse_models(const json& j) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError("'models' must be a non-empty array");
  }
  std::vector<qmix::syk::SykModelSpec> specs;
  int position = 0;
  for (const json& mj : j) {
    qmix::syk::SykModelSpec spec;
    spec.label = mj.value("label", position);
    const std::string where = "model label " + std::to_string(spec.label);
    spec.domain = parse_domain(require_field(mj, "domain", where.c_str()), where);
    spec.interaction_length =
        require_field(mj, "interaction_length", where.c_str()).get<int>();
    if (mj.contains("law")) spec.law = parse_law(mj.at("law"), where);
    try {
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + ": " + e.what());
    }
    specs.push_back(std::move(spec));
    ++position;
  }
  return specs;
}

qmix::epsilon_graph::Graph parse_graph(const json& j) {
  if (!j.is_object()) throw ConfigError("'graph' must be an object");
  const int d = require_field(j, "vertices", "'graph'").get<int>();
  if (d < 1) throw ConfigError("'graph' needs at least one vertex");
  using qmix::epsilon_graph::Graph;
  Graph g = Graph::empty_graph(d);
  if (j.contains("kind")) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "empty") {
      g = Graph::empty_graph(d);
    } else if (kind == "complete") {
      g = Graph::complete_graph(d);
    } else if (kind == "path") {
      g = Graph::path_graph(d);
    } else {
      throw ConfigError("'graph.kind' must be 'empty', 'complete', or 'path'");
    }
  }
  if (j.contains("edges")) {
    for (const json& ej : j.at("edges")) {
      const auto e = ej.get<std::vector<int>>();
      if (e.size() != 2) throw ConfigError("'graph.edges' entries are [i, j] pairs");
      g.set_edge(e[0], e[1], 1);
    }
  }
  return g;
}

struct FamilyConfig {
  qmix::syk::SykFamily family;
  std::optional<int> block_size;  // set when built from a graph
};

FamilyConfig parse_family(const json& j) {
  if (!j.is_object()) throw ConfigError("'family' must be an object");
  if (j.contains("models")) {
    return {qmix::syk::SykFamily(parse_models(j.at("models"))), std::nullopt};
  }
  if (j.contains("graph")) {
    const auto graph = parse_graph(j.at("graph"));
    const int m = require_field(j, "block_size", "'family'").get<int>();
    qmix::syk::CouplingLaw law = qmix::syk::CouplingLaw::kGaussian;
    if (j.contains("law")) law = parse_law(j.at("law"), "'family'");
    return {qmix::syk::SykFamily(qmix::epsilon_graph::build_overlap_sets(graph, m, law)),
            m};
  }
  throw ConfigError("'family' needs either 'models' or 'graph' + 'block_size'");
}

Word parse_word(const json& j) {
  if (!j.is_array()) throw ConfigError("a word is an array of label indices");
  return j.get<Word>();
}

std::string word_text(const Word& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(w[i]);
  }
  return out;
}

std::optional<std::vector<std::vector<double>>> parse_lambda(const json& cfg) {
  if (!cfg.contains("lambda")) return std::nullopt;
  const json& lj = cfg.at("lambda");
  std::vector<std::vector<double>> lam;
  for (const json& row : lj) {
    std::vector<double> r;
    for (const json& v : row) {
      if (v.is_string()) {
        if (v.get<std::string>() != "inf") {
          throw ConfigError("'lambda' entries are numbers or the string 'inf'");
        }
        r.push_back(std::numeric_limits<double>::infinity());
      } else {
        r.push_back(v.get<double>());
      }
    }
    lam.push_back(std::move(r));
  }
  return lam;
}

// Limiting decay rates induced by a graph: adjacent pairs keep full overlap
// decay 0 (coupling 1); all other pairs, the diagonal included, diverge
// (coupling 0).
std::vector<std::vector<double>> graph_limit_lambda(const qmix::epsilon_graph::Graph& g) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> lam(
      static_cast<std::size_t>(g.vertices),
      std::vector<double>(static_cast<std::size_t>(g.vertices), inf));
  for (int i = 0; i < g.vertices; ++i) {
    for (int j = 0; j < g.vertices; ++j) {
      if (i != j && g.edge(i, j)) {
        lam[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 0.0;
      }
    }
  }
  return lam;
}

// ---------------------------------------------------------------------------
// Commands.

struct RunOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  bool timings = false;
};

Table cmd_moments(const json& cfg, const RunOptions& run) {
  const FamilyConfig fam = parse_family(require_field(cfg, "family", "'moments'"));
  const json& words_json = require_field(cfg, "words", "'moments'");
  if (!words_json.is_array() || words_json.empty()) {
    throw ConfigError("'words' must be a non-empty array of words");
  }
  std::vector<std::string> methods =
      cfg.value("methods", std::vector<std::string>{"exact-small"});
  if (methods.empty()) throw ConfigError("'methods' must not be empty");
  const std::uint64_t samples = cfg.value("samples", std::uint64_t{2000});
  const std::uint64_t pair_samples = cfg.value("pair_samples", std::uint64_t{200000});
  const double term_cap = cfg.value("term_cap", 1e7);
  const auto lambda = parse_lambda(cfg);

  qmix::syk::McOptions mc;
  mc.threads = run.threads;
  mc.index_cap = cfg.value("index_cap", 256);
  mc.enumeration_cap = cfg.value("enumeration_cap", std::uint64_t{1'000'000});

  Table table;
  table.columns = {"word", "method", "value", "std_err", "samples", "n", "wall_ms"};
  std::uint64_t word_index = 0;
  for (const json& wj : words_json) {
    const Word word = parse_word(wj);
    for (const std::string& method : methods) {
      const Stopwatch sw;
      MomentEstimate est;
      if (method == "dense-mc") {
        mc.seed = qmix::derive_key(run.seed, 0xd15e, word_index);
        est = qmix::syk::mc_joint_moment(fam.family, word, samples, mc);
      } else if (method == "exact-small") {
        est = qmix::syk::exact_joint_moment_small(fam.family, word, term_cap);
      } else if (method == "finite-n-formula") {
        qmix::syk::PairFormulaOptions popts;
        popts.mc_samples = pair_samples;
        popts.seed = qmix::derive_key(run.seed, 0xf1f0, word_index);
        est = qmix::syk::finite_n_pair_moment(fam.family, word, popts);
      } else if (method == "limit-formula") {
        est.value = lambda ? qmix::syk::limit_moment(fam.family, word, *lambda)
                           : qmix::syk::limit_moment(fam.family, word);
        est.std_err = 0.0;
        est.samples = 0;
        est.method = qmix::Method::kLimitFormula;
      } else {
        throw ConfigError("unknown method '" + method +
                          "' (expected dense-mc, exact-small, finite-n-formula, "
                          "or limit-formula)");
      }
      table.add_row({word_text(word), qmix::method_name(est.method), est.value,
                     est.std_err, est.samples, fam.family.domain_size(),
                     wall_cell(sw, run.timings)});
    }
    ++word_index;
  }
  return table;
}

Table cmd_converge(const json& cfg, const RunOptions& run) {
  const Word word = parse_word(require_field(cfg, "word", "'converge'"));
  const std::string estimator = cfg.value("estimator", std::string("finite-n-formula"));
  const std::uint64_t samples = cfg.value("samples", std::uint64_t{2000});
  const std::uint64_t pair_samples = cfg.value("pair_samples", std::uint64_t{200000});
  const double term_cap = cfg.value("term_cap", 1e7);
  auto lambda = parse_lambda(cfg);

  const json& sweep = require_field(cfg, "sweep", "'converge'");
  std::vector<qmix::syk::SykFamily> families;
  std::vector<json> block_cells;
  if (sweep.contains("graph")) {
    const auto graph = parse_graph(sweep.at("graph"));
    qmix::syk::CouplingLaw law = qmix::syk::CouplingLaw::kGaussian;
    if (sweep.contains("law")) law = parse_law(sweep.at("law"), "'sweep'");
    const auto sizes = require_field(sweep, "block_sizes", "'sweep'")
                           .get<std::vector<int>>();
    if (sizes.empty()) throw ConfigError("'block_sizes' must not be empty");
    for (int m : sizes) {
      families.emplace_back(qmix::epsilon_graph::build_overlap_sets(graph, m, law));
      block_cells.emplace_back(m);
    }
    if (!lambda) lambda = graph_limit_lambda(graph);
  } else if (sweep.contains("families")) {
    for (const json& fj : sweep.at("families")) {
      families.emplace_back(parse_models(require_field(fj, "models", "sweep family")));
      block_cells.emplace_back("");
    }
    if (families.empty()) throw ConfigError("'families' must not be empty");
  } else {
    throw ConfigError("'sweep' needs either 'graph' + 'block_sizes' or 'families'");
  }
  // The limiting coupling sign is only defined along constant-parity sweeps.
  qmix::syk::sweep_parity(families);

  qmix::syk::McOptions mc;
  mc.threads = run.threads;
  mc.index_cap = cfg.value("index_cap", 256);
  mc.enumeration_cap = cfg.value("enumeration_cap", std::uint64_t{1'000'000});

  Table table;
  table.columns = {"step",    "n",     "block_size", "word", "method", "value",
                   "std_err", "limit", "gap",        "wall_ms"};
  for (std::size_t step = 0; step < families.size(); ++step) {
    const auto& family = families[step];
    const Stopwatch sw;
    MomentEstimate est;
    if (estimator == "finite-n-formula") {
      qmix::syk::PairFormulaOptions popts;
      popts.mc_samples = pair_samples;
      popts.seed = qmix::derive_key(run.seed, 0xf1f0, step);
      est = qmix::syk::finite_n_pair_moment(family, word, popts);
    } else if (estimator == "dense-mc") {
      mc.seed = qmix::derive_key(run.seed, 0xd15e, step);
      est = qmix::syk::mc_joint_moment(family, word, samples, mc);
    } else if (estimator == "exact-small") {
      est = qmix::syk::exact_joint_moment_small(family, word, term_cap);
    } else {
      throw ConfigError("unknown estimator '" + estimator +
                        "' (expected finite-n-formula, dense-mc, or exact-small)");
    }
    const double limit = lambda ? qmix::syk::limit_moment(family, word, *lambda)
                                : qmix::syk::limit_moment(family, word);
    table.add_row({static_cast<std::uint64_t>(step), family.domain_size(),
                   block_cells[step], word_text(word), qmix::method_name(est.method),
                   est.value, est.std_err, limit, std::abs(est.value - limit),
                   wall_cell(sw, run.timings)});
  }
  return table;
}

Table cmd_epsilon_check(const json& cfg, const RunOptions& run) {
  const auto graph = parse_graph(require_field(cfg, "graph", "'epsilon-check'"));
  std::vector<double> q_diag(static_cast<std::size_t>(graph.vertices), 0.0);
  if (cfg.contains("q_diag")) {
    const json& dj = cfg.at("q_diag");
    if (dj.is_number()) {
      q_diag.assign(static_cast<std::size_t>(graph.vertices), dj.get<double>());
    } else {
      q_diag = dj.get<std::vector<double>>();
    }
  }
  const int max_len = cfg.value("max_len", 5);
  const double tol = cfg.value("tol", 1e-10);

  const Stopwatch sw;
  const auto report =
      qmix::epsilon_graph::check_epsilon_freeness(graph, q_diag, max_len, tol);
  std::string violations;
  for (std::size_t i = 0; i < report.violations.size(); ++i) {
    if (i) violations += "; ";
    violations += report.violations[i];
  }
  Table table;
  table.columns = {"passed", "swap_checks", "centered_checks", "violations", "wall_ms"};
  table.add_row({report.passed, report.swap_checks, report.centered_checks, violations,
                 wall_cell(sw, run.timings)});
  return table;
}

Table cmd_stats(const json& cfg, const RunOptions& run) {
  qmix::overlap_stats::OverlapConfig overlap;
  const json& domains = require_field(cfg, "domains", "'stats'");
  int index = 0;
  for (const json& dj : domains) {
    overlap.domains.push_back(
        parse_domain(dj, "domain " + std::to_string(index)));
    ++index;
  }
  overlap.sizes = require_field(cfg, "sizes", "'stats'").get<std::vector<int>>();
  if (cfg.contains("edges")) {
    for (const json& ej : cfg.at("edges")) {
      const auto e = ej.get<std::vector<int>>();
      if (e.size() != 2) throw ConfigError("'edges' entries are [i, j] pairs");
      overlap.edges.emplace_back(e[0], e[1]);
    }
  }
  overlap.validate();

  const json& stats = require_field(cfg, "statistics", "'stats'");
  if (!stats.is_array() || stats.empty()) {
    throw ConfigError("'statistics' must be a non-empty array");
  }

  Table table;
  table.columns = {"statistic", "detail", "value", "std_err",
                   "samples",   "method", "wall_ms"};
  std::uint64_t row = 0;
  for (const json& sj : stats) {
    const std::string kind = require_field(sj, "kind", "statistic").get<std::string>();
    const std::uint64_t samples = sj.value("samples", std::uint64_t{100000});
    qmix::SplitMix64 rng(qmix::derive_key(run.seed, 0x57a7, row));
    const Stopwatch sw;
    MomentEstimate est;
    std::string detail;
    if (kind == "sign-expectation") {
      est = qmix::overlap_stats::sign_expectation_exact_or_mc(overlap, samples, rng);
    } else if (kind == "falling-factorial") {
      const int k = require_field(sj, "k", "falling-factorial statistic").get<int>();
      est = qmix::overlap_stats::falling_factorial_moment_mc(overlap, k, samples, rng);
      detail = "k=" + std::to_string(k);
    } else if (kind == "pair-disjointness") {
      const json& ej = require_field(sj, "edges", "pair-disjointness statistic");
      if (!ej.is_array() || ej.size() != 2) {
        throw ConfigError("pair-disjointness needs exactly two edges");
      }
      const auto e1 = ej.at(0).get<std::vector<int>>();
      const auto e2 = ej.at(1).get<std::vector<int>>();
      if (e1.size() != 2 || e2.size() != 2) {
        throw ConfigError("pair-disjointness edges are [i, j] pairs");
      }
      est = qmix::overlap_stats::pair_disjointness_probability_mc(
          overlap, {e1[0], e1[1]}, {e2[0], e2[1]}, samples, rng);
      detail = std::to_string(e1[0]) + "-" + std::to_string(e1[1]) + " " +
               std::to_string(e2[0]) + "-" + std::to_string(e2[1]);
    } else {
      throw ConfigError("unknown statistic '" + kind +
                        "' (expected sign-expectation, falling-factorial, or "
                        "pair-disjointness)");
    }
    table.add_row({kind, detail, est.value, est.std_err, est.samples,
                   qmix::method_name(est.method), wall_cell(sw, run.timings)});
    ++row;
  }
  return table;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixed q-gaussian moments and overlapping-model simulations"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_flag = 0;
  int threads_flag = 0;
  std::string out_path;
  std::string format = "csv";
  bool timings = false;

  app.add_option("--config", config_path, "path to the JSON experiment config")
      ->required();
  const auto* seed_opt =
      app.add_option("--seed", seed_flag, "override the config's seed");
  const auto* threads_opt =
      app.add_option("--threads", threads_flag, "override the config's thread count");
  app.add_option("--out", out_path, "output file (default: stdout)");
  app.add_option("--format", format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--timings", timings, "report real wall-clock columns "
                                     "(breaks bit-identical reruns)");

  for (const char* name : {"moments", "converge", "epsilon-check", "stats"}) {
    app.add_subcommand(name)->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
    json cfg = json::parse(in);
    if (!cfg.is_object()) throw ConfigError("the config root must be an object");

    RunOptions run;
    run.seed = seed_opt->count() ? seed_flag : cfg.value("seed", std::uint64_t{0});
    run.threads = threads_opt->count() ? threads_flag : cfg.value("threads", 1);
    run.timings = timings;
    if (run.threads < 1) throw ConfigError("thread count must be >= 1");

    const std::string command = app.get_subcommands().front()->get_name();
    json resolved = cfg;
    resolved["seed"] = run.seed;
    resolved["threads"] = run.threads;

    Table table;
    if (command == "moments") {
      table = cmd_moments(cfg, run);
    } else if (command == "converge") {
      table = cmd_converge(cfg, run);
    } else if (command == "epsilon-check") {
      table = cmd_epsilon_check(cfg, run);
    } else {
      table = cmd_stats(cfg, run);
    }

    json meta;
    meta["tool"] = "qmix-cli";
    meta["version"] = QMIX_CLI_VERSION;
    meta["command"] = command;
    meta["config_hash"] = hex64(fnv1a64(resolved.dump()));
    meta["seed"] = run.seed;
    meta["threads"] = run.threads;

    std::ostringstream body;
    if (format == "json") {
      write_json(table, meta, body);
    } else {
      write_csv(table, meta, body);
    }
    if (out_path.empty()) {
      std::cout << body.str();
    } else {
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw ConfigError("cannot open output file '" + out_path + "'");
      out << body.str();
    }
    return 0;
  } catch (const qmix::CapExceeded& e) {
    std::cerr << "cap exceeded: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
