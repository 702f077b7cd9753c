#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "CLI11.hpp"
#include "margmc/csv.hpp"
#include "margmc/diagnostics.hpp"
#include "margmc/error.hpp"
#include "margmc/jacobian.hpp"
#include "margmc/prob_model.hpp"
#include "margmc/scheme.hpp"
#include "margmc/version.hpp"

namespace fs = std::filesystem;

namespace margmc::cli {

namespace {

struct Invocation {
  std::optional<fs::path> config_file;
  std::map<std::string, std::string> overrides;
};

void add_config_options(CLI::App* cmd, Invocation& inv) {
  cmd->add_option("config", inv.config_file, "INI configuration file")->check(CLI::ExistingFile);
  for (const auto& k : config_keys()) {
    const std::string name = k.name();
    cmd->add_option_function<std::string>(
        "--" + name, [&inv, name](const std::string& v) { inv.overrides[name] = v; },
        k.help + (k.default_value.empty() ? "" : " [" + k.default_value + "]"));
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

fs::path output_dir(const Config& cfg) {
  const fs::path dir = cfg.str("output.dir");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("output.dir: cannot create '" + dir.string() + "': " + ec.message());
  return dir;
}

BidirectedGraph load_graph(const Config& cfg) {
  if (!cfg.has("model.graph")) throw InputError("model.graph is required");
  try {
    return read_graph_file(cfg.str("model.graph"));
  } catch (const InputError& e) {
    throw InputError(std::string("model.graph: ") + e.what());
  }
}

std::optional<std::vector<VertexSet>> load_marginals(const Config& cfg, const BidirectedGraph& g) {
  if (!cfg.has("model.marginals")) return std::nullopt;
  try {
    return parse_marginals(cfg.words("model.marginals"), g);
  } catch (const InputError& e) {
    throw InputError(std::string("model.marginals: ") + e.what());
  }
}

MarginalScheme load_scheme(const Config& cfg, const BidirectedGraph& g) {
  try {
    return build_marginal_scheme(g, load_marginals(cfg, g));
  } catch (const InputError& e) {
    const std::string what = e.what();
    if (what.rfind("model.", 0) == 0) throw;
    throw InputError("model.marginals: " + what);
  }
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& col_labels = {}) {
  auto out = open_out(path);
  if (!col_labels.empty()) {
    for (std::size_t i = 0; i < col_labels.size(); ++i) out << (i ? "," : "") << csv::quote(col_labels[i]);
    out << '\n';
  }
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

void dump_scheme_files(const fs::path& dir, const MarginalScheme& s) {
  {
    auto out = open_out(dir / "scheme_effects.csv");
    out << "row,label,marginal,effect,zero\n";
    for (std::size_t r = 0; r < s.effects.size(); ++r) {
      const auto& e = s.effects[r];
      out << r << ',' << csv::quote(s.label(static_cast<int>(r))) << ','
          << s.graph.label(s.marginals[e.marginal]) << ','
          << (e.subset.empty() ? "()" : s.graph.label(e.subset)) << ',' << (e.zero ? 1 : 0)
          << '\n';
    }
  }
  write_matrix_csv(dir / "scheme_M.csv", s.M);
  write_matrix_csv(dir / "scheme_C.csv", s.C);
  write_matrix_csv(dir / "scheme_K.csv", s.K);
}

std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

TraceTable to_table(const Trace& t) {
  TraceTable tt;
  tt.labels = t.labels;
  tt.draws = t.draws;
  tt.extra_labels = {"logpost", "accepted"};
  tt.extra.resize(t.draws.rows(), 2);
  for (Eigen::Index r = 0; r < t.draws.rows(); ++r) {
    tt.extra(r, 0) = t.log_posterior[static_cast<std::size_t>(r)];
    tt.extra(r, 1) = t.accepted[static_cast<std::size_t>(r)];
  }
  return tt;
}

Eigen::MatrixXd stack(const std::vector<Eigen::MatrixXd>& parts) {
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Eigen::MatrixXd out(rows, parts.empty() ? 0 : parts.front().cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return out;
}

// ---------------------------------------------------------------- fit

int cmd_fit(const Config& cfg) {
  const ChainConfig cc = chain_config(cfg);
  const auto chains = cfg.integer("sampler.chains");
  const auto threads = cfg.integer("sampler.threads");
  if (chains < 1) throw InputError("sampler.chains must be at least 1");
  if (threads < 1) throw InputError("sampler.threads must be at least 1");

  const BidirectedGraph g = load_graph(cfg);
  if (!cfg.has("model.counts")) throw InputError("model.counts is required");
  ContingencyTable table;
  try {
    table = read_counts_csv(cfg.str("model.counts"), g);
  } catch (const InputError& e) {
    throw InputError(std::string("model.counts: ") + e.what());
  }
  const auto marginals = load_marginals(cfg, g);
  // validate the ordering with InputError before the model is built
  load_scheme(cfg, g);
  const Model model(g, table, cc.latent_levels, cc.prior, marginals);
  const fs::path dir = output_dir(cfg);

  if (cfg.boolean("output.dump_scheme")) dump_scheme_files(dir, model.scheme());
  if (cfg.boolean("output.dump_jacobian")) {
    Philox rng(cc.seed, 0);
    const ProbParams pp = initial_params(model, cc.prior.alpha, rng);
    const auto rep = jacobian_matrix(pp, model.scheme(), model.layout(), model.xi(), true);
    std::vector<std::string> pi_labels;
    for (int k = 0; k < model.d_pi(); ++k) pi_labels.push_back(model.layout().pi_label(k));
    write_matrix_csv(dir / "jacobian_delta.csv", rep.delta, pi_labels);
    write_matrix_csv(dir / "jacobian_gradient.csv", rep.gradient, pi_labels);
    write_matrix_csv(dir / "jacobian_matrix.csv", rep.jac, pi_labels);
    write_matrix_csv(dir / "jacobian_pi.csv", pp.vectorize(model.layout()).transpose(), pi_labels);
    std::cerr << "jacobian log|det| " << rep.log_abs_det << ", condition " << rep.condition_estimate
              << '\n';
  }

  const auto traces = run_chains(cc, model, static_cast<int>(chains), static_cast<int>(threads));

  std::vector<Eigen::MatrixXd> parts;
  double wall = 0.0;
  for (const auto& t : traces) {
    auto out = open_out(dir / ("trace_chain" + std::to_string(t.chain + 1) + ".csv"));
    write_trace_csv(out, to_table(t));
    parts.push_back(t.draws);
    wall += t.wall_seconds;
  }
  {
    auto out = open_out(dir / "summary.csv");
    write_summary_csv(out, summarize(stack(parts), traces.front().labels, wall));
  }

  auto meta = open_out(dir / "metadata.ini");
  cfg.write_ini(meta);
  const auto& s = model.scheme();
  meta << "\n[run]\nversion = " << kVersion << "\ncommand = fit\n";
  meta << "\n[dimensions]\ncells = " << s.n_cells() << "\nmarginals = ";
  for (std::size_t i = 0; i < s.marginals.size(); ++i) meta << (i ? "," : "") << g.label(s.marginals[i]);
  meta << "\nfree_interactions = " << s.n_free() << "\nzero_interactions = " << s.zero_index.size()
       << "\nd_pi = " << model.d_pi() << "\nd_xi = " << model.d_xi() << "\nxi = ";
  if (model.has_xi()) {
    for (int i = 0; i < model.xi().size(); ++i) {
      meta << (i ? " " : "") << model.layout().pi_label(model.xi().indices[i]);
    }
  }
  meta << "\n\n[timing]\ntotal_wall_seconds = " << fmt17(wall) << '\n';
  for (const auto& t : traces) {
    meta << "chain" << t.chain + 1 << "_wall_seconds = " << fmt17(t.wall_seconds) << '\n';
  }
  meta << "\n[results]\n";
  for (const auto& t : traces) {
    const std::string c = "chain" + std::to_string(t.chain + 1);
    meta << c << "_draws = " << t.rows() << '\n'
         << c << "_acceptance = " << t.acceptance_rate() << '\n'
         << c << "_inversion_failures = " << t.inversion_failures << '\n'
         << c << "_singular_jacobians = " << t.singular_jacobians << '\n'
         << c << "_probability_floor_hits = " << t.probability_floor_hits << '\n'
         << c << "_max_abs_zero = " << (t.zero_draws.size() ? t.zero_draws.cwiseAbs().maxCoeff() : 0.0)
         << '\n';
    if (!t.final_scales.empty()) {
      meta << c << "_scales =";
      for (double v : t.final_scales) meta << ' ' << v;
      meta << '\n';
    }
  }
  for (const auto& t : traces) {
    std::cout << "chain " << t.chain + 1 << ": " << t.rows() << " draws, acceptance "
              << t.acceptance_rate() << ", " << t.wall_seconds << " s\n";
  }
  std::cout << "wrote " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

Eigen::VectorXd truth_lambda(const Config& cfg, const MarginalScheme& s) {
  const int nf = s.n_free();
  if (cfg.has("simulate.lambda")) {
    const auto v = cfg.reals("simulate.lambda");
    if (static_cast<int>(v.size()) != nf) {
      throw InputError("simulate.lambda has " + std::to_string(v.size()) + " values; the scheme has " +
                       std::to_string(nf) + " free interactions");
    }
    return Eigen::Map<const Eigen::VectorXd>(v.data(), nf);
  }
  const std::string path = cfg.str("simulate.lambda_file");
  std::ifstream in(path);
  if (!in) throw InputError("simulate.lambda_file: cannot open '" + path + "'");
  const auto labels = s.free_labels();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(nf);
  std::vector<bool> seen(static_cast<std::size_t>(nf), false);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = csv::split(line);
    if (f.empty() || (f.size() == 1 && f[0].empty())) continue;
    if (line_no == 1 && f.size() == 2 && f[0] == "label") continue;
    if (f.size() != 2) {
      throw InputError("simulate.lambda_file line " + std::to_string(line_no) + ": expected label,value");
    }
    const auto it = std::find(labels.begin(), labels.end(), f[0]);
    if (it == labels.end()) {
      throw InputError("simulate.lambda_file line " + std::to_string(line_no) + ": '" + f[0] +
                       "' is not a free interaction of this scheme");
    }
    const auto k = static_cast<std::size_t>(it - labels.begin());
    if (seen[k]) throw InputError("simulate.lambda_file: duplicate label '" + f[0] + "'");
    seen[k] = true;
    try {
      out[static_cast<Eigen::Index>(k)] = std::stod(f[1]);
    } catch (const std::exception&) {
      throw InputError("simulate.lambda_file line " + std::to_string(line_no) + ": bad value '" + f[1] + "'");
    }
  }
  return out;
}

int cmd_simulate(const Config& cfg) {
  const BidirectedGraph g = load_graph(cfg);
  const MarginalScheme s = load_scheme(cfg, g);
  const int sources = (cfg.has("simulate.lambda") ? 1 : 0) + (cfg.has("simulate.lambda_file") ? 1 : 0) +
                      (cfg.has("simulate.probabilities") ? 1 : 0);
  if (sources != 1) {
    throw InputError("exactly one of simulate.lambda, simulate.lambda_file, simulate.probabilities is required");
  }
  const auto total = cfg.integer("simulate.total");
  const auto replicates = cfg.integer("simulate.replicates");
  if (total < 1) throw InputError("simulate.total must be at least 1");
  if (replicates < 1) throw InputError("simulate.replicates must be at least 1");
  const auto seed = static_cast<std::uint64_t>(cfg.integer("sampler.seed"));

  Eigen::VectorXd p;
  if (cfg.has("simulate.probabilities")) {
    const auto v = cfg.reals("simulate.probabilities");
    if (static_cast<int>(v.size()) != s.n_cells()) {
      throw InputError("simulate.probabilities has " + std::to_string(v.size()) + " values; the table has " +
                       std::to_string(s.n_cells()) + " cells");
    }
    p = Eigen::Map<const Eigen::VectorXd>(v.data(), s.n_cells());
    if ((p.array() < 0.0).any()) throw InputError("simulate.probabilities must be nonnegative");
    if (std::abs(p.sum() - 1.0) > 1e-9) throw InputError("simulate.probabilities must sum to 1");
  } else {
    p = invert_lambda(s, truth_lambda(cfg, s));
  }

  const fs::path dir = output_dir(cfg);
  {
    auto out = open_out(dir / "truth_probabilities.csv");
    for (int v = 0; v < g.size(); ++v) out << g.variable(v).name << ',';
    out << "probability\n" << std::setprecision(17);
    for (int i = 0; i < s.n_cells(); ++i) {
      int rest = i;
      for (int v = 0; v < g.size(); ++v) {
        out << rest % g.levels(v) + 1 << ',';
        rest /= g.levels(v);
      }
      out << p[i] << '\n';
    }
  }
  const int width = std::max<int>(3, static_cast<int>(std::to_string(replicates).size()));
  for (long long r = 0; r < replicates; ++r) {
    Philox rng(seed, static_cast<std::uint64_t>(r));
    const ContingencyTable t = simulate_table(p, total, rng);
    std::ostringstream name;
    name << "counts_rep" << std::setw(width) << std::setfill('0') << r + 1 << ".csv";
    auto out = open_out(dir / name.str());
    write_counts_csv(out, t, g);
  }
  auto meta = open_out(dir / "metadata.ini");
  cfg.write_ini(meta);
  meta << "\n[run]\nversion = " << kVersion << "\ncommand = simulate\n";
  std::cout << "wrote " << replicates << " tables to " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- dump-scheme

int cmd_dump_scheme(const Config& cfg) {
  const BidirectedGraph g = load_graph(cfg);
  const MarginalScheme s = load_scheme(cfg, g);
  const fs::path dir = output_dir(cfg);
  dump_scheme_files(dir, s);

  std::cout << "marginals:";
  for (std::size_t i = 0; i < s.marginals.size(); ++i) {
    std::cout << ' ' << g.label(s.marginals[i]) << (s.is_disconnected[i] ? "*" : "");
  }
  std::cout << "\ncells " << s.n_cells() << ", free " << s.n_free() << ", zero " << s.zero_index.size()
            << "\nindependencies:";
  for (const auto& ind : implied_independencies(g)) {
    std::cout << ' ' << g.label(ind.left) << " _||_ " << g.label(ind.right) << ';';
  }
  const auto latent_levels = cfg.integer("model.latent_levels");
  if (latent_levels < 2) throw InputError("model.latent_levels must be at least 2");
  const DagLayout layout(augmented_dag(g, static_cast<int>(latent_levels)));
  const auto& dag = layout.dag();
  std::cout << "\naugmented DAG:";
  for (int v = 0; v < dag.size(); ++v) {
    std::cout << ' ' << dag.variable(v).name;
    const auto& pa = dag.parents(v);
    for (std::size_t i = 0; i < pa.size(); ++i) std::cout << (i ? "," : "<-") << dag.variable(pa[i]).name;
    std::cout << ';';
  }
  std::cout << "\nd_pi " << layout.d_pi() << ", d_xi " << layout.d_pi() - (s.n_free() - 1) << '\n';
  std::cout << "wrote " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  std::vector<std::string> traces;
  std::optional<double> wall_seconds;
  std::string metadata;
  std::string reorder;
  std::uint64_t seed = 1;
  std::string out;
};

std::optional<int> chain_from_name(const fs::path& p) {
  const std::string stem = p.stem().string();
  if (stem.rfind("trace_chain", 0) != 0) return std::nullopt;
  try {
    return std::stoi(stem.substr(11));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

int cmd_diagnose(const DiagnoseArgs& a) {
  std::vector<Eigen::MatrixXd> parts;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < a.traces.size(); ++i) {
    std::ifstream in(a.traces[i]);
    if (!in) throw InputError("cannot open trace '" + a.traces[i] + "'");
    TraceTable t;
    try {
      t = read_trace_csv(in);
    } catch (const InputError& e) {
      throw InputError(a.traces[i] + ": " + e.what());
    }
    if (i == 0) {
      labels = t.labels;
    } else if (t.labels != labels) {
      throw InputError(a.traces[i] + ": columns differ from " + a.traces[0]);
    }
    Eigen::MatrixXd d = std::move(t.draws);
    if (!a.reorder.empty()) {
      Philox rng(a.seed, i);
      d = reorder(d, Reorder::parse(a.reorder), rng);
    }
    parts.push_back(std::move(d));
  }

  double wall = 0.0;
  if (a.wall_seconds) {
    wall = *a.wall_seconds;
  } else {
    std::string meta = a.metadata;
    if (meta.empty()) {
      const fs::path guess = fs::path(a.traces.front()).parent_path() / "metadata.ini";
      if (fs::exists(guess)) meta = guess.string();
    }
    if (!meta.empty()) {
      std::optional<double> w;
      if (a.traces.size() == 1) {
        if (const auto c = chain_from_name(a.traces.front())) w = metadata_wall_seconds(meta, *c);
      }
      if (!w) w = metadata_wall_seconds(meta);
      if (w) wall = *w;
    }
    if (wall == 0.0) std::cerr << "no wall time available; ess_per_sec is 0\n";
  }

  const Eigen::MatrixXd draws = stack(parts);
  const auto rows = summarize(draws, labels, wall);
  if (a.out.empty()) {
    write_summary_csv(std::cout, rows);
  } else {
    auto out = open_out(a.out);
    write_summary_csv(out, rows);
  }
  std::cerr << "summarised " << draws.rows() << " draws\n";
  return kExitOk;
}

}  // namespace

std::vector<VertexSet> parse_marginals(const std::vector<std::string>& words,
                                       const BidirectedGraph& g) {
  std::vector<VertexSet> out;
  for (const auto& w : words) {
    VertexSet s;
    std::vector<std::string> names;
    if (g.index_of(w) >= 0) {
      names.push_back(w);
    } else if (w.find(':') != std::string::npos) {
      std::istringstream in(w);
      for (std::string n; std::getline(in, n, ':');) names.push_back(n);
    } else {
      for (char ch : w) names.emplace_back(1, ch);
    }
    for (const auto& n : names) {
      const int v = g.index_of(n);
      if (v < 0) throw InputError("unknown variable '" + n + "' in marginal '" + w + "'");
      if (s.contains(v)) throw InputError("variable '" + n + "' repeated in marginal '" + w + "'");
      s = s.with(v);
    }
    if (s.empty()) throw InputError("empty marginal");
    out.push_back(s);
  }
  return out;
}

ChainConfig chain_config(const Config& cfg) {
  ChainConfig c;
  c.algorithm = parse_algorithm(cfg.str("sampler.algorithm"));
  c.iterations = static_cast<int>(cfg.integer("sampler.iterations"));
  c.burn_in = static_cast<int>(cfg.integer("sampler.burn_in"));
  const auto seed = cfg.integer("sampler.seed");
  if (seed < 0) throw InputError("sampler.seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.latent_levels = static_cast<int>(cfg.integer("model.latent_levels"));
  c.rw_scales = cfg.reals("sampler.rw_scales");
  c.rw_tune = cfg.boolean("sampler.rw_tune");
  c.rw_target = cfg.real("sampler.rw_target");
  c.paa_stage1_iterations = static_cast<int>(cfg.integer("sampler.paa_stage1_iterations"));
  try {
    c.paa_reorder = Reorder::parse(cfg.str("sampler.paa_reorder"));
  } catch (const InputError& e) {
    throw InputError(std::string("sampler.paa_reorder: ") + e.what());
  }
  c.pbis_split_prior = parse_split_prior(cfg.str("sampler.pbis_split_prior"));
  c.prior.kind = parse_prior_kind(cfg.str("prior.kind"));
  c.prior.sigma2 = cfg.real("prior.sigma2");
  c.prior.alpha = cfg.real("prior.alpha");
  c.validate();
  return c;
}

std::optional<double> metadata_wall_seconds(const std::string& path, std::optional<int> chain) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InputError("metadata '" + path + "': " + e.message());
  }
  const std::string key =
      chain ? "timing.chain" + std::to_string(*chain) + "_wall_seconds" : "timing.total_wall_seconds";
  if (const auto v = tree.get_optional<std::string>(key)) return std::stod(*v);
  return std::nullopt;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Bayesian marginal log-linear models for bi-directed graphs"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Invocation fit_inv, sim_inv, dump_inv;
  auto* fit = app.add_subcommand("fit", "run MCMC chains and write traces, summary and metadata");
  add_config_options(fit, fit_inv);
  auto* sim = app.add_subcommand("simulate", "generate contingency tables from a true model");
  add_config_options(sim, sim_inv);
  auto* dump = app.add_subcommand("dump-scheme", "write M, C, K and the effect table");
  add_config_options(dump, dump_inv);

  DiagnoseArgs diag;
  auto* dg = app.add_subcommand("diagnose", "recompute a summary from stored traces");
  dg->add_option("traces", diag.traces, "trace CSV files (pooled)")->required();
  dg->add_option("--wall-seconds", diag.wall_seconds, "wall time used for ESS per second");
  dg->add_option("--metadata", diag.metadata, "metadata.ini written by fit (default: next to the trace)");
  dg->add_option("--reorder", diag.reorder, "permute | thin:K, applied to each trace first");
  dg->add_option("--seed", diag.seed, "seed for --reorder permute");
  dg->add_option("--out", diag.out, "summary CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*dg) return cmd_diagnose(diag);
    if (*fit) return cmd_fit(Config::load(fit_inv.config_file, fit_inv.overrides));
    if (*sim) return cmd_simulate(Config::load(sim_inv.config_file, sim_inv.overrides));
    return cmd_dump_scheme(Config::load(dump_inv.config_file, dump_inv.overrides));
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace margmc::cli
