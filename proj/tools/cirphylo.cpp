// cirphylo: command-line front end for the CIR rate-variation library.
//
// Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cirphylo.hpp"

namespace {

using namespace cirphylo;
using json = nlohmann::ordered_json;

enum class Format { csv, json };

struct Common {
  std::string format = "csv";
  std::string out;
  std::uint64_t seed = default_seed;
  unsigned threads = 0;

  Format fmt() const { return format == "json" ? Format::json : Format::csv; }
};

struct Cir_source {
  std::string cir;  // "a,b,sigma2"
  std::optional<double> gamma;
  std::optional<double> dispersion;
};

struct Model_options {
  std::string model = "jc";
  std::optional<double> kappa;
  std::string freqs;
  std::string rates;
};

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, ptr};
}

// JSON cannot carry nan/inf; they become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::string_view rest{text};
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    auto item = detail::trim(rest.substr(0, comma));
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size()) {
      throw Validation_error{what + ": '" + std::string{item} + "' is not a number"};
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

Cir_params resolve_cir(const Cir_source& src) {
  const bool stats = src.gamma.has_value() || src.dispersion.has_value();
  if (!src.cir.empty() && stats) throw Validation_error{"give either --cir or --gamma/--dispersion, not both"};
  if (!src.cir.empty()) {
    const auto v = parse_list(src.cir, "--cir");
    if (v.size() != 3) throw Validation_error{"--cir expects a,b,sigma2"};
    return make_params(v[0], v[1], v[2]);
  }
  if (!src.dispersion) throw Validation_error{"CIR parameters required: --cir a,b,sigma2 or --gamma G --dispersion I"};
  return estimate_from_stats(src.gamma.value_or(1.0), *src.dispersion);
}

Rate_matrix resolve_model(const Model_options& o) {
  Model_spec spec;
  spec.family = parse_model_family(o.model);
  if (spec.family == Model_family::custom) throw Validation_error{"--model custom is not available from the command line"};
  if (o.kappa) spec.params["kappa"] = *o.kappa;
  if (!o.freqs.empty()) spec.frequencies = parse_list(o.freqs, "--freqs");
  if (!o.rates.empty()) {
    const auto r = parse_list(o.rates, "--rates");
    if (r.size() != 6) throw Validation_error{"--rates expects six exchangeabilities ac,ag,at,cg,ct,gt"};
    const char* keys[] = {"ac", "ag", "at", "cg", "ct", "gt"};
    for (std::size_t k = 0; k < 6; ++k) spec.params[keys[k]] = r[k];
  }
  return build_rate_matrix(spec);
}

std::string read_file(const std::string& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) throw Validation_error{"cannot open '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A Newick argument may be a file path or the tree text itself.
Tree load_tree(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '(') return parse_newick(arg);
  return parse_newick(read_file(arg));
}

Alignment_format alignment_format(const std::string& name, const std::string& path) {
  if (name == "fasta") return Alignment_format::fasta;
  if (name == "phylip") return Alignment_format::phylip;
  for (const char* ext : {".phy", ".phylip"}) {
    const std::string e{ext};
    if (path.size() >= e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0) {
      return Alignment_format::phylip;
    }
  }
  return Alignment_format::fasta;
}

json cir_json(const Cir_params& p) {
  return {{"a", p.a()}, {"b", p.b()}, {"sigma2", p.sigma2()}, {"feller", p.feller_satisfied()}};
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty() || c.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out{c.out, std::ios::binary};
  if (!out) throw Validation_error{"cannot write '" + c.out + "'"};
  out << text;
}

void emit_json(const Common& c, const json& j) { emit(c, j.dump(2) + "\n"); }

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string line;
  bool first = true;
  for (const auto& cell : cells) {
    if (!first) line += ',';
    line += cell;
    first = false;
  }
  return line + "\n";
}

// ---- subcommands -----------------------------------------------------------

void run_estimate(const Common& c, double gamma, std::optional<double> dispersion) {
  if (!dispersion) throw Validation_error{"--dispersion is required"};
  const auto p = estimate_from_stats(gamma, *dispersion);
  if (c.fmt() == Format::json) {
    emit_json(c, {{"command", "estimate"},
                  {"gamma", gamma},
                  {"dispersion", *dispersion},
                  {"cir", cir_json(p)},
                  {"stationary_shape", p.stationary_shape()},
                  {"stationary_scale", p.stationary_scale()}});
    return;
  }
  emit(c, csv_row({"a", "b", "sigma2", "stationary_shape", "stationary_scale", "feller"}) +
              csv_row({fmt_num(p.a()), fmt_num(p.b()), fmt_num(p.sigma2()), fmt_num(p.stationary_shape()),
                       fmt_num(p.stationary_scale()), p.feller_satisfied() ? "true" : "false"}));
}

struct Lik_options {
  std::string tree;
  std::string aln;
  std::string aln_format = "auto";
  std::size_t samples = 10000;
  bool force_mc = false;
};

void run_lik(const Common& c, const Cir_source& src, const Model_options& mo, const Lik_options& lo) {
  const auto p = resolve_cir(src);
  const auto m = resolve_model(mo);
  const auto tree = load_tree(lo.tree);
  const auto aln = read_alignment(read_file(lo.aln), alignment_format(lo.aln_format, lo.aln));

  bool exact = !lo.force_mc && tree.is_three_leaf_star();
  if (exact) {
    for (auto leaf : tree.node(tree.root()).children) exact = exact && tree.node(leaf).branch_length > 0.0;
  }

  std::vector<Site_estimate> sites;
  std::size_t rejected = 0;
  if (exact) {
    const auto leaf_row = match_taxa(tree, aln);
    const auto encoded = aln.encode(Alphabet::dna());
    const auto& kids = tree.node(tree.root()).children;
    const std::array<double, 3> times{tree.node(kids[0]).branch_length, tree.node(kids[1]).branch_length,
                                      tree.node(kids[2]).branch_length};
    for (std::size_t s = 0; s < aln.site_count(); ++s) {
      std::array<int, 3> states{};
      for (std::size_t k = 0; k < 3; ++k) {
        states[k] = encoded[static_cast<std::size_t>(leaf_row[static_cast<std::size_t>(kids[k])])][s];
      }
      sites.push_back({.likelihood = three_taxa_likelihood(m, p, times, states), .se = 0.0});
    }
  } else {
    auto result = mc_tree_likelihood(m, p, tree, aln, {.samples = lo.samples, .seed = c.seed, .workers = c.threads});
    sites = std::move(result.sites);
    rejected = result.rejected;
  }

  // Standard errors on the log scale by the delta method.
  double total = 0.0, total_var = 0.0;
  std::vector<double> logs, log_ses;
  for (const auto& s : sites) {
    const auto l = std::log(s.likelihood);
    const auto se = s.se / s.likelihood;
    logs.push_back(l);
    log_ses.push_back(se);
    total += l;
    total_var += se * se;
  }
  if (!std::isfinite(total)) throw Numerical_error{"lik: log-likelihood is not finite"};
  const std::string method = exact ? "exact" : "monte_carlo";

  if (c.fmt() == Format::json) {
    json rows = json::array();
    for (std::size_t s = 0; s < sites.size(); ++s) {
      rows.push_back({{"site", s + 1},
                      {"likelihood", num(sites[s].likelihood)},
                      {"se", num(sites[s].se)},
                      {"log_likelihood", num(logs[s])},
                      {"se_log", num(log_ses[s])}});
    }
    json j{{"command", "lik"},
           {"method", method},
           {"model", mo.model},
           {"cir", cir_json(p)},
           {"seed", c.seed},
           {"samples", exact ? 0 : lo.samples},
           {"rejected", rejected},
           {"sites", rows},
           {"total", {{"log_likelihood", num(total)}, {"se", num(std::sqrt(total_var))}}}};
    emit_json(c, j);
    return;
  }
  std::string text = csv_row({"site", "likelihood", "se", "log_likelihood", "se_log", "method"});
  for (std::size_t s = 0; s < sites.size(); ++s) {
    text += csv_row({std::to_string(s + 1), fmt_num(sites[s].likelihood), fmt_num(sites[s].se), fmt_num(logs[s]),
                     fmt_num(log_ses[s]), method});
  }
  text += csv_row({"total", "", "", fmt_num(total), fmt_num(std::sqrt(total_var)), method});
  emit(c, text);
}

struct Simulate_options {
  std::string tree;
  std::size_t sites = 1000;
  double dt = 1e-3;
  std::string mode = "exact";
};

Path_mode parse_mode(const std::string& mode) {
  if (mode == "exact") return Path_mode::exact;
  if (mode == "euler") return Path_mode::euler;
  throw Validation_error{"--mode must be exact or euler"};
}

void run_simulate(const Common& c, const Cir_source& src, const Model_options& mo, const Simulate_options& so) {
  const auto p = resolve_cir(src);
  const auto m = resolve_model(mo);
  const auto tree = load_tree(so.tree);
  Sequence_options opts;
  opts.path = {.dt = so.dt, .mode = parse_mode(so.mode)};
  opts.workers = c.threads;
  const auto sim = simulate_sequences(tree, m, p, so.sites, c.seed, opts);
  if (c.fmt() == Format::json) {
    json seqs = json::array();
    for (std::size_t t = 0; t < sim.alignment.names.size(); ++t) {
      seqs.push_back({{"name", sim.alignment.names[t]}, {"sequence", sim.alignment.sequences[t]}});
    }
    emit_json(c, {{"command", "simulate"},
                  {"model", mo.model},
                  {"cir", cir_json(p)},
                  {"seed", c.seed},
                  {"sites", so.sites},
                  {"sequences", seqs}});
    return;
  }
  emit(c, write_fasta(sim.alignment));
}

void run_dispersion(const Common& c, const Cir_source& src, double t, std::size_t replicates, double dt) {
  const auto p = resolve_cir(src);
  Thinning_options opts;
  opts.path.dt = dt;
  const auto est = dispersion_experiment(p, t, replicates, c.seed, opts, c.threads);
  const auto expected = index_of_dispersion(p, t);
  if (c.fmt() == Format::json) {
    emit_json(c, {{"command", "dispersion"},
                  {"cir", cir_json(p)},
                  {"t", t},
                  {"seed", c.seed},
                  {"replicates", est.n},
                  {"mean_count", est.mean_count},
                  {"var_count", est.var_count},
                  {"dispersion", est.value},
                  {"expected", expected}});
    return;
  }
  emit(c, csv_row({"t", "replicates", "mean_count", "var_count", "dispersion", "expected"}) +
              csv_row({fmt_num(t), std::to_string(est.n), fmt_num(est.mean_count), fmt_num(est.var_count),
                       fmt_num(est.value), fmt_num(expected)}));
}

void run_mgf(const Common& c, const Cir_source& src, double eta, double t, double r0, std::optional<double> rt) {
  const auto p = resolve_cir(src);
  const auto value = rt ? mgf_bridge(p, r0, *rt, eta, t) : mgf_start(p, r0, eta, t);
  if (!std::isfinite(value)) throw Numerical_error{"mgf: result is not finite"};
  const std::string kind = rt ? "bridge" : "start";
  if (c.fmt() == Format::json) {
    json j{{"command", "mgf"}, {"kind", kind}, {"cir", cir_json(p)}, {"eta", eta}, {"t", t}, {"r0", r0}};
    j["rt"] = rt ? json(*rt) : json(nullptr);
    j["mgf"] = value;
    emit_json(c, j);
    return;
  }
  emit(c, csv_row({"kind", "eta", "t", "r0", "rt", "mgf"}) +
              csv_row({kind, fmt_num(eta), fmt_num(t), fmt_num(r0), rt ? fmt_num(*rt) : "", fmt_num(value)}));
}

void add_common(CLI::App* cmd, Common& c, bool seeded) {
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", c.out, "Output file (default: standard output)");
  if (seeded) {
    cmd->add_option("--seed", c.seed, "Random seed");
    cmd->add_option("--threads", c.threads, "Worker threads (0: $CIRPHYLO_THREADS or all cores)");
  }
}

void add_cir(CLI::App* cmd, Cir_source& s) {
  cmd->add_option("--cir", s.cir, "CIR parameters a,b,sigma2");
  cmd->add_option("--gamma", s.gamma, "Rates-across-sites shape estimate (with --dispersion; a = 1)");
  cmd->add_option("--dispersion", s.dispersion, "Long-run index of dispersion estimate (with --gamma)");
}

void add_model(CLI::App* cmd, Model_options& m) {
  cmd->add_option("--model", m.model, "Substitution model: jc, k2p, hky, gtr");
  cmd->add_option("--kappa", m.kappa, "Transition/transversion ratio (k2p, hky)");
  cmd->add_option("--freqs", m.freqs, "Base frequencies A,C,G,T (hky, gtr)");
  cmd->add_option("--rates", m.rates, "GTR exchangeabilities ac,ag,at,cg,ct,gt");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CIR rate-variation phylogenetics: mgfs, likelihoods, simulation"};
  app.require_subcommand(1);

  Common common;
  Cir_source cir;
  Model_options model;

  auto* estimate = app.add_subcommand("estimate", "CIR parameters from (gamma shape, long-run dispersion)");
  double est_gamma = 1.0;
  std::optional<double> est_dispersion;
  estimate->add_option("--gamma", est_gamma, "Rates-across-sites gamma shape estimate");
  estimate->add_option("--dispersion", est_dispersion, "Long-run index of dispersion estimate")->required();
  add_common(estimate, common, false);

  auto* lik = app.add_subcommand("lik", "Per-site likelihoods on a tree");
  Lik_options lik_opts;
  lik->add_option("--tree", lik_opts.tree, "Newick file or string")->required();
  lik->add_option("--aln", lik_opts.aln, "Alignment file")->required();
  lik->add_option("--aln-format", lik_opts.aln_format, "fasta, phylip, or auto (by extension)")
      ->check(CLI::IsMember({"auto", "fasta", "phylip"}));
  lik->add_option("--samples", lik_opts.samples, "Monte-Carlo samples per site");
  lik->add_flag("--force-mc", lik_opts.force_mc, "Use Monte Carlo even on a three-leaf star");
  add_model(lik, model);
  add_cir(lik, cir);
  add_common(lik, common, true);

  auto* simulate = app.add_subcommand("simulate", "Simulate an alignment down a tree (FASTA)");
  Simulate_options sim_opts;
  simulate->add_option("--tree", sim_opts.tree, "Newick file or string")->required();
  simulate->add_option("--sites", sim_opts.sites, "Number of sites");
  simulate->add_option("--dt", sim_opts.dt, "Rate path time step");
  simulate->add_option("--mode", sim_opts.mode, "Rate path scheme: exact or euler");
  add_model(simulate, model);
  add_cir(simulate, cir);
  add_common(simulate, common, true);

  auto* dispersion = app.add_subcommand("dispersion", "Empirical index of dispersion of simulated counts");
  double disp_t = 0.0, disp_dt = 1e-3;
  std::size_t replicates = 10000;
  dispersion->add_option("--t", disp_t, "Time horizon")->required();
  dispersion->add_option("--replicates", replicates, "Number of replicates");
  dispersion->add_option("--dt", disp_dt, "Rate path time step");
  add_cir(dispersion, cir);
  add_common(dispersion, common, true);

  auto* mgf = app.add_subcommand("mgf", "Moment generating function of the integrated rate");
  double eta = 0.0, mgf_t = 0.0, r0 = 0.0;
  std::optional<double> rt;
  mgf->add_option("--eta", eta, "Argument")->required();
  mgf->add_option("--t", mgf_t, "Time")->required();
  mgf->add_option("--r0", r0, "Starting rate")->required();
  mgf->add_option("--rt", rt, "End rate (bridge mgf)");
  add_cir(mgf, cir);
  add_common(mgf, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (estimate->parsed()) run_estimate(common, est_gamma, est_dispersion);
    if (lik->parsed()) run_lik(common, cir, model, lik_opts);
    if (simulate->parsed()) run_simulate(common, cir, model, sim_opts);
    if (dispersion->parsed()) run_dispersion(common, cir, disp_t, replicates, disp_dt);
    if (mgf->parsed()) run_mgf(common, cir, eta, mgf_t, r0, rt);
  } catch (const Validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
