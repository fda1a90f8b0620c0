// sim: command-line front end for the experiment recipes.
//
// Every run writes its tables/JSON plus manifest.json into --output. Exit
// codes: 0 success, 1 invalid input, 2 numerical failure.

#include "geophase/diagnostics.hpp"
#include "geophase/experiments.hpp"
#include "geophase/grape.hpp"
#include "geophase/readout.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace geophase;
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config;
  std::string output = "out";
  std::uint64_t seed = 1;
  std::string mode = "ideal";
  int dim = 0;
  long long shots = 0;
};

std::string read_file(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw DomainError("cannot read '" + p.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Writer {
public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_))
      throw DomainError("cannot create output directory '" + dir_.string() + "'");
  }
  void write(const std::string &name, const std::string &text) {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << text;
    if (!out)
      throw DomainError("cannot write '" + (dir_ / name).string() + "'");
    files_.push_back(name);
  }
  const std::vector<std::string> &files() const { return files_; }

private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// "start:stop:count", both ends included.
std::vector<double> parse_range(const std::string &text) {
  double a, b;
  int n;
  char c1, c2;
  std::istringstream in(text);
  if (!(in >> a >> c1 >> b >> c2 >> n) || c1 != ':' || c2 != ':' || n < 1 || !in.eof())
    throw DomainError("expected start:stop:count, got '" + text + "'");
  std::vector<double> v;
  for (int i = 0; i < n; ++i)
    v.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  return v;
}

GridAxis parse_grid(const std::string &text) {
  const auto v = parse_range(text);
  return {v.front(), v.back(), static_cast<int>(v.size())};
}

// Probability vector: numbers separated by commas/newlines, or
// "label,value" lines; '#' comments and non-numeric header lines skipped.
RVec parse_probs(const std::string &text) {
  std::vector<double> v;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos)
      line.erase(h);
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ','))
      if (f.find_first_not_of(" \t\r") != std::string::npos)
        fields.push_back(f);
    if (fields.empty())
      continue;
    auto number = [](const std::string &s, double &out) {
      try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return s.find_first_not_of(" \t\r", pos) == std::string::npos;
      } catch (const std::exception &) {
        return false;
      }
    };
    const bool labelled = fields.size() == 2 && fields[0].find_first_not_of("01 \t") == std::string::npos &&
                          fields[0].find_first_of("01") != std::string::npos &&
                          fields[0].find('.') == std::string::npos && fields[0].size() > 1;
    double x;
    if (labelled) {
      if (!number(fields[1], x))
        throw DomainError("bad probability '" + fields[1] + "'");
      v.push_back(x);
      continue;
    }
    bool all = true;
    std::vector<double> row;
    for (const auto &s : fields)
      all = all && number(s, x) && (row.push_back(x), true);
    if (!all) {
      if (v.empty())
        continue; // header
      throw DomainError("bad probability line '" + line + "'");
    }
    v.insert(v.end(), row.begin(), row.end());
  }
  if (v.empty())
    throw DomainError("no probabilities found");
  return Eigen::Map<RVec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ExperimentContext make_context(const Globals &g, std::string &config_path) {
  ExperimentContext ctx;
  const fs::path path = g.config.empty() ? data_path("device_b.cfg") : fs::path(g.config);
  config_path = path.string();
  const std::string text = read_file(path);
  ctx.params = load_params(text);
  ctx.config_hash = config_hash(text);
  ctx.seed = g.seed;
  ctx.mode = parse_mode(g.mode);
  if (g.dim) {
    if (g.dim < 2)
      throw DomainError("--dim must be >= 2");
    ctx.dim = g.dim;
  }
  if (g.shots) {
    if (g.shots < 1)
      throw DomainError("--shots must be positive");
    ctx.shots = g.shots;
  }
  return ctx;
}

void write_result(Writer &w, const ExperimentResult &r) {
  w.write("summary.json", r.to_json());
  for (const auto &t : r.tables)
    w.write(t.name + ".csv", t.to_csv());
  for (const auto &s : r.scalars)
    std::cout << s.name << " = " << fmt17(s.value)
              << (s.check == Check::none ? "" : s.passed() ? "  [ok]" : "  [FAILED]")
              << (s.measured ? "  (measured " + fmt17(*s.measured) + ")" : "") << "\n";
}

Encoding parse_code(const std::string &code, double alpha, int dim) {
  if (code == "binomial")
    return binomial_encoding(dim);
  if (code == "cat-shifted")
    return cat_encoding(alpha, dim, CatVariant::shifted);
  if (code == "cat-symmetric")
    return cat_encoding(alpha, dim, CatVariant::symmetric);
  throw DomainError("unknown code '" + code + "' (binomial|cat-shifted|cat-symmetric)");
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Geometric-phase bosonic gate simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Device configuration (default: bundled device_b.cfg)");
  app.add_option("--output,-o", g.output, "Output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--mode", g.mode, "ideal | pulse | pulse+decoherence")->capture_default_str();
  app.add_option("--dim", g.dim, "Cavity truncation override");
  app.add_option("--shots", g.shots, "Sampled tomography through the readout model");

  // Subcommand options, all recorded verbatim in the manifest.
  std::map<std::string, std::string> opts;
  auto opt = [&](CLI::App *sub, const std::string &name, const std::string &def,
                 const std::string &help) {
    opts[sub->get_name() + name] = def;
    return sub->add_option(name, opts[sub->get_name() + name], help)->capture_default_str();
  };
  auto get = [&](CLI::App *sub, const std::string &name) { return opts[sub->get_name() + name]; };

  auto *parity = app.add_subcommand("parity-sweep", "Parity vs geometric phase");
  opt(parity, "--delta", "0", "Displacement phase delta (rad)");
  opt(parity, "--phis", "0:6.283185307179586:64", "start:stop:count (both ends included)");
  opt(parity, "--alpha", fmt17(std::numbers::sqrt2), "Cat amplitude");

  auto *zrep = app.add_subcommand("zgate-repeat", "QPT fidelity vs number of Z gates");
  opt(zrep, "--m-max", "6", "Largest number of gates");

  auto *qpt = app.add_subcommand("qpt", "Process tomography of one gate");
  opt(qpt, "--gate", "z", "z | s | t | cz-coherent | cz-binomial");

  auto *cz = app.add_subcommand("cz", "Process tomography of the two-cavity CZ");
  opt(cz, "--encoding", "binomial", "binomial | coherent");

  auto *bell = app.add_subcommand("bell", "Bell state from |++> and CZ");
  opt(bell, "--encoding", "binomial", "binomial | coherent");
  opt(bell, "--grid", "-2.5:2.5:41", "Joint Wigner axis start:stop:count");

  auto *snap = app.add_subcommand("snap-bell", "Two-cavity SNAP single-photon Bell state");
  opt(snap, "--sign", "+1", "+1 or -1");
  opt(snap, "--grid", "-2:2:41", "Wigner axis start:stop:count");

  auto *budget = app.add_subcommand("error-budget", "Per-source infidelity breakdown");
  opt(budget, "--gate", "z", "z | cz-coherent | cz-binomial");

  auto *wig = app.add_subcommand("wigner", "Wigner map of an encoded logical state");
  opt(wig, "--code", "cat-shifted", "binomial | cat-shifted | cat-symmetric");
  opt(wig, "--alpha", fmt17(std::numbers::sqrt2), "Cat amplitude");
  opt(wig, "--theta", "1.5707963267948966", "Bloch polar angle of the logical state");
  opt(wig, "--phi", "0", "Bloch azimuth of the logical state");
  opt(wig, "--grid", "-3:3:61", "Axis start:stop:count (both quadratures)");

  auto *grape = app.add_subcommand("grape-optimize", "Optimize an encode or decode pulse");
  opt(grape, "--task", "encode", "encode | decode");
  opt(grape, "--code", "binomial", "binomial | cat-shifted | cat-symmetric");
  opt(grape, "--alpha", fmt17(std::numbers::sqrt2), "Cat amplitude");
  opt(grape, "--qubit", "Q2", "Ancilla qubit");
  opt(grape, "--cavity", "S2", "Storage cavity");
  opt(grape, "--steps", "500", "Number of piecewise-constant steps");
  opt(grape, "--dt", "1", "Step length (ns)");
  opt(grape, "--idle", "0", "Kerr idle before decoding (ns)");
  opt(grape, "--target", "0.9999", "Target fidelity");
  opt(grape, "--max-iterations", "2000", "Iteration budget");

  auto *rc = app.add_subcommand("readout-correct", "Invert the readout assignment matrix");
  opt(rc, "--matrix", "", "Assignment CSV (default: bundled table_s3.csv)");
  opt(rc, "--probs", "", "Measured probability vector (CSV)")->required();
  opt(rc, "--correction", "raw", "raw | simplex");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 1;
  }

  CLI::App *sub = app.get_subcommands().front();
  auto num = [](const std::string &s) {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception &) {
      pos = 0;
    }
    if (pos == 0 || pos != s.size())
      throw DomainError("expected a number, got '" + s + "'");
    return v;
  };
  auto integer = [&](const std::string &s) {
    const double v = num(s);
    if (v != std::floor(v))
      throw DomainError("expected an integer, got '" + s + "'");
    return static_cast<long long>(v);
  };

  try {
    std::string config_path;
    ExperimentContext ctx = make_context(g, config_path);
    Writer w(g.output);
    const std::string name = sub->get_name();

    if (sub == parity) {
      write_result(w, run_parity_sweep(num(get(sub, "--delta")), parse_range(get(sub, "--phis")),
                                       ctx, num(get(sub, "--alpha"))));
    } else if (sub == zrep) {
      write_result(w, run_zgate_repetition(static_cast<int>(integer(get(sub, "--m-max"))), ctx));
    } else if (sub == qpt || sub == cz) {
      GateKind gate;
      if (sub == qpt) {
        gate = parse_gate(get(sub, "--gate"));
      } else {
        const auto e = get(sub, "--encoding");
        if (e != "binomial" && e != "coherent")
          throw DomainError("--encoding must be binomial or coherent");
        gate = e == "binomial" ? GateKind::cz_binomial : GateKind::cz_coherent;
      }
      const auto r = run_qpt(gate, ctx);
      write_result(w, r);
      w.write("ptm.json", r.transfer_matrices.front().to_json());
    } else if (sub == bell) {
      const auto e = get(sub, "--encoding");
      if (e != "binomial" && e != "coherent")
        throw DomainError("--encoding must be binomial or coherent");
      write_result(w, run_bell_generation(e == "binomial" ? BellEncoding::binomial
                                                          : BellEncoding::coherent,
                                          ctx, parse_grid(get(sub, "--grid"))));
    } else if (sub == snap) {
      write_result(w, run_snap_bell(static_cast<int>(integer(get(sub, "--sign"))), ctx,
                                    parse_grid(get(sub, "--grid"))));
    } else if (sub == budget) {
      write_result(w, run_error_budget(parse_gate(get(sub, "--gate")), ctx));
    } else if (sub == wig) {
      const Encoding enc = parse_code(get(sub, "--code"), num(get(sub, "--alpha")), ctx.dim.value_or(30));
      const double th = num(get(sub, "--theta")), ph = num(get(sub, "--phi"));
      const Ket psi = logical_ket(enc, std::cos(th / 2), std::exp(I_UNIT * ph) * std::sin(th / 2));
      const GridAxis axis = parse_grid(get(sub, "--grid"));
      const WignerGrid grid = wigner_grid(DensityOp::from_ket(psi), axis, axis);
      w.write("wigner.csv", grid.to_csv());
      w.write("wigner.json", grid.to_json());
      std::cout << "integral = " << fmt17(grid.integral()) << "\n";
    } else if (sub == grape) {
      const std::string task_kind = get(sub, "--task");
      const Encoding enc = parse_code(get(sub, "--code"), num(get(sub, "--alpha")), ctx.dim.value_or(8));
      const auto steps = integer(get(sub, "--steps"));
      if (steps < 1)
        throw DomainError("--steps must be positive");
      const double dt = num(get(sub, "--dt"));
      if (task_kind != "encode" && task_kind != "decode")
        throw DomainError("--task must be encode or decode");
      const TransferTask task =
          task_kind == "encode"
              ? encode_task(ctx.params, get(sub, "--qubit"), get(sub, "--cavity"), enc,
                            static_cast<std::size_t>(steps), dt)
              : decode_task(ctx.params, get(sub, "--qubit"), get(sub, "--cavity"), enc,
                            num(get(sub, "--idle")), static_cast<std::size_t>(steps), dt);
      GrapeOptions o;
      o.seed = ctx.seed;
      o.target_fidelity = num(get(sub, "--target"));
      o.max_iterations = static_cast<int>(integer(get(sub, "--max-iterations")));
      const auto [pulse, report] = optimize(task, o);
      w.write("pulse.csv", pulse.to_csv());
      ojson j;
      j["fidelity"] = report.fidelity;
      j["iterations"] = report.iterations;
      j["reached_target"] = report.reached_target;
      j["status"] = report.status;
      j["fidelities"] = report.fidelities;
      j["gradient_norms"] = report.gradient_norms;
      w.write("report.json", j.dump(2) + "\n");
      std::cout << "fidelity = " << fmt17(report.fidelity) << " after " << report.iterations
                << " iterations (" << report.status << ")\n";
      std::cerr << "wall time " << report.wall_seconds << " s\n";
    } else if (sub == rc) {
      const auto m = get(sub, "--matrix");
      const AssignmentMatrix a = m.empty() ? default_assignment() : load_assignment(m);
      RVec p = parse_probs(read_file(get(sub, "--probs")));
      if (p.size() != a.R.cols())
        throw DomainError("--probs has " + std::to_string(p.size()) + " entries, matrix needs " +
                          std::to_string(a.R.cols()));
      if ((p.array() < 0.0).any())
        throw DomainError("--probs has negative entries");
      const double sum = p.sum();
      if (std::abs(sum - 1.0) > 1e-6) {
        if (std::abs(sum - 1.0) > 1e-2)
          throw DomainError("--probs sums to " + fmt17(sum));
        warn("probabilities sum to " + fmt17(sum) + "; renormalized");
        p /= sum;
      }
      const auto c = get(sub, "--correction");
      if (c != "raw" && c != "simplex")
        throw DomainError("--correction must be raw or simplex");
      CorrectionReport rep;
      const RVec q = correct_readout(p, a, c == "raw" ? CorrectionMode::raw : CorrectionMode::simplex,
                                     &rep);
      std::string csv = "outcome,measured,corrected\n";
      for (Eigen::Index i = 0; i < q.size(); ++i)
        csv += a.outcome_labels[static_cast<std::size_t>(i)] + "," + fmt17(p(i)) + "," + fmt17(q(i)) + "\n";
      w.write("corrected.csv", csv);
      std::cout << csv;
      if (rep.negative)
        std::cout << "# raw inverse has negative components (min " << fmt17(rep.min_component) << ")\n";
    }

    ojson man;
    man["subcommand"] = name;
    man["config"] = config_path;
    man["config_hash"] = ctx.config_hash;
    man["seed"] = g.seed;
    man["mode"] = g.mode;
    man["dim"] = g.dim ? ojson(g.dim) : ojson(nullptr);
    man["shots"] = g.shots ? ojson(g.shots) : ojson(nullptr);
    auto &o = man["options"] = ojson::object();
    for (const auto *op : sub->get_options())
      if (op->get_name() != "--help" && op->get_name() != "-h")
        o[op->get_name()] = get(sub, op->get_name());
    man["files"] = w.files();
    w.write("manifest.json", man.dump(2) + "\n");
    return 0;
  } catch (const NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const DomainError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
