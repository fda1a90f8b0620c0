#include "geophase/experiments.hpp"

#include "geophase/diagnostics.hpp"
#include "geophase/evolution.hpp"

#include <boost/uuid/detail/sha1.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

namespace geophase {

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Simulation layers

struct Layers {
  Backend backend = Backend::ideal;
  bool decoherence = false;
  double kerr_scale = 1.0;
  bool encode_idle = true; // only meaningful with decoherence
};

Layers layers_for(SimMode m) {
  switch (m) {
  case SimMode::ideal:
    return {Backend::ideal, false};
  case SimMode::pulse:
    return {Backend::pulse, false};
  case SimMode::pulse_decoherence:
    return {Backend::pulse, true};
  }
  return {};
}

// One encode -> gates -> decode sequence on a logical frame.
class Sequence {
public:
  Sequence(const ExperimentContext &ctx, LogicalFrame frame, Layers layers)
      : params_(ctx.params.with_kerr_scaled(layers.kerr_scale)), frame_(std::move(frame)),
        layers_(layers), idle_(layers.decoherence && layers.encode_idle ? ctx.encode_duration : 0.0),
        h0_(layers.backend == Backend::pulse
                ? static_hamiltonian(params_, frame_.layout())
                : LinearOp(frame_.layout().space(),
                           CMat::Zero(frame_.layout().space().total_dim(),
                                      frame_.layout().space().total_dim()))) {
    if (layers.decoherence)
      collapses_ = standard_collapses(params_, frame_.layout());
  }

  const DeviceParams &params() const { return params_; }
  LogicalFrame &frame() { return frame_; }
  const Layers &layers() const { return layers_; }
  int n_logical() const { return static_cast<int>(frame_.n_logical()); }

  // Logical outputs for the given logical inputs after `gates`.
  std::vector<CMat> outputs(const std::vector<const GateSpec *> &gates,
                            const std::vector<CMat> &inputs) {
    set_reference(gates);
    std::vector<CMat> out;
    if (!layers_.decoherence) {
      CMat ev = frame_.inputs();
      for (const auto *g : gates)
        ev = realize(*g, params_, frame_.layout(), layers_.backend, ev);
      const auto kraus = frame_.kraus(ev);
      for (const auto &rho : inputs) {
        CMat o = CMat::Zero(rho.rows(), rho.cols());
        for (const auto &a : kraus)
          o += a * rho * a.adjoint();
        out.push_back(o);
      }
      return out;
    }
    for (const auto &rho : inputs) {
      DensityOp r(frame_.layout().space(), frame_.encode_density(rho));
      r = idle(r);
      for (const auto *g : gates)
        r = realize(*g, params_, frame_.layout(), layers_.backend, r, collapses_);
      r = idle(r);
      out.push_back(frame_.logical_density(r.matrix()));
    }
    return out;
  }

  // Physical state after the gates for an encoded logical vector (pure
  // runs) or density (decoherence runs); also sets the reference.
  DensityOp physical(const std::vector<const GateSpec *> &gates, const CVec &logical) {
    set_reference(gates);
    const auto &sp = frame_.layout().space();
    if (!layers_.decoherence) {
      CMat ev = frame_.encode(logical);
      for (const auto *g : gates)
        ev = realize(*g, params_, frame_.layout(), layers_.backend, ev);
      return DensityOp(sp, ev * ev.adjoint());
    }
    DensityOp r(sp, frame_.encode(logical) * frame_.encode(logical).adjoint());
    r = idle(r);
    for (const auto *g : gates)
      r = realize(*g, params_, frame_.layout(), layers_.backend, r, collapses_);
    return idle(r);
  }

private:
  DensityOp idle(const DensityOp &r) const {
    if (idle_ <= 0.0)
      return r;
    return lindblad_evolve(r, h0_, collapses_, idle_);
  }

  // Reference W: the same sequence with every drive off (idles included).
  void set_reference(const std::vector<const GateSpec *> &gates) {
    CMat w = frame_.inputs();
    if (idle_ > 0.0)
      w = apply_propagator(h0_, idle_, w);
    for (const auto *g : gates)
      w = realize(*g, params_, frame_.layout(), layers_.backend, w, {true});
    if (idle_ > 0.0)
      w = apply_propagator(h0_, idle_, w);
    frame_.set_reference(w);
  }

  DeviceParams params_;
  LogicalFrame frame_;
  Layers layers_;
  double idle_;
  LinearOp h0_;
  CollapseSet collapses_;
};

TransferMatrix ptm_from_outputs(int n, const std::vector<CMat> &outputs) {
  const auto inputs = qpt_input_states(n);
  return pauli_transfer(
      [&](const CMat &rho) -> const CMat & {
        for (std::size_t k = 0; k < inputs.size(); ++k)
          if ((rho - inputs[k]).norm() == 0.0)
            return outputs[k];
        throw DomainError("ptm_from_outputs: unexpected input state");
      },
      n);
}

TransferMatrix ideal_ptm(const CMat &u) { return pauli_transfer(u); }

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::mt19937_64 g(seq);
  return g();
}

// Readout model restricted to the decode qubits (Q1 for S1, Q2 for S2).
AssignmentMatrix decode_assignment(const AssignmentMatrix &full, int n_logical) {
  if (full.n_qubits == n_logical)
    return full;
  std::vector<int> keep;
  for (int i = 0; i < n_logical; ++i)
    keep.push_back(i);
  return marginal_assignment(full, keep);
}

// Optionally replaces each logical output by its sampled, readout-corrected
// MLE reconstruction.
std::vector<CMat> measure(std::vector<CMat> outs, int n, const ExperimentContext &ctx,
                          std::uint64_t stream) {
  if (!ctx.shots)
    return outs;
  const auto a = decode_assignment(ctx.readout, n);
  for (std::size_t k = 0; k < outs.size(); ++k) {
    // Tomography of the normalized decoded state; leakage keeps its weight.
    const double tr = outs[k].trace().real();
    if (tr <= 0.0)
      continue;
    outs[k] = tr * sampled_tomography(outs[k] / tr, n, a, *ctx.shots,
                                           sub_seed(ctx.seed, stream, k));
  }
  return outs;
}

CMat cz_matrix() {
  CMat t = CMat::Identity(4, 4);
  t(3, 3) = -1.0;
  return t;
}

CMat phase_matrix(cplx p) {
  CMat t = CMat::Identity(2, 2);
  t(1, 1) = p;
  return t;
}

struct GateSetup {
  GateSetup(std::vector<GateSpec> g, LogicalFrame f, CMat t)
      : gates(std::move(g)), frame(std::move(f)), target(std::move(t)) {}

  std::vector<GateSpec> gates; // one gate application (usually one spec)
  LogicalFrame frame;
  CMat target;
  std::optional<double> ref_ed, ref_gate_ed, ref_gate;
  ToneSolveReport tones;
};

int cavity_dim(const ExperimentContext &ctx, int fallback) { return ctx.dim.value_or(fallback); }

double delta_phi_for(GateKind g) {
  switch (g) {
  case GateKind::z:
    return 0.0;
  case GateKind::s:
    return -kPi / 2;
  case GateKind::t:
    return -3 * kPi / 4;
  default:
    return 0.0;
  }
}

GateSetup make_gate(GateKind kind, const ExperimentContext &ctx, Layers layers) {
  const DeviceParams params = ctx.params.with_kerr_scaled(layers.kerr_scale);
  switch (kind) {
  case GateKind::z:
  case GateKind::s:
  case GateKind::t: {
    const int d = cavity_dim(ctx, 30);
    const Encoding enc = cat_encoding(std::numbers::sqrt2, d, CatVariant::shifted);
    const double dphi = delta_phi_for(kind);
    GateSetup s{{single_cavity_phase_gate(dphi, enc, params)},
                LogicalFrame(SystemLayout({"Q1"}, {{"S1", d}}), "Q1", {enc}),
                phase_matrix(std::exp(I_UNIT * (kPi + dphi)))};
    if (kind == GateKind::z) {
      s.ref_ed = 0.969;
      s.ref_gate_ed = 0.957;
      s.ref_gate = 0.987;
    } else {
      s.ref_gate = kind == GateKind::s ? 0.968 : 0.964;
    }
    return s;
  }
  case GateKind::cz_coherent: {
    const int d = cavity_dim(ctx, 30);
    const Encoding cat = cat_encoding(std::numbers::sqrt2, d, CatVariant::symmetric);
    GateSetup s{{cz_coherent(params)},
                LogicalFrame(SystemLayout({"Q3"}, {{"S1", d}, {"S2", d}}), "Q3", {cat, cat}),
                cz_matrix()};
    s.ref_ed = 0.954;
    s.ref_gate_ed = 0.859;
    s.ref_gate = 0.905;
    return s;
  }
  case GateKind::cz_binomial: {
    const int d = cavity_dim(ctx, 6);
    const Encoding bin = binomial_encoding(d);
    GateSetup s{{},
                LogicalFrame(SystemLayout({"Q3"}, {{"S1", d}, {"S2", d}}), "Q3", {bin, bin}),
                cz_matrix()};
    if (layers.backend == Backend::ideal)
      s.gates.push_back(cz_binomial_ideal());
    else
      s.gates.push_back(cz_binomial(params, {}, &s.tones));
    s.ref_ed = 0.922;
    s.ref_gate_ed = 0.816;
    s.ref_gate = 0.894;
    return s;
  }
  }
  throw DomainError("unknown gate");
}

std::vector<const GateSpec *> repeat(const std::vector<GateSpec> &g, int times) {
  std::vector<const GateSpec *> out;
  for (int i = 0; i < times; ++i)
    for (const auto &s : g)
      out.push_back(&s);
  return out;
}

struct QptFidelities {
  TransferMatrix ed, gate_ed;
  double f_ed = 0.0, f_gate_ed = 0.0;
};

QptFidelities qpt_pair(const GateSetup &setup, const ExperimentContext &ctx, Layers layers,
                       std::uint64_t stream) {
  Sequence seq(ctx, setup.frame, layers);
  const int n = seq.n_logical();
  const auto inputs = qpt_input_states(n);
  QptFidelities q;
  q.ed = ptm_from_outputs(n, measure(seq.outputs({}, inputs), n, ctx, stream));
  q.gate_ed =
      ptm_from_outputs(n, measure(seq.outputs(repeat(setup.gates, 1), inputs), n, ctx, stream + 1));
  const CMat id = CMat::Identity(setup.target.rows(), setup.target.cols());
  q.f_ed = process_fidelity(q.ed, ideal_ptm(id));
  q.f_gate_ed = process_fidelity(q.gate_ed, ideal_ptm(setup.target));
  return q;
}

Table grid_table(const std::string &name, const WignerGrid &g) {
  Table t{name, {g.x_label, g.y_label, "value"}, {}};
  for (int i = 0; i < g.x.points; ++i)
    for (int j = 0; j < g.y.points; ++j)
      t.rows.push_back({g.x.value(i), g.y.value(j), g.at(i, j)});
  return t;
}

Table ptm_table(const std::string &name, const TransferMatrix &r) {
  Table t{name, {}, {}};
  t.label_column = "row";
  for (const auto &l : pauli_labels(r.n_qubits))
    t.columns.push_back(l);
  t.labels = pauli_labels(r.n_qubits);
  for (Eigen::Index i = 0; i < r.R.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index j = 0; j < r.R.cols(); ++j)
      row.push_back(r.R(i, j));
    t.rows.push_back(row);
  }
  return t;
}

CMat cavity_pair_state(const DensityOp &rho, const SystemLayout &layout) {
  const std::size_t keep[] = {layout.index(layout.cavities()[0]),
                              layout.index(layout.cavities()[1])};
  return partial_trace(rho, keep).matrix();
}

double purity(const CMat &m) { return (m * m).trace().real(); }

// Unitary on one cavity acting as `u` on the orthonormal code basis and as
// the identity on its complement.
CMat code_space_unitary(const Encoding &enc, const CMat &u) {
  const Eigen::Index d = enc.cavity.dim;
  CMat basis(d, 2);
  basis.col(0) = enc.code_zero().amplitudes();
  basis.col(1) = enc.code_one().amplitudes();
  return CMat::Identity(d, d) + basis * (u - CMat::Identity(2, 2)) * basis.adjoint();
}

void add_provenance(ExperimentResult &r, const ExperimentContext &ctx) {
  r.config_hash = ctx.config_hash;
  r.seed = ctx.seed;
  r.parameters.emplace_back("mode", to_string(ctx.mode));
  if (ctx.dim)
    r.parameters.emplace_back("dim", std::to_string(*ctx.dim));
  if (ctx.shots)
    r.parameters.emplace_back("shots", std::to_string(*ctx.shots));
  if (ctx.mode == SimMode::pulse_decoherence)
    r.parameters.emplace_back("encode_duration_ns", fmt17(ctx.encode_duration));
}

} // namespace

// ---------------------------------------------------------------------------

std::string to_string(SimMode m) {
  switch (m) {
  case SimMode::ideal:
    return "ideal";
  case SimMode::pulse:
    return "pulse";
  case SimMode::pulse_decoherence:
    return "pulse+decoherence";
  }
  return "?";
}

SimMode parse_mode(const std::string &text) {
  if (text == "ideal")
    return SimMode::ideal;
  if (text == "pulse")
    return SimMode::pulse;
  if (text == "pulse+decoherence")
    return SimMode::pulse_decoherence;
  throw DomainError("unknown mode '" + text + "' (ideal|pulse|pulse+decoherence)");
}

std::string to_string(GateKind g) {
  switch (g) {
  case GateKind::z:
    return "z";
  case GateKind::s:
    return "s";
  case GateKind::t:
    return "t";
  case GateKind::cz_coherent:
    return "cz-coherent";
  case GateKind::cz_binomial:
    return "cz-binomial";
  }
  return "?";
}

GateKind parse_gate(const std::string &text) {
  for (GateKind g : {GateKind::z, GateKind::s, GateKind::t, GateKind::cz_coherent,
                     GateKind::cz_binomial})
    if (text == to_string(g))
      return g;
  throw DomainError("unknown gate '" + text + "' (z|s|t|cz-coherent|cz-binomial)");
}

std::string config_hash(const std::string &config_text) {
  boost::uuids::detail::sha1 h;
  h.process_bytes(config_text.data(), config_text.size());
  boost::uuids::detail::sha1::digest_type d;
  h.get_digest(d);
  char buf[41];
  for (int i = 0; i < 5; ++i)
    std::snprintf(buf + 8 * i, 9, "%08x", d[i]);
  return buf;
}

std::string Table::to_csv() const {
  std::string out;
  if (!labels.empty())
    out += label_column + ",";
  for (std::size_t c = 0; c < columns.size(); ++c)
    out += (c ? "," : "") + columns[c];
  out += "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!labels.empty())
      out += labels[r] + ",";
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      out += (c ? "," : "") + fmt17(rows[r][c]);
    out += "\n";
  }
  return out;
}

bool Scalar::passed() const {
  switch (check) {
  case Check::none:
    return true;
  case Check::at_least:
    return value >= bound;
  case Check::at_most:
    return value <= bound;
  case Check::near:
    return std::abs(value - bound) <= tolerance;
  }
  return false;
}

Scalar info(std::string name, double value, std::string note) {
  return {std::move(name), value, Check::none, 0.0, 0.0, std::nullopt, std::move(note)};
}
Scalar at_least(std::string name, double value, double bound) {
  return {std::move(name), value, Check::at_least, bound, 0.0, std::nullopt, {}};
}
Scalar at_most(std::string name, double value, double bound) {
  return {std::move(name), value, Check::at_most, bound, 0.0, std::nullopt, {}};
}
Scalar near(std::string name, double value, double target, double tolerance) {
  return {std::move(name), value, Check::near, target, tolerance, std::nullopt, {}};
}

const Scalar &ExperimentResult::scalar(const std::string &n) const {
  for (const auto &s : scalars)
    if (s.name == n)
      return s;
  throw DomainError("no scalar '" + n + "' in " + name);
}

const Table &ExperimentResult::table(const std::string &n) const {
  for (const auto &t : tables)
    if (t.name == n)
      return t;
  throw DomainError("no table '" + n + "' in " + name);
}

bool ExperimentResult::passed() const {
  return std::all_of(scalars.begin(), scalars.end(), [](const Scalar &s) { return s.passed(); });
}

std::string ExperimentResult::to_json() const {
  nlohmann::ordered_json j;
  j["experiment"] = name;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  auto &p = j["parameters"] = nlohmann::ordered_json::object();
  for (const auto &[k, v] : parameters)
    p[k] = v;
  auto &s = j["summary"] = nlohmann::ordered_json::array();
  for (const auto &x : scalars) {
    nlohmann::ordered_json e;
    e["name"] = x.name;
    e["value"] = x.value;
    switch (x.check) {
    case Check::none:
      e["check"] = "none";
      break;
    case Check::at_least:
      e["check"] = ">=";
      e["bound"] = x.bound;
      break;
    case Check::at_most:
      e["check"] = "<=";
      e["bound"] = x.bound;
      break;
    case Check::near:
      e["check"] = "near";
      e["target"] = x.bound;
      e["tolerance"] = x.tolerance;
      break;
    }
    if (x.check != Check::none)
      e["passed"] = x.passed();
    if (x.measured)
      e["measured_reference"] = *x.measured;
    if (!x.note.empty())
      e["note"] = x.note;
    s.push_back(e);
  }
  auto &t = j["tables"] = nlohmann::ordered_json::array();
  for (const auto &tb : tables)
    t.push_back(tb.name);
  auto &pt = j["transfer_matrices"] = nlohmann::ordered_json::array();
  for (const auto &r : transfer_matrices)
    pt.push_back(nlohmann::ordered_json::parse(r.to_json()));
  return j.dump(2) + "\n";
}

CMat sampled_tomography(const CMat &rho, int n, const AssignmentMatrix &a, long long shots,
                             std::uint64_t seed) {
  ProbabilityTable t = tomo_probabilities(rho, n);
  for (Eigen::Index s = 0; s < t.probs.rows(); ++s) {
    RVec p = t.probs.row(s).transpose().cwiseMax(0.0);
    p /= p.sum();
    const auto counts = sample_assignment(p, a, shots, sub_seed(seed, static_cast<std::uint64_t>(s)));
    RVec f(p.size());
    for (Eigen::Index k = 0; k < f.size(); ++k)
      f(k) = static_cast<double>(counts[static_cast<std::size_t>(k)]) / static_cast<double>(shots);
    t.probs.row(s) = correct_readout(f, a, CorrectionMode::simplex).transpose();
  }
  return mle_density(t, static_cast<double>(shots));
}

// ---------------------------------------------------------------------------

std::vector<double> uniform_phis(int points) {
  if (points < 1)
    throw DomainError("uniform_phis: need at least one point");
  std::vector<double> v;
  for (int i = 0; i < points; ++i)
    v.push_back(2 * kPi * i / points);
  return v;
}

ExperimentResult run_parity_sweep(double delta, const std::vector<double> &phis,
                                  const ExperimentContext &ctx, double alpha) {
  const Layers layers = layers_for(ctx.mode);
  const int d = cavity_dim(ctx, 30);
  const Encoding enc = cat_encoding(alpha, d, CatVariant::shifted);
  const SystemLayout layout({"Q1"}, {{"S1", d}});
  const auto &sp = layout.space();
  const Ket prep = tensor(Ket(CompositeSpace{ModeSpec::qubit()}, CVec::Unit(2, 0)),
                          code_ket(enc, 1.0, 1.0));
  const CMat disp = embed(displacement(-alpha * std::exp(I_UNIT * delta), enc.cavity), 1, sp).matrix();
  const CMat parity = embed(parity_op(enc.cavity), 1, sp).matrix();
  SingleCavityOptions opt;
  opt.alpha = alpha;
  const CollapseSet collapses =
      layers.decoherence ? standard_collapses(ctx.params, layout) : CollapseSet{};

  ExperimentResult r;
  r.name = "parity_sweep";
  add_provenance(r, ctx);
  r.parameters.emplace_back("delta", fmt17(delta));
  r.parameters.emplace_back("alpha", fmt17(alpha));
  r.parameters.emplace_back("points", std::to_string(phis.size()));
  Table t{"parity", {"phi", "parity", "cos_pi_plus_phi", "deviation"}, {}};
  double worst = 0.0;
  for (double phi : phis) {
    const GateSpec g = single_cavity_phase_gate(phi, enc, ctx.params, opt);
    // The free evolution over the gate (dispersive frame, self-Kerr) is a
    // known diagonal phase; it is undone before the recombining displacement.
    const CMat frame =
        disp * realize_unitary(g, ctx.params, layout, layers.backend, {true}).matrix().adjoint();
    double p = 0.0;
    if (!layers.decoherence) {
      CVec out = realize(g, ctx.params, layout, layers.backend, prep.amplitudes()).col(0);
      out = frame * out;
      p = out.dot(parity * out).real();
    } else {
      DensityOp rho = realize(g, ctx.params, layout, layers.backend, DensityOp::from_ket(prep),
                              collapses);
      const CMat m = frame * rho.matrix() * frame.adjoint();
      p = (parity * m).trace().real();
    }
    const double law = std::cos(kPi + phi);
    worst = std::max(worst, std::abs(p - law));
    t.rows.push_back({phi, p, law, p - law});
  }
  r.tables.push_back(std::move(t));
  if (delta != 0.0)
    r.scalars.push_back(info("max_deviation_from_cos_law", worst, "cos law applies to delta = 0"));
  else if (ctx.mode == SimMode::ideal)
    r.scalars.push_back(at_most("max_deviation_from_cos_law", worst, 1e-6));
  else if (ctx.mode == SimMode::pulse)
    r.scalars.push_back(at_most("max_deviation_from_cos_law", worst, 0.05));
  else
    r.scalars.push_back(info("max_deviation_from_cos_law", worst));
  return r;
}

ExperimentResult run_zgate_repetition(int m_max, const ExperimentContext &ctx) {
  if (m_max < 1)
    throw DomainError("zgate repetition needs m_max >= 1");
  const Layers layers = layers_for(ctx.mode);
  GateSetup setup = make_gate(GateKind::z, ctx, layers);
  Sequence seq(ctx, setup.frame, layers);
  const int n = 1;
  const auto inputs = qpt_input_states(n);

  ExperimentResult r;
  r.name = "zgate_repetition";
  add_provenance(r, ctx);
  r.parameters.emplace_back("m_max", std::to_string(m_max));
  Table t{"fidelity_vs_m", {"m", "process_fidelity"}, {}};
  std::vector<double> ms, fs;
  for (int m = 0; m <= m_max; ++m) {
    const auto outs = measure(seq.outputs(repeat(setup.gates, m), inputs), n, ctx,
                              static_cast<std::uint64_t>(m));
    CMat target = CMat::Identity(2, 2);
    if (m % 2)
      target = setup.target;
    const double f = process_fidelity(ptm_from_outputs(n, outs), ideal_ptm(target));
    ms.push_back(m);
    fs.push_back(f);
    t.rows.push_back({static_cast<double>(m), f});
  }
  // Least-squares line.
  const double k = static_cast<double>(ms.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    mx += ms[i] / k;
    my += fs[i] / k;
  }
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    sxx += (ms[i] - mx) * (ms[i] - mx);
    sxy += (ms[i] - mx) * (fs[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < ms.size(); ++i)
    sse += std::pow(fs[i] - intercept - slope * ms[i], 2);
  const double slope_err = ms.size() > 2 ? std::sqrt(sse / (k - 2) / sxx) : 0.0;
  const double intercept_err = ms.size() > 2 ? slope_err * std::sqrt(sxx / k + mx * mx) : 0.0;

  r.tables.push_back(std::move(t));
  const double fz_fit = 1.0 + slope;
  const double fz_pair = 1.0 - (fs[0] - fs[1]);
  Scalar s_slope = info("slope", slope), s_int = info("intercept_F_ED", intercept);
  s_int.measured = 0.969;
  if (ctx.mode == SimMode::ideal && !ctx.shots) {
    s_slope = near("slope", slope, 0.0, 1e-8);
    s_int = near("intercept_F_ED", intercept, 1.0, 1e-8);
  }
  r.scalars.push_back(s_slope);
  r.scalars.push_back(info("slope_std_error", slope_err));
  r.scalars.push_back(s_int);
  r.scalars.push_back(info("intercept_std_error", intercept_err));
  Scalar fz = info("F_Z_from_fit", fz_fit);
  fz.measured = 0.987;
  r.scalars.push_back(fz);
  Scalar fzp = info("F_Z_from_m0_m1", fz_pair, "1 - (F(0) - F(1))");
  fzp.measured = 0.987;
  r.scalars.push_back(fzp);
  // The two estimates agree to within the fit's own scatter (plus the
  // curvature a linear fit cannot absorb over m_max gates).
  r.scalars.push_back(near("F_Z_consistency", fz_pair, fz_fit,
                           std::max(3.0 * (slope_err + intercept_err), 1e-9) +
                               std::abs(slope) * std::abs(slope) * m_max));
  return r;
}

ExperimentResult run_qpt(GateKind gate, const ExperimentContext &ctx) {
  const Layers layers = layers_for(ctx.mode);
  GateSetup setup = make_gate(gate, ctx, layers);
  const QptFidelities q = qpt_pair(setup, ctx, layers, 0);

  ExperimentResult r;
  r.name = "qpt_" + to_string(gate);
  add_provenance(r, ctx);
  r.parameters.emplace_back("gate", to_string(gate));
  r.parameters.emplace_back("gate_duration_ns", fmt17(setup.gates.front().duration()));
  r.tables.push_back(ptm_table("ptm_gate", q.gate_ed));
  r.tables.push_back(ptm_table("ptm_ideal", ideal_ptm(setup.target)));
  r.tables.push_back(ptm_table("ptm_encode_decode", q.ed));
  r.transfer_matrices = {q.gate_ed, ideal_ptm(setup.target), q.ed};

  Scalar fge = info("F_gate_ED", q.f_gate_ed);
  if (ctx.mode == SimMode::ideal && !ctx.shots)
    fge = near("F_gate_ED", q.f_gate_ed, 1.0, 1e-8);
  else if (ctx.mode == SimMode::pulse && !ctx.shots) {
    if (gate == GateKind::cz_coherent)
      fge = at_least("F_gate_ED", q.f_gate_ed, 0.98);
    else if (gate == GateKind::cz_binomial)
      fge = at_least("F_gate_ED", q.f_gate_ed, 0.95);
  }
  fge.measured = setup.ref_gate_ed;
  Scalar fed = info("F_ED", q.f_ed);
  fed.measured = setup.ref_ed;
  Scalar fg = info("F_gate", 1.0 - (q.f_ed - q.f_gate_ed), "1 - (F_ED - F_gate_ED)");
  fg.measured = setup.ref_gate;
  r.scalars.push_back(fge);
  r.scalars.push_back(fed);
  r.scalars.push_back(fg);
  if (gate == GateKind::cz_binomial && layers.backend == Backend::pulse) {
    r.scalars.push_back(info("tone_solve_residual", setup.tones.residual_norm));
    r.scalars.push_back(info("tone_solve_converged", setup.tones.converged ? 1.0 : 0.0));
  }
  return r;
}

ExperimentResult run_bell_generation(BellEncoding encoding, const ExperimentContext &ctx,
                                     const GridAxis &axis) {
  const Layers layers = layers_for(ctx.mode);
  GateSetup setup = make_gate(
      encoding == BellEncoding::binomial ? GateKind::cz_binomial : GateKind::cz_coherent, ctx,
      layers);
  Sequence seq(ctx, setup.frame, layers);
  const auto &frame = seq.frame();
  const auto &layout = frame.layout();
  const auto &sp = layout.space();

  CVec plusplus = CVec::Constant(4, 0.5);
  DensityOp phys = seq.physical(repeat(setup.gates, 1), plusplus);
  const CMat rho_l = frame.logical_density(phys.matrix());

  // Hadamard-equivalent X H on the second logical qubit.
  CMat xh(2, 2);
  xh << 1, -1, 1, 1;
  xh /= std::sqrt(2.0);
  CMat v = CMat::Zero(4, 4);
  v.block(0, 0, 2, 2) = xh;
  v.block(2, 2, 2, 2) = xh;
  const CMat bell_l = v * rho_l * v.adjoint();
  CVec phi_plus = CVec::Zero(4);
  phi_plus(1) = phi_plus(2) = 1.0 / std::sqrt(2.0);
  const double fid = phi_plus.dot(bell_l * phi_plus).real();

  // Physical Bell state: same rotation as a code-space unitary on cavity 2.
  const CMat u2 = embed(LinearOp(CompositeSpace{frame.codes()[1].cavity},
                                 code_space_unitary(frame.codes()[1], xh)),
                        2, sp)
                      .matrix();
  const DensityOp bell_phys(sp, u2 * phys.matrix() * u2.adjoint());
  const CMat cav = cavity_pair_state(bell_phys, layout);

  ExperimentResult r;
  r.name = std::string("bell_") + (encoding == BellEncoding::binomial ? "binomial" : "coherent");
  add_provenance(r, ctx);
  Scalar f = info("bell_fidelity", fid);
  if (ctx.mode == SimMode::ideal)
    f = near("bell_fidelity", fid, 1.0, 1e-8);
  else if (ctx.mode == SimMode::pulse)
    f = at_least("bell_fidelity", fid, 0.95);
  if (encoding == BellEncoding::binomial)
    f.measured = 0.861;
  r.scalars.push_back(f);
  r.scalars.push_back(info("logical_trace", bell_l.trace().real()));
  // Reduced logical qubit purities (1/2 for a Bell state).
  CMat red1 = CMat::Zero(2, 2), red2 = CMat::Zero(2, 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        red1(a, b) += bell_l(2 * a + c, 2 * b + c);
        red2(a, b) += bell_l(2 * c + a, 2 * c + b);
      }
  r.scalars.push_back(info("logical_purity_1", purity(red1)));
  r.scalars.push_back(info("logical_purity_2", purity(red2)));
  const std::size_t k1[] = {1}, k2[] = {2};
  r.scalars.push_back(info("cavity_purity_S1", partial_trace(bell_phys, k1).purity()));
  r.scalars.push_back(info("cavity_purity_S2", partial_trace(bell_phys, k2).purity()));

  if (encoding == BellEncoding::coherent) {
    // Entangled cat structure right after the CZ.
    const Encoding &cat = frame.codes()[0];
    const CVec a = cat.zero.amplitudes(), m = cat.one.amplitudes();
    auto kron = [](const CVec &x, const CVec &y) {
      CVec out(x.size() * y.size());
      for (Eigen::Index i = 0; i < x.size(); ++i)
        out.segment(i * y.size(), y.size()) = x(i) * y;
      return out;
    };
    CVec psi1 = kron(a, a) + kron(a, m) + kron(m, a) - kron(m, m);
    psi1.normalize();
    const CMat cav_cz = cavity_pair_state(phys, layout);
    r.scalars.push_back(info("psi1_fidelity", psi1.dot(cav_cz * psi1).real(),
                             "(|aa> + |a,-a> + |-a,a> - |-a,-a>)/2 after the CZ"));
  }

  const DensityOp cav_op(CompositeSpace{layout.space()[1], layout.space()[2]}, cav);
  const SystemLayout pair({}, {{layout.cavities()[0], sp.dim(1)}, {layout.cavities()[1], sp.dim(2)}});
  r.tables.push_back(grid_table(
      "joint_wigner_re_re", joint_wigner_cut(cav_op, pair, pair.cavities()[0], pair.cavities()[1],
                                             JointCut::real, axis)));
  r.tables.push_back(grid_table(
      "joint_wigner_im_im", joint_wigner_cut(cav_op, pair, pair.cavities()[0], pair.cavities()[1],
                                             JointCut::imag, axis)));
  Table dm{"logical_density", {"row", "col", "re", "im"}, {}};
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      dm.rows.push_back({double(i), double(j), bell_l(i, j).real(), bell_l(i, j).imag()});
  r.tables.push_back(std::move(dm));
  return r;
}

ExperimentResult run_error_budget(GateKind gate, const ExperimentContext &ctx) {
  if (gate == GateKind::s || gate == GateKind::t)
    gate = GateKind::z; // identical sequence up to the second rotation axis

  ExperimentResult r;
  r.name = "error_budget_" + to_string(gate);
  add_provenance(r, ctx);

  auto fidelity = [&](Layers layers, bool with_gate) {
    GateSetup s = make_gate(gate, ctx, layers);
    Sequence seq(ctx, s.frame, layers);
    const int n = seq.n_logical();
    const auto inputs = qpt_input_states(n);
    const auto outs = seq.outputs(with_gate ? repeat(s.gates, 1) : std::vector<const GateSpec *>{},
                                  inputs);
    const CMat target = with_gate ? s.target : CMat::Identity(s.target.rows(), s.target.cols());
    return process_fidelity(ptm_from_outputs(n, outs), ideal_ptm(target));
  };

  GateSetup ref = make_gate(gate, ctx, {});
  const double t_gate = ref.gates.front().duration();
  const std::string q = ref.frame.layout().qubits().front();
  const double estimate = t_gate / (2.0 * ctx.params.mode(q).t1);
  r.parameters.emplace_back("gate_duration_ns", fmt17(t_gate));
  r.parameters.emplace_back("encode_duration_ns", fmt17(ctx.encode_duration));

  const double f_all_off = fidelity({Backend::ideal, false}, true);
  r.scalars.push_back(at_most("infidelity_all_sources_off", 1.0 - f_all_off, 1e-6));

  // Master-equation rows need a density matrix of manageable size.
  const Eigen::Index dim = ref.frame.layout().space().total_dim();
  const bool me = dim <= LindbladOptions{}.max_dim;

  double e_ed = std::nan(""), e_dec = std::nan(""), total = std::nan("");
  const double e_sel = 1.0 - fidelity({Backend::pulse, false, 0.0}, true);
  const double e_kerr = (1.0 - fidelity({Backend::pulse, false, 1.0}, true)) - e_sel;
  if (me) {
    e_ed = 1.0 - fidelity({Backend::ideal, true, 1.0, true}, false);
    e_dec = (1.0 - fidelity({Backend::ideal, true, 1.0, false}, true)) - (1.0 - f_all_off);
    total = 1.0 - fidelity({Backend::pulse, true, 1.0, true}, true);
  }
  const double e_num = std::nan("");

  struct MeasuredRow {
    double z, coh, bin;
  };
  const std::vector<std::tuple<std::string, double, MeasuredRow>> rows{
      {"encoding_decoding", e_ed, {0.03, 0.05, 0.08}},
      {"relaxation_dephasing", e_dec, {0.01, 0.02, 0.04}},
      {"selectivity", e_sel, {0.01, 0.06, 0.03}},
      {"numerical_optimization", e_num, {std::nan(""), std::nan(""), 0.01}},
      {"kerr", e_kerr, {0.01, 0.03, 0.01}},
  };
  Table t{"budget", {"infidelity", "measured"}, {}};
  t.label_column = "source";
  double sum = 0.0;
  for (const auto &[name, v, measured] : rows) {
    const double pv = gate == GateKind::z ? measured.z
                      : gate == GateKind::cz_coherent ? measured.coh
                                                       : measured.bin;
    t.labels.push_back(name);
    t.rows.push_back({v, pv});
    if (!std::isnan(v))
      sum += v;
  }
  const double ref_total = gate == GateKind::z ? 0.04 : 0.16;
  t.labels.push_back("sum_of_rows");
  t.rows.push_back({sum, std::nan("")});
  t.labels.push_back("joint_total");
  t.rows.push_back({total, ref_total});
  r.tables.push_back(std::move(t));

  r.scalars.push_back(info("relaxation_estimate_Tgate_over_2T1", estimate));
  if (me) {
    const double ratio = e_dec / estimate;
    r.scalars.push_back(at_least("relaxation_over_estimate", ratio, 0.5));
    r.scalars.push_back(at_most("relaxation_over_estimate_upper", ratio, 2.0));
    Scalar tot = info("joint_total", total);
    tot.measured = ref_total;
    r.scalars.push_back(tot);
    r.scalars.push_back(info("sum_of_rows", sum));
    r.scalars.push_back(at_most("sum_vs_total_relative", std::abs(sum - total) / total, 0.2));
  } else {
    r.scalars.push_back(info("sum_of_rows", sum,
                             "master-equation rows skipped: joint dimension exceeds the "
                             "Lindblad limit; reduce --dim"));
  }
  return r;
}

ExperimentResult run_snap_bell(int sign, const ExperimentContext &ctx, const GridAxis &axis) {
  if (sign != 1 && sign != -1)
    throw DomainError("snap-bell sign must be +1 or -1");
  const Layers layers = layers_for(ctx.mode);
  const int d = cavity_dim(ctx, 8);
  const SystemLayout layout({"Q3"}, {{"S1", d}, {"S2", d}});
  const auto &sp = layout.space();
  const GateSpec g = snap_bell(sign, ctx.params);
  const int vac[] = {0, 0, 0};
  const Ket start = basis_ket(sp, vac);
  DensityOp out = DensityOp::from_ket(start);
  if (!layers.decoherence) {
    const CVec v = realize(g, ctx.params, layout, layers.backend, start.amplitudes()).col(0);
    out = DensityOp(sp, v * v.adjoint());
  } else {
    out = realize(g, ctx.params, layout, layers.backend, out,
                  standard_collapses(ctx.params, layout));
  }
  const CMat cav = cavity_pair_state(out, layout);
  auto target = [&](int s) {
    CVec t = CVec::Zero(d * d);
    t(0 * d + 1) = 1.0 / std::sqrt(2.0);
    t(1 * d + 0) = s / std::sqrt(2.0);
    return t;
  };
  const CVec tp = target(sign), tm = target(-sign);
  const double fid = tp.dot(cav * tp).real();
  const double cross = tm.dot(cav * tm).real();
  const std::size_t k1[] = {1}, k2[] = {2};
  const DensityOp r1 = partial_trace(out, k1), r2 = partial_trace(out, k2);

  ExperimentResult r;
  r.name = std::string("snap_bell_") + (sign > 0 ? "plus" : "minus");
  add_provenance(r, ctx);
  r.parameters.emplace_back("sign", std::to_string(sign));
  r.parameters.emplace_back("gate_duration_ns", fmt17(g.duration()));
  Scalar f = info("bell_fidelity", fid);
  if (ctx.mode == SimMode::ideal)
    f = at_least("bell_fidelity", fid, 0.95);
  f.measured = sign > 0 ? 0.933 : 0.923;
  r.scalars.push_back(f);
  r.scalars.push_back(ctx.mode == SimMode::ideal ? at_most("cross_fidelity", cross, 0.05)
                                                 : info("cross_fidelity", cross));
  r.scalars.push_back(ctx.mode == SimMode::ideal ? at_most("purity_S1", r1.purity(), 0.55)
                                                 : info("purity_S1", r1.purity()));
  r.scalars.push_back(ctx.mode == SimMode::ideal ? at_most("purity_S2", r2.purity(), 0.55)
                                                 : info("purity_S2", r2.purity()));

  const DensityOp cav_op(CompositeSpace{sp[1], sp[2]}, cav);
  const SystemLayout pair({}, {{"S1", d}, {"S2", d}});
  r.tables.push_back(
      grid_table("joint_wigner_re_re", joint_wigner_cut(cav_op, pair, "S1", "S2", JointCut::real, axis)));
  r.tables.push_back(
      grid_table("joint_wigner_im_im", joint_wigner_cut(cav_op, pair, "S1", "S2", JointCut::imag, axis)));
  r.tables.push_back(grid_table("wigner_S1", wigner_grid(r1, axis, axis)));
  r.tables.push_back(grid_table("wigner_S2", wigner_grid(r2, axis, axis)));
  return r;
}

} // namespace geophase
