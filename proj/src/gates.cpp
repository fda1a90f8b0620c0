#include "geophase/gates.hpp"

#include "geophase/diagnostics.hpp"

#include <json.hpp>
#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace geophase {

namespace {

constexpr double kPi = std::numbers::pi;

template <class... Ts> struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

std::size_t sample_count(double duration, double dt) {
  const double n = std::round(duration / dt);
  if (!(duration > 0.0) || std::abs(n * dt - duration) > 1e-9 * std::max(1.0, duration))
    throw DomainError("gate step duration must be a positive multiple of dt");
  return static_cast<std::size_t>(n);
}

double quantized_duration(double raw, double dt) {
  return dt * std::max(1.0, std::ceil(raw / dt - 1e-9));
}

double envelope_area(const std::vector<double> &env, double dt) {
  double a = 0.0;
  for (double e : env)
    a += e;
  return a * dt;
}

LinearOp condition_projector(const std::vector<FockCondition> &condition,
                             const SystemLayout &layout) {
  if (condition.empty())
    return identity(layout.space());
  return fock_projector(layout, condition);
}

// Exact 2x2 propagator exp(-i H tau) for hermitian H.
Eigen::Matrix2cd exp2(const Eigen::Matrix2cd &h, double tau) {
  const double a = h(0, 0).real(), d = h(1, 1).real();
  const double mean = 0.5 * (a + d), delta = 0.5 * (a - d);
  const double w = std::sqrt(delta * delta + std::norm(h(0, 1)));
  Eigen::Matrix2cd u = Eigen::Matrix2cd::Identity() * std::cos(w * tau);
  if (w > 0.0) {
    Eigen::Matrix2cd k = h;
    k(0, 0) = delta;
    k(1, 1) = -delta;
    u -= I_UNIT * (std::sin(w * tau) / w) * k;
  }
  return std::exp(-I_UNIT * mean * tau) * u;
}

void apply_diagonal_phases(const RVec &energies, double t, CMat &states) {
  for (Eigen::Index i = 0; i < states.rows(); ++i)
    states.row(i) *= std::exp(-I_UNIT * energies(i) * t);
}

LinearOp ideal_rotation_hamiltonian(const RotationStep &r, const GateSpec &spec,
                                    const SystemLayout &layout) {
  return effective_conditional_drive(r.theta / r.duration, r.phi,
                                     condition_projector(r.condition, layout), layout,
                                     spec.qubit);
}

LinearOp ideal_multitone_hamiltonian(const MultitoneStep &m, const GateSpec &spec,
                                     const SystemLayout &layout) {
  CMat h = CMat::Zero(layout.space().total_dim(), layout.space().total_dim());
  for (const auto &tone : m.tones)
    h += effective_conditional_drive(std::abs(tone.area) / m.duration, std::arg(tone.area),
                                     fock_projector(layout, {tone.fock}), layout, spec.qubit)
             .matrix();
  return {layout.space(), h};
}

nlohmann::json fock_to_json(const FockCondition &f) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto &[k, v] : f)
    j[k] = v;
  return j;
}

FockCondition fock_from_json(const nlohmann::json &j) {
  FockCondition f;
  for (auto it = j.begin(); it != j.end(); ++it)
    f[it.key()] = it.value().get<int>();
  return f;
}

} // namespace

double wrap_phase(double x) {
  double y = std::remainder(x, 2.0 * kPi);
  if (y <= -kPi)
    y += 2.0 * kPi;
  return y;
}

double GateSpec::duration() const {
  double t = 0.0;
  for (const auto &s : steps)
    std::visit(overloaded{[](const DisplacementStep &) {},
                          [&](const RotationStep &r) { t += r.duration; },
                          [&](const WaitStep &w) { t += w.duration; },
                          [&](const MultitoneStep &m) { t += m.duration; }},
               s);
  return t;
}

std::string GateSpec::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["qubit"] = qubit;
  j["cavities"] = cavities;
  j["dt_ns"] = dt;
  j["rise_sigma_samples"] = rise_sigma;
  j["steps"] = nlohmann::json::array();
  for (const auto &s : steps) {
    nlohmann::json js;
    std::visit(overloaded{
                   [&](const DisplacementStep &d) {
                     js["type"] = "displacement";
                     js["alphas"] = nlohmann::json::array();
                     for (const auto &[label, a] : d.alphas)
                       js["alphas"].push_back({{"label", label}, {"re", a.real()}, {"im", a.imag()}});
                   },
                   [&](const RotationStep &r) {
                     js["type"] = "conditional_rotation";
                     js["theta"] = r.theta;
                     js["phi"] = r.phi;
                     js["duration_ns"] = r.duration;
                     js["condition"] = nlohmann::json::array();
                     for (const auto &c : r.condition)
                       js["condition"].push_back(fock_to_json(c));
                     if (r.detuning)
                       js["detuning_rad_per_ns"] = *r.detuning;
                   },
                   [&](const WaitStep &w) {
                     js["type"] = "wait";
                     js["duration_ns"] = w.duration;
                   },
                   [&](const MultitoneStep &m) {
                     js["type"] = "multitone";
                     js["duration_ns"] = m.duration;
                     js["tones"] = nlohmann::json::array();
                     for (const auto &t : m.tones)
                       js["tones"].push_back({{"fock", fock_to_json(t.fock)},
                                              {"re", t.area.real()},
                                              {"im", t.area.imag()}});
                   }},
               s);
    j["steps"].push_back(js);
  }
  return j.dump(1);
}

GateSpec GateSpec::from_json(const std::string &text) {
  try {
    const auto j = nlohmann::json::parse(text);
    GateSpec g;
    g.name = j.at("name").get<std::string>();
    g.qubit = j.at("qubit").get<std::string>();
    g.cavities = j.at("cavities").get<std::vector<std::string>>();
    g.dt = j.at("dt_ns").get<double>();
    g.rise_sigma = j.at("rise_sigma_samples").get<double>();
    for (const auto &js : j.at("steps")) {
      const auto type = js.at("type").get<std::string>();
      if (type == "displacement") {
        DisplacementStep d;
        for (const auto &a : js.at("alphas"))
          d.alphas.emplace_back(a.at("label").get<std::string>(),
                                cplx(a.at("re").get<double>(), a.at("im").get<double>()));
        g.steps.emplace_back(d);
      } else if (type == "conditional_rotation") {
        RotationStep r;
        r.theta = js.at("theta").get<double>();
        r.phi = js.at("phi").get<double>();
        r.duration = js.at("duration_ns").get<double>();
        for (const auto &c : js.at("condition"))
          r.condition.push_back(fock_from_json(c));
        if (js.contains("detuning_rad_per_ns"))
          r.detuning = js.at("detuning_rad_per_ns").get<double>();
        g.steps.emplace_back(r);
      } else if (type == "wait") {
        g.steps.emplace_back(WaitStep{js.at("duration_ns").get<double>()});
      } else if (type == "multitone") {
        MultitoneStep m;
        m.duration = js.at("duration_ns").get<double>();
        for (const auto &t : js.at("tones"))
          m.tones.push_back({fock_from_json(t.at("fock")),
                             cplx(t.at("re").get<double>(), t.at("im").get<double>())});
        g.steps.emplace_back(m);
      } else {
        throw DomainError("gate JSON: unknown step type '" + type + "'");
      }
    }
    return g;
  } catch (const nlohmann::json::exception &e) {
    throw DomainError(std::string("gate JSON: ") + e.what());
  }
}

std::vector<double> flattop_envelope(std::size_t samples, double sigma) {
  if (!(sigma > 0.0))
    throw DomainError("flattop_envelope: sigma must be positive");
  std::vector<double> env(samples);
  const double n = static_cast<double>(samples);
  const double edge = 2.0 * sigma;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) + 0.5;
    double x = 0.0;
    if (n < 2.0 * edge)
      x = t - 0.5 * n;
    else if (t < edge)
      x = t - edge;
    else if (t > n - edge)
      x = t - (n - edge);
    env[k] = std::exp(-x * x / (2.0 * sigma * sigma));
  }
  return env;
}

double transition_shift(const DeviceParams &params, const std::string &qubit,
                        const FockCondition &fock) {
  double s = 0.0;
  for (const auto &[label, n] : fock)
    s -= params.coupling(qubit, label) * n;
  return s;
}

PulseSequence step_pulse(const RotationStep &step, double t0, const GateSpec &spec,
                         const DeviceParams &params) {
  const std::size_t n = sample_count(step.duration, spec.dt);
  const auto env = flattop_envelope(n, spec.rise_sigma);
  const double peak = step.theta / envelope_area(env, spec.dt);
  double detuning = 0.0;
  if (step.detuning)
    detuning = *step.detuning;
  else if (step.condition.size() == 1)
    detuning = transition_shift(params, spec.qubit, step.condition.front());
  std::vector<cplx> u(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + (static_cast<double>(k) + 0.5) * spec.dt;
    u[k] = peak * env[k] * std::exp(I_UNIT * (step.phi - detuning * t));
  }
  PulseSequence p(spec.dt);
  p.add_channel({spec.qubit, DriveKind::qubit}, std::move(u));
  return p;
}

PulseSequence step_pulse(const MultitoneStep &step, double t0, const GateSpec &spec,
                         const DeviceParams &params) {
  const std::size_t n = sample_count(step.duration, spec.dt);
  const auto env = flattop_envelope(n, spec.rise_sigma);
  const double norm = 1.0 / envelope_area(env, spec.dt);
  std::vector<cplx> u(n, cplx(0.0));
  for (const auto &tone : step.tones) {
    const double detuning = transition_shift(params, spec.qubit, tone.fock);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = t0 + (static_cast<double>(k) + 0.5) * spec.dt;
      u[k] += tone.area * norm * env[k] * std::exp(-I_UNIT * detuning * t);
    }
  }
  PulseSequence p(spec.dt);
  p.add_channel({spec.qubit, DriveKind::qubit}, std::move(u));
  return p;
}

SystemLayout gate_layout(const GateSpec &spec, const std::map<std::string, int> &dims) {
  std::vector<std::pair<std::string, int>> cav;
  for (const auto &c : spec.cavities) {
    auto it = dims.find(c);
    if (it == dims.end())
      throw DomainError("gate_layout: no truncation given for " + c);
    cav.emplace_back(c, it->second);
  }
  return SystemLayout({spec.qubit}, cav);
}

CMat realize(const GateSpec &spec, const DeviceParams &params, const SystemLayout &layout,
             Backend backend, const CMat &states, const RealizeOptions &options) {
  if (states.rows() != layout.space().total_dim())
    throw DomainError("realize: state dimension mismatch");
  const auto &sp = layout.space();
  const RVec energies = backend == Backend::pulse ? static_energies(params, layout) : RVec();
  std::optional<LinearOp> h0;
  if (backend == Backend::pulse)
    h0.emplace(sp, CMat(energies.cast<cplx>().asDiagonal()));
  CMat out = states;
  double t = 0.0;
  for (const auto &s : spec.steps) {
    std::visit(
        overloaded{
            [&](const DisplacementStep &d) {
              for (const auto &[label, alpha] : d.alphas) {
                const auto idx = layout.index(label);
                const CMat dm = displacement(alpha, sp[idx]).matrix();
                for (Eigen::Index c = 0; c < out.cols(); ++c)
                  out.col(c) = apply_local(dm, idx, sp, out.col(c));
              }
            },
            [&](const RotationStep &r) {
              if (backend == Backend::ideal) {
                if (!options.drive_off)
                  out = apply_propagator(ideal_rotation_hamiltonian(r, spec, layout), r.duration, out);
              } else if (options.drive_off) {
                apply_diagonal_phases(energies, r.duration, out);
              } else {
                out = evolve_pulse(out, *h0, step_pulse(r, t, spec, params), layout);
              }
              t += r.duration;
            },
            [&](const WaitStep &w) {
              if (backend == Backend::pulse)
                apply_diagonal_phases(energies, w.duration, out);
              t += w.duration;
            },
            [&](const MultitoneStep &m) {
              if (backend == Backend::ideal) {
                if (!options.drive_off)
                  out = apply_propagator(ideal_multitone_hamiltonian(m, spec, layout), m.duration, out);
              } else if (options.drive_off) {
                apply_diagonal_phases(energies, m.duration, out);
              } else {
                out = evolve_pulse(out, *h0, step_pulse(m, t, spec, params), layout);
              }
              t += m.duration;
            }},
        s);
  }
  return out;
}

LinearOp realize_unitary(const GateSpec &spec, const DeviceParams &params,
                         const SystemLayout &layout, Backend backend,
                         const RealizeOptions &options) {
  const auto n = layout.space().total_dim();
  return {layout.space(), realize(spec, params, layout, backend, CMat::Identity(n, n), options)};
}

DensityOp realize(const GateSpec &spec, const DeviceParams &params, const SystemLayout &layout,
                  Backend backend, const DensityOp &rho, const CollapseSet &collapses,
                  const LindbladOptions &lindblad) {
  const auto &sp = layout.space();
  if (!(rho.space() == sp))
    throw DomainError("realize: density operator space mismatch");
  const LinearOp zero(sp, CMat::Zero(sp.total_dim(), sp.total_dim()));
  const LinearOp h0 = backend == Backend::pulse ? static_hamiltonian(params, layout) : zero;
  DensityOp out = rho;
  double t = 0.0;
  for (const auto &s : spec.steps) {
    std::visit(
        overloaded{
            [&](const DisplacementStep &d) {
              for (const auto &[label, alpha] : d.alphas) {
                const auto idx = layout.index(label);
                const LinearOp dj = embed(displacement(alpha, sp[idx]), idx, sp);
                out = DensityOp(sp, dj.matrix() * out.matrix() * dj.matrix().adjoint());
              }
            },
            [&](const RotationStep &r) {
              if (backend == Backend::ideal)
                out = lindblad_evolve(out, ideal_rotation_hamiltonian(r, spec, layout), collapses,
                                      r.duration, lindblad);
              else
                out = lindblad_evolve(out, h0, step_pulse(r, t, spec, params), layout, collapses,
                                      lindblad);
              t += r.duration;
            },
            [&](const WaitStep &w) {
              out = lindblad_evolve(out, h0, collapses, w.duration, lindblad);
              t += w.duration;
            },
            [&](const MultitoneStep &m) {
              if (backend == Backend::ideal)
                out = lindblad_evolve(out, ideal_multitone_hamiltonian(m, spec, layout), collapses,
                                      m.duration, lindblad);
              else
                out = lindblad_evolve(out, h0, step_pulse(m, t, spec, params), layout, collapses,
                                      lindblad);
              t += m.duration;
            }},
        s);
  }
  return out;
}

void check_selectivity(double epsilon, double nbar, double chi) {
  const double gap = nbar * chi;
  if (!(epsilon > 0.0))
    throw DomainError("conditional rotation: epsilon must be positive");
  if (epsilon > gap / 3.0)
    throw DomainError("conditional rotation: epsilon exceeds n̄ chi / 3, drive is not selective");
  if (epsilon > gap / 10.0 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "conditional rotation: epsilon = " << epsilon / gap
       << " n̄ chi is above n̄ chi / 10; expect off-condition excitation";
    warn(os.str());
  }
}

ConditionalRotation conditional_rotation(double phi, double theta,
                                         const std::vector<FockCondition> &condition,
                                         double epsilon, double nbar, double chi,
                                         const SystemLayout &layout, const std::string &qubit,
                                         double dt) {
  check_selectivity(epsilon, nbar, chi);
  RotationStep step;
  step.theta = theta;
  step.phi = phi;
  step.condition = condition;
  step.duration = quantized_duration(std::abs(theta) / epsilon, dt);
  GateSpec holder;
  holder.qubit = qubit;
  LinearOp h = ideal_rotation_hamiltonian(step, holder, layout);
  return {step, LinearOp(layout.space(), expm_hermitian(h.matrix(), step.duration))};
}

GateSpec single_cavity_phase_gate(double delta_phi, const DeviceParams &params,
                                  const SingleCavityOptions &o) {
  const double nbar = std::norm(2.0 * o.alpha);
  const double chi = params.coupling(o.qubit, o.cavity);
  if (!(chi > 0.0))
    throw DomainError("single_cavity_phase_gate: " + o.qubit + " and " + o.cavity +
                      " are not dispersively coupled");
  const double eps = o.epsilon.value_or(nbar * chi / 20.0);
  check_selectivity(eps, nbar, chi);
  GateSpec g;
  g.name = "phase";
  g.qubit = o.qubit;
  g.cavities = {o.cavity};
  g.dt = o.dt;
  const double dur = quantized_duration(kPi / eps, o.dt);
  const FockCondition vac{{o.cavity, 0}};
  g.steps.emplace_back(RotationStep{kPi, 0.0, dur, {vac}, std::nullopt});
  g.steps.emplace_back(RotationStep{kPi, -delta_phi, dur, {vac}, std::nullopt});
  return g;
}

GateSpec single_cavity_phase_gate(double delta_phi, const Encoding &enc,
                                  const DeviceParams &params, const SingleCavityOptions &o) {
  if (enc.name != "shifted-cat")
    throw DomainError("single_cavity_phase_gate: requires the shifted cat encoding, got " +
                      enc.name);
  return single_cavity_phase_gate(delta_phi, params, o);
}

GateSpec cz_coherent(const DeviceParams &params, const TwoCavityOptions &o) {
  const double nbar = std::norm(2.0 * o.alpha);
  const double chi =
      std::min(params.coupling(o.qubit, o.cavity1), params.coupling(o.qubit, o.cavity2));
  if (!(chi > 0.0))
    throw DomainError("cz_coherent: " + o.qubit + " must couple to both cavities");
  const double eps = o.epsilon.value_or(nbar * chi / 20.0);
  check_selectivity(eps, nbar, chi);
  GateSpec g;
  g.name = "cz-coherent";
  g.qubit = o.qubit;
  g.cavities = {o.cavity1, o.cavity2};
  g.dt = o.dt;
  g.steps.emplace_back(DisplacementStep{{{o.cavity1, o.alpha}, {o.cavity2, o.alpha}}});
  g.steps.emplace_back(RotationStep{2.0 * kPi, 0.0, quantized_duration(2.0 * kPi / eps, o.dt),
                                    {{{o.cavity1, 0}, {o.cavity2, 0}}}, std::nullopt});
  g.steps.emplace_back(DisplacementStep{{{o.cavity1, -o.alpha}, {o.cavity2, -o.alpha}}});
  return g;
}

GateSpec cz_binomial_ideal(const BinomialCzOptions &o) {
  GateSpec g;
  g.name = "cz-binomial";
  g.qubit = o.qubit;
  g.cavities = {o.cavity1, o.cavity2};
  g.dt = o.dt;
  RotationStep first{kPi, o.first_phi, quantized_duration(o.first_duration, o.dt), {}, std::nullopt};
  g.steps.emplace_back(first);
  MultitoneStep second;
  second.duration = quantized_duration(o.second_duration, o.dt);
  for (int j : {0, 2, 4})
    for (int k : {0, 2, 4}) {
      // gamma = pi + phi1 - phi2: axis phi1 + pi cancels the phase, phi1 gives pi.
      const double phi2 = (j == 2 && k == 2) ? o.first_phi : o.first_phi + kPi;
      second.tones.push_back({{{o.cavity1, j}, {o.cavity2, k}}, kPi * std::exp(I_UNIT * phi2)});
    }
  g.steps.emplace_back(second);
  return g;
}

namespace {

// Residuals <g|U_jk|g> - e^{i psi} s_jk e^{-i E_g T} over the nine joint Fock
// blocks, with psi eliminated in closed form.
struct ToneFunctor {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  std::vector<Eigen::Vector2cd> after_first; // qubit state after the first pulse
  std::vector<Eigen::Vector2d> levels;       // (E_g, E_e) per block
  std::vector<cplx> target;                  // s_jk e^{-i E_g T}
  CMat basis;                                // samples x tones, unit-area waveforms
  double dt = 1.0;
  mutable double psi = 0.0;
  mutable int evaluations = 0;

  int inputs() const { return static_cast<int>(2 * basis.cols()); }
  int values() const { return static_cast<int>(2 * target.size()); }

  std::vector<cplx> amplitudes(const Eigen::VectorXd &x) const {
    CVec area(basis.cols());
    for (Eigen::Index j = 0; j < area.size(); ++j)
      area(j) = cplx(x(2 * j), x(2 * j + 1));
    CVec u = basis * area;
    std::vector<cplx> out(target.size());
    for (std::size_t b = 0; b < target.size(); ++b) {
      Eigen::Vector2cd v = after_first[b];
      Eigen::Matrix2cd h;
      for (Eigen::Index k = 0; k < u.size(); ++k) {
        h << levels[b](0), 0.5 * std::conj(u(k)), 0.5 * u(k), levels[b](1);
        v = exp2(h, dt) * v;
      }
      out[b] = v(0);
    }
    return out;
  }

  int operator()(const Eigen::VectorXd &x, Eigen::VectorXd &r) const {
    ++evaluations;
    const auto amp = amplitudes(x);
    cplx acc = 0.0;
    for (std::size_t b = 0; b < amp.size(); ++b)
      acc += std::conj(target[b]) * amp[b];
    psi = std::arg(acc);
    const cplx rot = std::exp(I_UNIT * psi);
    r.resize(values());
    for (std::size_t b = 0; b < amp.size(); ++b) {
      const cplx d = amp[b] - rot * target[b];
      r(2 * b) = d.real();
      r(2 * b + 1) = d.imag();
    }
    return 0;
  }

  // Central differences with an absolute step: the tone areas start with
  // exactly zero imaginary parts, where a relative step degenerates.
  int df(const Eigen::VectorXd &x, Eigen::MatrixXd &jac) const {
    constexpr double h = 1e-6;
    jac.resize(values(), inputs());
    Eigen::VectorXd xp = x, rp, rm;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      xp(j) = x(j) + h;
      (*this)(xp, rp);
      xp(j) = x(j) - h;
      (*this)(xp, rm);
      xp(j) = x(j);
      jac.col(j) = (rp - rm) / (2.0 * h);
    }
    return 0;
  }
};

} // namespace

GateSpec cz_binomial(const DeviceParams &params, const BinomialCzOptions &o,
                     ToneSolveReport *report) {
  GateSpec g = cz_binomial_ideal(o);
  auto &first = std::get<RotationStep>(g.steps[0]);
  auto &second = std::get<MultitoneStep>(g.steps[1]);
  const FockCondition centre{{o.cavity1, 2}, {o.cavity2, 2}};
  first.detuning = transition_shift(params, o.qubit, centre);

  // Qubit-only energies of each joint Fock block from the static Hamiltonian.
  SystemLayout layout({o.qubit}, {{o.cavity1, 5}, {o.cavity2, 5}});
  const RVec energies = static_energies(params, layout);
  const auto &sp = layout.space();
  const double total = g.duration();

  ToneFunctor f;
  f.dt = g.dt;
  const PulseSequence p1 = step_pulse(first, 0.0, g, params);
  for (const auto &tone : second.tones) {
    const std::array<int, 3> lg{0, tone.fock.at(o.cavity1), tone.fock.at(o.cavity2)};
    const std::array<int, 3> le{1, lg[1], lg[2]};
    const Eigen::Vector2d lev(energies(sp.joint_index(lg)), energies(sp.joint_index(le)));
    Eigen::Vector2cd v(1.0, 0.0);
    Eigen::Matrix2cd h;
    for (const auto &u : p1.amplitudes(0)) {
      h << lev(0), 0.5 * std::conj(u), 0.5 * u, lev(1);
      v = exp2(h, g.dt) * v;
    }
    f.after_first.push_back(v);
    f.levels.push_back(lev);
    const double sign = (lg[1] == 2 && lg[2] == 2) ? -1.0 : 1.0;
    f.target.push_back(sign * std::exp(-I_UNIT * lev(0) * total));
  }
  const std::size_t n = sample_count(second.duration, g.dt);
  f.basis.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(second.tones.size()));
  for (std::size_t j = 0; j < second.tones.size(); ++j) {
    MultitoneStep single{second.duration, {{second.tones[j].fock, cplx(1.0)}}};
    const auto samples = step_pulse(single, first.duration, g, params).amplitudes(0);
    for (std::size_t k = 0; k < n; ++k)
      f.basis(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = samples[k];
  }

  // Seed: in the frame of block jk the short first pulse appears with its
  // axis advanced by (shift_jk - shift_22) t_mid; tilt the tone axis to match.
  const double t_mid = 0.5 * first.duration;
  Eigen::VectorXd x(2 * second.tones.size());
  for (std::size_t j = 0; j < second.tones.size(); ++j) {
    second.tones[j].area *= std::exp(
        I_UNIT * (transition_shift(params, o.qubit, second.tones[j].fock) - *first.detuning) * t_mid);
    x(2 * j) = second.tones[j].area.real();
    x(2 * j + 1) = second.tones[j].area.imag();
  }
  Eigen::LevenbergMarquardt<ToneFunctor> lm(f);
  lm.parameters.maxfev = o.max_evaluations;
  lm.parameters.xtol = o.tolerance;
  lm.parameters.ftol = o.tolerance;
  const auto status = lm.minimize(x);

  Eigen::VectorXd r;
  f(x, r);
  ToneSolveReport rep;
  rep.evaluations = f.evaluations;
  rep.residual_norm = r.norm();
  rep.global_phase = f.psi;
  for (std::size_t b = 0; b < second.tones.size(); ++b)
    rep.residuals.push_back(std::hypot(r(2 * b), r(2 * b + 1)));
  using LmStatus = Eigen::LevenbergMarquardtSpace::Status;
  rep.converged = status == LmStatus::RelativeReductionTooSmall ||
                  status == LmStatus::RelativeErrorTooSmall ||
                  status == LmStatus::RelativeErrorAndReductionTooSmall ||
                  status == LmStatus::CosinusTooSmall;
  for (std::size_t j = 0; j < second.tones.size(); ++j)
    second.tones[j].area = cplx(x(2 * j), x(2 * j + 1));
  if (report)
    *report = rep;
  if (!std::isfinite(rep.residual_norm) || rep.residual_norm > 0.5) {
    std::ostringstream os;
    os << "cz_binomial: tone solve failed, residual norm " << rep.residual_norm
       << "; per-state residuals:";
    for (double v : rep.residuals)
      os << ' ' << v;
    throw NumericalError(os.str());
  }
  if (!rep.converged) {
    std::ostringstream os;
    os << "cz_binomial: tone solve stopped on its evaluation budget, residual norm "
       << rep.residual_norm;
    warn(os.str());
  }
  return g;
}

GateSpec snap_bell(int sign, const DeviceParams &params, const SnapBellOptions &o) {
  if (sign != 1 && sign != -1)
    throw DomainError("snap_bell: sign must be +1 or -1");
  const double chi =
      std::min(params.coupling(o.qubit, o.cavity1), params.coupling(o.qubit, o.cavity2));
  if (!(chi > 0.0))
    throw DomainError("snap_bell: " + o.qubit + " must couple to both cavities");
  const double eps = o.epsilon.value_or(chi / 10.0);
  check_selectivity(eps, 1.0, chi);
  const double s = static_cast<double>(sign);
  GateSpec g;
  g.name = sign > 0 ? "snap-bell-plus" : "snap-bell-minus";
  g.qubit = o.qubit;
  g.cavities = {o.cavity1, o.cavity2};
  g.dt = o.dt;
  g.steps.emplace_back(DisplacementStep{
      {{o.cavity1, -s * kSnapAlphaFirst}, {o.cavity2, -kSnapAlphaFirst}}});
  g.steps.emplace_back(RotationStep{2.0 * kPi, 0.0, quantized_duration(2.0 * kPi / eps, o.dt),
                                    {{{o.cavity1, 0}, {o.cavity2, 0}}}, std::nullopt});
  g.steps.emplace_back(DisplacementStep{
      {{o.cavity1, s * kSnapAlphaSecond}, {o.cavity2, kSnapAlphaSecond}}});
  return g;
}

std::vector<PhaseEntry> dispersive_phase_table(double duration, const DeviceParams &params,
                                               const SystemLayout &layout) {
  const RVec e = static_energies(params, layout);
  const auto &sp = layout.space();
  std::vector<PhaseEntry> out;
  const std::size_t nq = layout.qubits().size();
  for (Eigen::Index j = 0; j < sp.total_dim(); ++j) {
    const auto lv = sp.levels(j);
    PhaseEntry p;
    p.qubit_level = nq > 0 ? lv[0] : 0;
    p.cavity_levels.assign(lv.begin() + static_cast<std::ptrdiff_t>(nq), lv.end());
    p.phase = -e(j) * duration;
    out.push_back(std::move(p));
  }
  return out;
}

GatePhaseReport geometric_phase_report(double delta_phi) {
  GatePhaseReport r;
  r.delta_phi = delta_phi;
  r.gamma = wrap_phase(kPi + delta_phi);
  r.solid_angle = 2.0 * r.gamma;
  return r;
}

LogicalFrame::LogicalFrame(SystemLayout layout, std::string qubit, std::vector<Encoding> codes)
    : layout_(std::move(layout)), qubit_(std::move(qubit)), codes_(std::move(codes)) {
  if (layout_.qubits().size() != 1 || layout_.qubits().front() != qubit_)
    throw DomainError("LogicalFrame: layout must hold exactly the qubit " + qubit_);
  if (codes_.size() != layout_.cavities().size() || codes_.empty())
    throw DomainError("LogicalFrame: one encoding per cavity required");
  for (std::size_t i = 0; i < codes_.size(); ++i)
    if (codes_[i].cavity.dim != layout_.cavity_dim(layout_.cavities()[i]))
      throw DomainError("LogicalFrame: encoding truncation does not match the layout");
  const Eigen::Index nl = logical_dim();
  inputs_.resize(layout_.space().total_dim(), nl);
  for (Eigen::Index a = 0; a < nl; ++a) {
    std::vector<Ket> parts{fock(0, ModeSpec::qubit())};
    for (std::size_t i = 0; i < codes_.size(); ++i) {
      const int bit = static_cast<int>((a >> (codes_.size() - 1 - i)) & 1);
      parts.push_back(bit ? codes_[i].code_one() : codes_[i].code_zero());
    }
    inputs_.col(a) = tensor(parts).amplitudes();
  }
  set_reference(inputs_);
}

CMat LogicalFrame::encode_density(const CMat &logical_rho) const {
  return inputs_ * logical_rho * inputs_.adjoint();
}

void LogicalFrame::set_reference(const CMat &reference) {
  if (reference.rows() != inputs_.rows() || reference.cols() != inputs_.cols())
    throw DomainError("LogicalFrame::set_reference: shape mismatch");
  const Eigen::Index half = inputs_.rows() / 2;
  if (reference.bottomRows(half).cwiseAbs().maxCoeff() > 1e-9)
    throw DomainError("LogicalFrame::set_reference: reference evolution excites the qubit");
  readout_.assign(2, CMat::Zero(inputs_.rows(), inputs_.cols()));
  readout_[0].topRows(half) = reference.topRows(half);
  readout_[1].bottomRows(half) = reference.topRows(half);
}

CMat LogicalFrame::logical_density(const CMat &rho) const {
  CMat out = CMat::Zero(logical_dim(), logical_dim());
  for (const auto &r : readout_)
    out += r.adjoint() * rho * r;
  return out;
}

std::vector<CMat> LogicalFrame::kraus(const CMat &evolved_inputs) const {
  std::vector<CMat> out;
  for (const auto &r : readout_)
    out.push_back(r.adjoint() * evolved_inputs);
  return out;
}

} // namespace geophase
