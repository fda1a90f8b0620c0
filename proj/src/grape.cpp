#include "geophase/grape.hpp"

#include "geophase/diagnostics.hpp"

#include <ceres/ceres.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace geophase {

namespace {

struct StepEig {
  CMat v;
  RVec e;
};

CMat step_hamiltonian(const TransferTask &task, const PulseSequence &pulse, std::size_t j,
                      const std::vector<std::size_t> &chan) {
  CMat h = task.h0.matrix();
  for (std::size_t c = 0; c < task.controls.size(); ++c) {
    const cplx u = pulse.amplitudes(chan[c])[j];
    if (u.real() != 0.0)
      h += u.real() * task.controls[c].gx;
    if (u.imag() != 0.0)
      h += u.imag() * task.controls[c].gy;
  }
  return h;
}

std::vector<std::size_t> channel_map(const PulseSequence &pulse, const TransferTask &task) {
  if (pulse.steps() != task.n_steps)
    throw DomainError("pulse length " + std::to_string(pulse.steps()) +
                      " does not match the task's " + std::to_string(task.n_steps) + " steps");
  if (std::abs(pulse.dt() - task.dt) > 1e-12)
    throw DomainError("pulse dt does not match the task");
  std::vector<std::size_t> chan;
  for (const auto &c : task.controls) {
    const std::size_t k = pulse.find(c.channel.label);
    if (k == PulseSequence::npos)
      throw DomainError("pulse has no channel '" + c.channel.label + "'");
    chan.push_back(k);
  }
  return chan;
}

CMat stack(const TransferTask &task, bool targets) {
  const Eigen::Index d = task.h0.dim();
  CMat m(d, static_cast<Eigen::Index>(task.pairs.size()));
  for (std::size_t k = 0; k < task.pairs.size(); ++k)
    m.col(static_cast<Eigen::Index>(k)) =
        targets ? task.pairs[k].second.amplitudes() : task.pairs[k].first.amplitudes();
  return m;
}

StepEig diagonalize(const CMat &h) {
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  if (es.info() != Eigen::Success)
    throw NumericalError("grape: eigendecomposition failed");
  return {es.eigenvectors(), es.eigenvalues()};
}

CMat propagate(const StepEig &s, double dt, const CMat &x) {
  const CVec ph = (-I_UNIT * dt * s.e.cast<cplx>()).array().exp();
  return s.v * (ph.asDiagonal() * (s.v.adjoint() * x));
}

CMat propagate_adjoint(const StepEig &s, double dt, const CMat &x) {
  const CVec ph = (I_UNIT * dt * s.e.cast<cplx>()).array().exp();
  return s.v * (ph.asDiagonal() * (s.v.adjoint() * x));
}

// Divided differences of exp(-i x dt) at the eigenvalue pairs, written with
// a sinc so that (near-)degenerate pairs need no special case.
CMat divided_differences(const RVec &e, double dt) {
  const Eigen::Index d = e.size();
  CMat m(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) {
      const double mid = 0.5 * (e(a) + e(b));
      const double x = 0.5 * (e(a) - e(b)) * dt;
      const double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
      m(a, b) = -I_UNIT * dt * std::exp(-I_UNIT * mid * dt) * sinc;
    }
  return m;
}

double sq(double x) { return x * x; }

// Radial saturation u = b tanh(|w|/b) w/|w| and its (symmetric) Jacobian.
cplx saturate(cplx w, double b, Eigen::Matrix2d *jac) {
  const double r = std::abs(w);
  if (r < 1e-300) {
    if (jac)
      jac->setIdentity();
    return w;
  }
  const double t = std::tanh(r / b);
  const double s = b * t;
  if (jac) {
    const double ds = 1.0 - t * t;
    const Eigen::Vector2d n(w.real() / r, w.imag() / r);
    *jac = (s / r) * Eigen::Matrix2d::Identity() + (ds - s / r) * n * n.transpose();
  }
  return s / r * w;
}

cplx unsaturate(cplx u, double b) {
  const double r = std::abs(u);
  if (r < 1e-300)
    return u;
  const double rr = std::min(r, 0.999 * b);
  return b * std::atanh(rr / b) / r * u;
}

class GrapeCost final : public ceres::FirstOrderFunction {
public:
  GrapeCost(const TransferTask &task, PulseSequence shape, double bound)
      : task_(task), pulse_(std::move(shape)), bound_(bound) {}

  int NumParameters() const override {
    return static_cast<int>(2 * task_.controls.size() * task_.n_steps);
  }

  bool Evaluate(const double *w, double *cost, double *gradient) const override {
    const std::size_t n = task_.n_steps;
    std::vector<Eigen::Matrix2d> jac(gradient ? task_.controls.size() * n : 0);
    for (std::size_t c = 0; c < task_.controls.size(); ++c) {
      auto &amps = pulse_.amplitudes(c);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t p = c * n + j;
        amps[j] = saturate(cplx(w[2 * p], w[2 * p + 1]), bound_, gradient ? &jac[p] : nullptr);
      }
    }
    double f = 0.0;
    if (gradient) {
      const RVec g = transfer_gradient(pulse_, task_, &f);
      for (std::size_t p = 0; p < jac.size(); ++p) {
        const Eigen::Vector2d gw = jac[p] * Eigen::Vector2d(g(2 * p), g(2 * p + 1));
        gradient[2 * p] = -gw(0);
        gradient[2 * p + 1] = -gw(1);
      }
    } else {
      f = transfer_fidelity(pulse_, task_);
    }
    *cost = 1.0 - f;
    return std::isfinite(*cost);
  }

  const PulseSequence &pulse() const { return pulse_; }

private:
  const TransferTask &task_;
  mutable PulseSequence pulse_;
  double bound_;
};

class Recorder final : public ceres::IterationCallback {
public:
  Recorder(OptimizerReport &report, double target, bool verbose)
      : report_(report), target_(target), verbose_(verbose) {}

  ceres::CallbackReturnType operator()(const ceres::IterationSummary &s) override {
    const double f = 1.0 - s.cost;
    if (s.iteration == 0 || s.step_is_successful) {
      report_.fidelities.push_back(f);
      report_.gradient_norms.push_back(s.gradient_norm);
    }
    if (verbose_ && s.iteration % 50 == 0)
      warn("grape: iteration " + std::to_string(s.iteration) + " F = " + std::to_string(f));
    return f >= target_ ? ceres::SOLVER_TERMINATE_SUCCESSFULLY : ceres::SOLVER_CONTINUE;
  }

private:
  OptimizerReport &report_;
  double target_;
  bool verbose_;
};

} // namespace

Control make_control(const DriveTerm &drive) {
  if (drive.detuning() != 0.0)
    throw DomainError("make_control: detuned drives are not supported");
  auto [gx, gy] = drive.generators();
  return {PulseChannel{drive.label(), drive.kind()}, std::move(gx), std::move(gy)};
}

void TransferTask::validate() const {
  if (pairs.empty())
    throw DomainError("TransferTask: no state pairs");
  if (n_steps == 0)
    throw DomainError("TransferTask: zero steps");
  if (!(dt > 0.0))
    throw DomainError("TransferTask: dt must be positive");
  if (!h0.is_hermitian())
    throw DomainError("TransferTask: H0 is not hermitian");
  for (const auto &[a, b] : pairs) {
    if (!(a.space() == h0.space()) || !(b.space() == h0.space()))
      throw DomainError("TransferTask: state is not on H0's space");
    if (std::abs(a.norm() - 1.0) > 1e-9 || std::abs(b.norm() - 1.0) > 1e-9)
      throw DomainError("TransferTask: states must be normalized");
  }
  for (const auto &c : controls) {
    if (c.gx.rows() != h0.dim() || c.gy.rows() != h0.dim())
      throw DomainError("TransferTask: control dimension mismatch");
    if (!c.gx.isApprox(c.gx.adjoint()) || !c.gy.isApprox(c.gy.adjoint()))
      throw DomainError("TransferTask: control generators must be hermitian");
  }
}

double transfer_fidelity(const PulseSequence &pulse, const TransferTask &task) {
  const auto chan = channel_map(pulse, task);
  CMat x = stack(task, false);
  for (std::size_t j = 0; j < task.n_steps; ++j)
    x = propagate(diagonalize(step_hamiltonian(task, pulse, j, chan)), task.dt, x);
  const cplx o = (stack(task, true).adjoint() * x).trace() / static_cast<double>(task.pairs.size());
  return std::norm(o);
}

RVec transfer_gradient(const PulseSequence &pulse, const TransferTask &task, double *fidelity) {
  const auto chan = channel_map(pulse, task);
  const std::size_t n = task.n_steps;
  const double K = static_cast<double>(task.pairs.size());

  std::vector<StepEig> eig;
  eig.reserve(n);
  std::vector<CMat> fwd; // state before step j
  fwd.reserve(n);
  CMat x = stack(task, false);
  for (std::size_t j = 0; j < n; ++j) {
    eig.push_back(diagonalize(step_hamiltonian(task, pulse, j, chan)));
    fwd.push_back(x);
    x = propagate(eig.back(), task.dt, x);
  }
  CMat lam = stack(task, true);
  const cplx o = (lam.adjoint() * x).trace() / K;
  if (fidelity)
    *fidelity = std::norm(o);

  RVec grad = RVec::Zero(static_cast<Eigen::Index>(2 * task.controls.size() * n));
  if (task.controls.empty())
    return grad;
  for (std::size_t jj = n; jj-- > 0;) {
    const StepEig &s = eig[jj];
    // do/dtheta = (1/K) tr(lam^dag dU psi), dU = V (G~ o M) V^dag
    // = (1/K) sum_ij G_ij Y_ji with Y = V (M o C^T)^T V^dag, C = (V^dag psi)(V^dag lam)^dag.
    const CMat a = s.v.adjoint() * fwd[jj];
    const CMat b = s.v.adjoint() * lam;
    const CMat c = a * b.adjoint();
    const CMat xm = divided_differences(s.e, task.dt).cwiseProduct(c.transpose());
    const CMat y = s.v * xm.transpose() * s.v.adjoint();
    for (std::size_t ci = 0; ci < task.controls.size(); ++ci) {
      const auto &ctl = task.controls[ci];
      const cplx dre = ctl.gx.cwiseProduct(y.transpose()).sum() / K;
      const cplx dim = ctl.gy.cwiseProduct(y.transpose()).sum() / K;
      const auto p = static_cast<Eigen::Index>(2 * (ci * n + jj));
      grad(p) = 2.0 * (std::conj(o) * dre).real();
      grad(p + 1) = 2.0 * (std::conj(o) * dim).real();
    }
    lam = propagate_adjoint(s, task.dt, lam);
  }
  return grad;
}

PulseSequence zero_pulse(const TransferTask &task) {
  PulseSequence p(task.dt);
  for (const auto &c : task.controls)
    p.add_channel(c.channel, std::vector<cplx>(task.n_steps, cplx{0.0, 0.0}));
  return p;
}

std::pair<PulseSequence, OptimizerReport> optimize(const TransferTask &task,
                                                   const GrapeOptions &options,
                                                   const PulseSequence *initial) {
  task.validate();
  if (task.controls.empty())
    throw DomainError("optimize: task has no controls");
  if (!(options.amplitude_bound > 0.0))
    throw DomainError("optimize: amplitude bound must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  const double b = options.amplitude_bound;

  // Parameters w, laid out like transfer_gradient's output.
  const std::size_t n = task.n_steps;
  std::vector<double> w(2 * task.controls.size() * n);
  if (initial) {
    const auto chan = channel_map(*initial, task);
    for (std::size_t c = 0; c < task.controls.size(); ++c)
      for (std::size_t j = 0; j < n; ++j) {
        const cplx v = unsaturate(initial->amplitudes(chan[c])[j], b);
        w[2 * (c * n + j)] = v.real();
        w[2 * (c * n + j) + 1] = v.imag();
      }
  } else {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> nd(0.0, options.initial_scale);
    for (auto &v : w)
      v = nd(rng);
  }

  auto *cost = new GrapeCost(task, zero_pulse(task), b);
  ceres::GradientProblem problem(cost); // takes ownership
  OptimizerReport report;

  double c0 = 0.0;
  cost->Evaluate(w.data(), &c0, nullptr);
  if (1.0 - c0 >= options.target_fidelity) {
    report.fidelity = 1.0 - c0;
    report.fidelities.push_back(report.fidelity);
    report.reached_target = true;
    report.status = "initial pulse already meets the target";
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {cost->pulse(), report};
  }

  Recorder recorder(report, options.target_fidelity, options.verbose);
  ceres::GradientProblemSolver::Options so;
  so.line_search_direction_type = ceres::LBFGS;
  so.max_num_iterations = options.max_iterations;
  so.gradient_tolerance = options.gradient_tolerance;
  so.function_tolerance = 1e-14;
  so.parameter_tolerance = 1e-14;
  so.logging_type = ceres::SILENT;
  so.callbacks.push_back(&recorder);
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(so, problem, w.data(), &summary);

  double c1 = 0.0;
  cost->Evaluate(w.data(), &c1, nullptr);
  report.fidelity = std::clamp(1.0 - c1, 0.0, 1.0);
  report.iterations = static_cast<int>(summary.iterations.size()) - 1;
  report.reached_target = report.fidelity >= options.target_fidelity;
  report.status = summary.message;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {cost->pulse(), report};
}

PulseSequence gaussian_pulse(const PulseChannel &channel, double sigma, double total,
                             double amplitude, double drag, double dt) {
  if (!(sigma > 0.0) || !(dt > 0.0))
    throw DomainError("gaussian_pulse: sigma and dt must be positive");
  if (total < 4.0 * sigma - 1e-12)
    throw DomainError("gaussian_pulse: total must be at least 4 sigma");
  const long steps = std::lround(total / dt);
  if (steps <= 0 || std::abs(static_cast<double>(steps) * dt - total) > 1e-9 * total)
    throw DomainError("gaussian_pulse: total must be a multiple of dt");
  std::vector<cplx> s(static_cast<std::size_t>(steps));
  for (long k = 0; k < steps; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * dt - 0.5 * total;
    const double env = amplitude * std::exp(-sq(t) / (2.0 * sq(sigma)));
    s[static_cast<std::size_t>(k)] = cplx(env, drag * (-t / sq(sigma)) * env);
  }
  PulseSequence p(dt);
  p.add_channel(channel, std::move(s));
  return p;
}

double gaussian_amplitude_for_area(double sigma, double total, double angle, double dt) {
  const auto unit = gaussian_pulse(PulseChannel{"x", DriveKind::qubit}, sigma, total, 1.0, 0.0, dt);
  double area = 0.0;
  for (const auto &u : unit.amplitudes(0))
    area += u.real() * dt;
  return angle / area;
}

std::vector<std::pair<cplx, cplx>> training_coefficients() {
  const double r = 1.0 / std::sqrt(2.0);
  return {{1.0, 0.0}, {0.0, 1.0}, {r, r}, {r, I_UNIT * r}};
}

namespace {

TransferTask qubit_cavity_task(const DeviceParams &params, const std::string &qubit,
                               const std::string &cavity, std::size_t n_steps, double dt,
                               const SystemLayout &layout) {
  TransferTask task{{}, static_hamiltonian(params, layout), {}, n_steps, dt};
  task.controls.push_back(make_control(qubit_drive(layout, qubit)));
  task.controls.push_back(make_control(cavity_drive(layout, cavity)));
  return task;
}

Ket qubit_ket(cplx c0, cplx c1) {
  CVec v(2);
  v << c0, c1;
  return Ket::normalized(CompositeSpace{ModeSpec::qubit()}, v);
}

} // namespace

TransferTask encode_task(const DeviceParams &params, const std::string &qubit,
                         const std::string &cavity, const Encoding &enc, std::size_t n_steps,
                         double dt) {
  SystemLayout layout({qubit}, {{cavity, enc.cavity.dim}});
  TransferTask task = qubit_cavity_task(params, qubit, cavity, n_steps, dt, layout);
  const Ket vac = fock(0, enc.cavity);
  const Ket g = qubit_ket(1.0, 0.0);
  for (const auto &[c0, c1] : training_coefficients())
    task.pairs.emplace_back(tensor(qubit_ket(c0, c1), vac), tensor(g, code_ket(enc, c0, c1)));
  task.validate();
  return task;
}

TransferTask decode_task(const DeviceParams &params, const std::string &qubit,
                         const std::string &cavity, const Encoding &enc, double idle,
                         std::size_t n_steps, double dt) {
  SystemLayout layout({qubit}, {{cavity, enc.cavity.dim}});
  TransferTask task = qubit_cavity_task(params, qubit, cavity, n_steps, dt, layout);
  const LinearOp w = kerr_free_evolution(enc.cavity, params.self_kerr(cavity), idle);
  const Ket vac = fock(0, enc.cavity);
  const Ket g = qubit_ket(1.0, 0.0);
  for (const auto &[c0, c1] : training_coefficients())
    task.pairs.emplace_back(tensor(g, w * code_ket(enc, c0, c1)), tensor(qubit_ket(c0, c1), vac));
  task.validate();
  return task;
}

} // namespace geophase
