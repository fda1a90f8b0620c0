#include "geophase/tomography.hpp"

#include "geophase/diagnostics.hpp"
#include "geophase/optimize.hpp"

#include <boost/math/special_functions/laguerre.hpp>
#include <json.hpp>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace geophase {

namespace {

constexpr double kPi = std::numbers::pi;

CMat kron_all(const std::vector<CMat> &factors) {
  CMat out = CMat::Ones(1, 1);
  for (const auto &f : factors) {
    CMat next = Eigen::kroneckerProduct(out, f).eval();
    out = std::move(next);
  }
  return out;
}

int qubit_count_of(Eigen::Index dim) {
  int n = 0;
  while ((Eigen::Index(1) << n) < dim)
    ++n;
  if ((Eigen::Index(1) << n) != dim || n == 0)
    throw DomainError("dimension " + std::to_string(dim) + " is not a power of two");
  return n;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

DensityOp single_mode_reduction(const DensityOp &rho, const SystemLayout &layout,
                                const std::string &cavity) {
  if (layout.is_qubit(cavity))
    throw DomainError("wigner: " + cavity + " is not a cavity");
  if (!(rho.space() == layout.space()))
    throw DomainError("wigner: state does not live on the layout's space");
  const std::array<std::size_t, 1> keep{layout.index(cavity)};
  return partial_trace(rho, keep);
}

void warn_grid_extent(double max_abs_beta2, int dim) {
  if (max_abs_beta2 > 0.5 * dim) {
    std::ostringstream os;
    os << "wigner: |beta|^2 up to " << max_abs_beta2 << " reaches beyond the phase-space region"
       << " resolved by dim " << dim;
    warn(os.str());
  }
}

} // namespace

CMat displaced_parity(cplx beta, int dim) {
  if (dim < 1)
    throw DomainError("displaced_parity: dim must be positive");
  // D(beta) P D(beta)^dag = D(2 beta) P
  const cplx g = 2.0 * beta;
  const double x = std::norm(g), r = std::abs(g), th = std::arg(g);
  CMat m(dim, dim);
  for (int n = 0; n < dim; ++n)
    for (int k = 0; k < dim; ++k) {
      const int lo = std::min(n, k), d = std::abs(n - k);
      const double mag = std::exp(0.5 * (std::lgamma(lo + 1.0) - std::lgamma(lo + d + 1.0)) - 0.5 * x) *
                         (d == 0 ? 1.0 : std::pow(r, d)) *
                         boost::math::laguerre(static_cast<unsigned>(lo), static_cast<unsigned>(d), x);
      // <n|D(g)|k>: g^(n-k) above the diagonal pattern, (-g*)^(k-n) below.
      cplx phase = std::exp(I_UNIT * (static_cast<double>(d) * th));
      if (n < k)
        phase = std::pow(-1.0, d) * std::conj(phase);
      m(n, k) = mag * phase * ((k % 2) ? -1.0 : 1.0);
    }
  return m;
}

double wigner(const DensityOp &cavity_state, cplx beta) {
  const auto &sp = cavity_state.space();
  if (sp.size() != 1 || !sp[0].is_bosonic())
    throw DomainError("wigner: single-mode cavity state required");
  const CMat p = displaced_parity(beta, sp[0].dim);
  return 2.0 / kPi * (cavity_state.matrix().transpose().cwiseProduct(p)).sum().real();
}

double wigner(const DensityOp &rho, const SystemLayout &layout, const std::string &cavity,
              cplx beta) {
  return wigner(single_mode_reduction(rho, layout, cavity), beta);
}

double wigner(const Ket &psi, const SystemLayout &layout, const std::string &cavity, cplx beta) {
  return wigner(DensityOp::from_ket(psi), layout, cavity, beta);
}

namespace {

// Two-cavity reduced state ordered (cavity1, cavity2).
DensityOp pair_reduction(const DensityOp &rho, const SystemLayout &layout,
                         const std::string &c1, const std::string &c2, bool &swapped) {
  if (c1 == c2 || layout.is_qubit(c1) || layout.is_qubit(c2))
    throw DomainError("joint_wigner: two distinct cavities required");
  if (!(rho.space() == layout.space()))
    throw DomainError("joint_wigner: state does not live on the layout's space");
  std::size_t i1 = layout.index(c1), i2 = layout.index(c2);
  swapped = i1 > i2;
  const std::array<std::size_t, 2> keep{std::min(i1, i2), std::max(i1, i2)};
  return partial_trace(rho, keep);
}

double joint_value(const DensityOp &pair, bool swapped, cplx b1, cplx b2) {
  const auto &sp = pair.space();
  CMat p1 = displaced_parity(swapped ? b2 : b1, sp[0].dim);
  CMat p2 = displaced_parity(swapped ? b1 : b2, sp[1].dim);
  const CMat k = Eigen::kroneckerProduct(p1, p2).eval();
  return (pair.matrix().transpose().cwiseProduct(k)).sum().real();
}

} // namespace

double joint_wigner(const DensityOp &rho, const SystemLayout &layout, const std::string &cavity1,
                    const std::string &cavity2, cplx beta1, cplx beta2, bool scaled) {
  bool swapped = false;
  const DensityOp pair = pair_reduction(rho, layout, cavity1, cavity2, swapped);
  const double v = joint_value(pair, swapped, beta1, beta2);
  return scaled ? v * 4.0 / (kPi * kPi) : v;
}

double GridAxis::step() const { return points > 1 ? (max - min) / (points - 1) : 0.0; }
double GridAxis::value(int i) const { return min + step() * i; }

double WignerGrid::integral() const {
  double s = 0.0;
  for (double v : values)
    s += v;
  return s * x.step() * y.step();
}

std::string WignerGrid::to_csv() const {
  std::string out = x_label + "," + y_label + ",value\n";
  for (int i = 0; i < x.points; ++i)
    for (int j = 0; j < y.points; ++j)
      out += fmt17(x.value(i)) + "," + fmt17(y.value(j)) + "," + fmt17(at(i, j)) + "\n";
  return out;
}

std::string WignerGrid::to_json() const {
  nlohmann::json j;
  auto axis = [](const std::string &label, const GridAxis &a) {
    return nlohmann::json{{"label", label}, {"min", a.min}, {"max", a.max}, {"points", a.points}};
  };
  j["x"] = axis(x_label, x);
  j["y"] = axis(y_label, y);
  j["values"] = values;
  return j.dump();
}

WignerGrid wigner_grid(const DensityOp &cavity_state, const GridAxis &re, const GridAxis &im) {
  const auto &sp = cavity_state.space();
  if (sp.size() != 1 || !sp[0].is_bosonic())
    throw DomainError("wigner_grid: single-mode cavity state required");
  if (re.points < 1 || im.points < 1)
    throw DomainError("wigner_grid: empty axis");
  WignerGrid g;
  g.x = re;
  g.y = im;
  double reach = 0.0;
  for (double a : {re.min, re.max})
    for (double b : {im.min, im.max})
      reach = std::max(reach, a * a + b * b);
  warn_grid_extent(reach, sp[0].dim);
  g.values.reserve(static_cast<std::size_t>(re.points * im.points));
  for (int i = 0; i < re.points; ++i)
    for (int j = 0; j < im.points; ++j)
      g.values.push_back(wigner(cavity_state, cplx(re.value(i), im.value(j))));
  return g;
}

WignerGrid joint_wigner_cut(const DensityOp &rho, const SystemLayout &layout,
                            const std::string &cavity1, const std::string &cavity2, JointCut cut,
                            const GridAxis &axis, bool scaled) {
  bool swapped = false;
  const DensityOp pair = pair_reduction(rho, layout, cavity1, cavity2, swapped);
  WignerGrid g;
  const std::string part = cut == JointCut::real ? "re" : "im";
  g.x_label = part + "_" + cavity1;
  g.y_label = part + "_" + cavity2;
  g.x = g.y = axis;
  const double reach = std::max(axis.min * axis.min, axis.max * axis.max);
  warn_grid_extent(reach, std::min(pair.space()[0].dim, pair.space()[1].dim));
  const cplx unit = cut == JointCut::real ? cplx(1.0) : I_UNIT;
  const double scale = scaled ? 4.0 / (kPi * kPi) : 1.0;
  for (int i = 0; i < axis.points; ++i)
    for (int j = 0; j < axis.points; ++j)
      g.values.push_back(scale *
                         joint_value(pair, swapped, unit * axis.value(i), unit * axis.value(j)));
  return g;
}

// ---------------------------------------------------------------------------

const std::array<PreRotation, 4> &standard_pre_rotations() {
  static const std::array<PreRotation, 4> r{PreRotation::I, PreRotation::X90, PreRotation::Y90,
                                            PreRotation::X180};
  return r;
}

Eigen::Matrix2cd pre_rotation_matrix(PreRotation r) {
  auto rot = [](double theta, double phi) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    Eigen::Matrix2cd m;
    m << c, -I_UNIT * s * std::exp(-I_UNIT * phi), -I_UNIT * s * std::exp(I_UNIT * phi), c;
    return m;
  };
  switch (r) {
  case PreRotation::I:
    return Eigen::Matrix2cd::Identity();
  case PreRotation::X90:
    return rot(kPi / 2, 0.0);
  case PreRotation::Y90:
    return rot(kPi / 2, kPi / 2);
  case PreRotation::X180:
    return rot(kPi, 0.0);
  }
  throw DomainError("pre_rotation_matrix: unknown rotation");
}

std::string to_string(PreRotation r) {
  switch (r) {
  case PreRotation::I:
    return "I";
  case PreRotation::X90:
    return "X90";
  case PreRotation::Y90:
    return "Y90";
  case PreRotation::X180:
    return "X180";
  }
  return "?";
}

std::vector<std::vector<PreRotation>> all_settings(int n_qubits) {
  if (n_qubits < 1 || n_qubits > 2)
    throw DomainError("tomography supports 1 or 2 qubits");
  std::vector<std::vector<PreRotation>> out{{}};
  for (int q = 0; q < n_qubits; ++q) {
    std::vector<std::vector<PreRotation>> next;
    for (const auto &s : out)
      for (PreRotation r : standard_pre_rotations()) {
        next.push_back(s);
        next.back().push_back(r);
      }
    out = std::move(next);
  }
  return out;
}

namespace {

CMat setting_unitary(const std::vector<PreRotation> &s) {
  std::vector<CMat> f;
  for (PreRotation r : s)
    f.emplace_back(pre_rotation_matrix(r));
  return kron_all(f);
}

} // namespace

ProbabilityTable tomo_probabilities(const CMat &rho, int n_qubits) {
  return tomo_probabilities(rho, n_qubits, all_settings(n_qubits));
}

ProbabilityTable tomo_probabilities(const CMat &rho, int n_qubits,
                                    const std::vector<std::vector<PreRotation>> &settings) {
  if (n_qubits < 1 || n_qubits > 2)
    throw DomainError("tomography supports 1 or 2 qubits");
  const Eigen::Index d = Eigen::Index(1) << n_qubits;
  if (rho.rows() != d || rho.cols() != d)
    throw DomainError("tomo_probabilities: density matrix dimension mismatch");
  ProbabilityTable t;
  t.n_qubits = n_qubits;
  t.settings = settings;
  t.probs.resize(static_cast<Eigen::Index>(settings.size()), d);
  for (std::size_t s = 0; s < settings.size(); ++s) {
    if (static_cast<int>(settings[s].size()) != n_qubits)
      throw DomainError("tomo_probabilities: setting length differs from qubit count");
    const CMat u = setting_unitary(settings[s]);
    const CMat out = u * rho * u.adjoint();
    t.probs.row(static_cast<Eigen::Index>(s)) = out.diagonal().real().transpose();
  }
  return t;
}

CMat mle_density(const ProbabilityTable &table, double shots, const MleOptions &options,
                 MleReport *report) {
  if (!(shots > 0.0))
    throw DomainError("mle_density: shots must be positive");
  const int n = table.n_qubits;
  const Eigen::Index d = Eigen::Index(1) << n;
  if (table.probs.cols() != d || table.probs.rows() != static_cast<Eigen::Index>(table.settings.size()))
    throw DomainError("mle_density: probability table shape mismatch");
  if ((table.probs.array() < -1e-12).any())
    throw DomainError("mle_density: negative probabilities");

  // Measurement operators E = U^dag |o><o| U with their observed counts,
  // accumulated in canonical setting order so that the estimate does not
  // depend on how the table rows are arranged.
  std::vector<std::size_t> order(table.settings.size());
  for (std::size_t s = 0; s < order.size(); ++s)
    order[s] = s;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.settings[a] < table.settings[b];
  });
  std::vector<CMat> effects;
  std::vector<double> counts;
  for (std::size_t s : order) {
    const CMat u = setting_unitary(table.settings[s]);
    for (Eigen::Index o = 0; o < d; ++o) {
      const double f = shots * std::max(0.0, table.probs(static_cast<Eigen::Index>(s), o));
      if (f == 0.0)
        continue;
      effects.emplace_back(u.row(o).adjoint() * u.row(o));
      counts.push_back(f);
    }
  }
  double total = 0.0;
  for (double c : counts)
    total += c;
  if (total == 0.0)
    throw DomainError("mle_density: no counts");

  const Eigen::Index np = d * d;
  auto unpack = [&](const Eigen::VectorXd &x) {
    CMat t(d, d);
    for (Eigen::Index i = 0; i < np; ++i)
      t.data()[i] = cplx(x(i), x(np + i));
    return t;
  };

  // Cost: negative log-likelihood per count.
  Objective nll = [&](const Eigen::VectorXd &x, Eigen::VectorXd *grad) {
    const CMat t = unpack(x);
    const CMat a = t.adjoint() * t;
    const double tr = a.trace().real();
    const CMat rho = a / tr;
    double cost = 0.0;
    CMat g = CMat::Zero(d, d);
    for (std::size_t k = 0; k < effects.size(); ++k) {
      const double p = std::max((effects[k].cwiseProduct(rho.transpose())).sum().real(), 1e-300);
      cost -= counts[k] * std::log(p);
      if (grad)
        g += (counts[k] / p) * effects[k];
    }
    if (grad) {
      g -= (g.cwiseProduct(rho.transpose())).sum().real() * CMat::Identity(d, d);
      const CMat dl = (2.0 / tr) * t * g; // dL = Re Tr(dl^dag dT)
      grad->resize(2 * np);
      for (Eigen::Index i = 0; i < np; ++i) {
        (*grad)(i) = -dl.data()[i].real() / total;
        (*grad)(np + i) = -dl.data()[i].imag() / total;
      }
    }
    return cost / total;
  };

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2 * np);
  for (Eigen::Index i = 0; i < d; ++i)
    x0(i * d + i) = 1.0;
  MinimizeOptions mo;
  mo.max_iterations = options.max_iterations;
  mo.gradient_tolerance = options.gradient_tolerance;
  mo.initial_step = 0.1;
  const MinimizeResult res = minimize_bfgs(nll, x0, mo);

  MleReport rep;
  rep.iterations = res.iterations;
  rep.gradient_norm = res.gradient_norm;
  rep.log_likelihood = -res.value * total;
  rep.converged = res.converged;
  if (report)
    *report = rep;
  // Pure-state optima sit on the boundary, where the gradient in T decays
  // only like the square root of the vanishing eigenvalues.
  if (!std::isfinite(res.value) || res.gradient_norm > 1e-3) {
    std::ostringstream os;
    os << "mle_density: no convergence after " << res.iterations
       << " iterations, gradient norm " << res.gradient_norm << " (" << res.status << ")";
    throw NumericalError(os.str());
  }
  const CMat t = unpack(res.x);
  const CMat a = t.adjoint() * t;
  CMat rho = a / a.trace().real();
  return 0.5 * (rho + rho.adjoint());
}

// ---------------------------------------------------------------------------

std::vector<CMat> pauli_basis(int n_qubits) {
  if (n_qubits < 1)
    throw DomainError("pauli_basis: at least one qubit");
  std::array<CMat, 4> p;
  p[0] = CMat::Identity(2, 2);
  p[1] = CMat::Zero(2, 2);
  p[1](0, 1) = p[1](1, 0) = 1.0;
  p[2] = CMat::Zero(2, 2);
  p[2](0, 1) = -I_UNIT;
  p[2](1, 0) = I_UNIT;
  p[3] = CMat::Zero(2, 2);
  p[3](0, 0) = 1.0;
  p[3](1, 1) = -1.0;
  std::vector<CMat> out{CMat::Ones(1, 1)};
  for (int q = 0; q < n_qubits; ++q) {
    std::vector<CMat> next;
    for (const auto &a : out)
      for (const auto &b : p)
        next.emplace_back(Eigen::kroneckerProduct(a, b).eval());
    out = std::move(next);
  }
  return out;
}

std::vector<std::string> pauli_labels(int n_qubits) {
  std::vector<std::string> out{""};
  for (int q = 0; q < n_qubits; ++q) {
    std::vector<std::string> next;
    for (const auto &a : out)
      for (const char *b : {"I", "X", "Y", "Z"})
        next.push_back(a + b);
    out = std::move(next);
  }
  return out;
}

std::string TransferMatrix::to_json() const {
  nlohmann::json j;
  j["n_qubits"] = n_qubits;
  j["labels"] = pauli_labels(n_qubits);
  j["R"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < R.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index k = 0; k < R.cols(); ++k)
      row.push_back(R(i, k));
    j["R"].push_back(row);
  }
  return j.dump(1);
}

TransferMatrix TransferMatrix::from_json(const std::string &text) {
  try {
    const auto j = nlohmann::json::parse(text);
    TransferMatrix t;
    t.n_qubits = j.at("n_qubits").get<int>();
    const Eigen::Index m = Eigen::Index(1) << (2 * t.n_qubits);
    const auto &rows = j.at("R");
    if (static_cast<Eigen::Index>(rows.size()) != m)
      throw DomainError("transfer matrix JSON: wrong row count");
    t.R.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto row = rows.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != m)
        throw DomainError("transfer matrix JSON: wrong column count");
      for (Eigen::Index k = 0; k < m; ++k)
        t.R(i, k) = row[static_cast<std::size_t>(k)];
    }
    return t;
  } catch (const nlohmann::json::exception &e) {
    throw DomainError(std::string("transfer matrix JSON: ") + e.what());
  }
}

std::vector<CMat> qpt_input_states(int n_qubits) {
  if (n_qubits < 1)
    throw DomainError("qpt_input_states: at least one qubit");
  const double h = 1.0 / std::sqrt(2.0);
  std::array<CVec, 4> kets;
  for (auto &k : kets)
    k.resize(2);
  kets[0] << 1.0, 0.0;
  kets[1] << 0.0, 1.0;
  kets[2] << h, h;
  kets[3] << h, -I_UNIT * h;
  std::vector<CMat> out{CMat::Ones(1, 1)};
  for (int q = 0; q < n_qubits; ++q) {
    std::vector<CMat> next;
    for (const auto &a : out)
      for (const auto &k : kets)
        next.emplace_back(Eigen::kroneckerProduct(a, CMat(k * k.adjoint())).eval());
    out = std::move(next);
  }
  return out;
}

TransferMatrix pauli_transfer(const Channel &channel, int n_qubits) {
  const auto paulis = pauli_basis(n_qubits);
  const auto inputs = qpt_input_states(n_qubits);
  const Eigen::Index m = static_cast<Eigen::Index>(paulis.size());
  RMat pin(m, m), pout(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const CMat &rin = inputs[static_cast<std::size_t>(k)];
    const CMat rout = channel(rin);
    if (rout.rows() != rin.rows() || rout.cols() != rin.cols())
      throw DomainError("pauli_transfer: channel changed the dimension");
    for (Eigen::Index i = 0; i < m; ++i) {
      const CMat &p = paulis[static_cast<std::size_t>(i)];
      pin(i, k) = (p.cwiseProduct(rin.transpose())).sum().real();
      pout(i, k) = (p.cwiseProduct(rout.transpose())).sum().real();
    }
  }
  TransferMatrix t;
  t.n_qubits = n_qubits;
  t.R = pin.transpose().partialPivLu().solve(pout.transpose()).transpose();
  return t;
}

TransferMatrix pauli_transfer(const CMat &unitary) {
  if (unitary.rows() != unitary.cols())
    throw DomainError("pauli_transfer: square unitary required");
  const int n = qubit_count_of(unitary.rows());
  return pauli_transfer([&](const CMat &rho) { return CMat(unitary * rho * unitary.adjoint()); },
                        n);
}

double process_fidelity(const TransferMatrix &r, const TransferMatrix &ideal) {
  if (r.n_qubits != ideal.n_qubits || r.R.rows() != ideal.R.rows() || r.R.cols() != ideal.R.cols())
    throw DomainError("process_fidelity: dimension mismatch");
  const double d = std::ldexp(1.0, r.n_qubits);
  return ((r.R.transpose() * ideal.R).trace() / d + 1.0) / (d + 1.0);
}

namespace {

// Eigenvalues at round-off level are zeroed before taking square roots,
// which would otherwise inflate them to ~1e-8.
RVec clean_sqrt(const RVec &lam) {
  const double cut = 1e-13 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  RVec out(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    out(i) = lam(i) > cut ? std::sqrt(lam(i)) : 0.0;
  return out;
}

} // namespace

double state_fidelity(const CMat &rho, const CMat &sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols() || rho.rows() != rho.cols())
    throw DomainError("state_fidelity: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (rho + rho.adjoint()));
  const RVec lam = clean_sqrt(es.eigenvalues());
  const CMat sq = es.eigenvectors() * lam.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  const CMat m = sq * sigma * sq;
  Eigen::SelfAdjointEigenSolver<CMat> em(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  const double s = clean_sqrt(em.eigenvalues()).sum();
  return s * s;
}

} // namespace geophase
