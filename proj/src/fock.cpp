#include "geophase/fock.hpp"

#include "geophase/diagnostics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace geophase {

ModeSpec ModeSpec::bosonic(int dim) {
  if (dim < 2)
    throw DomainError("bosonic mode needs dim >= 2");
  return {ModeKind::bosonic, dim};
}

ModeSpec ModeSpec::qubit() { return {ModeKind::qubit, 2}; }

CompositeSpace::CompositeSpace(std::vector<ModeSpec> factors)
    : factors_(std::move(factors)) {
  for (const auto &f : factors_) {
    if (f.dim < 2)
      throw DomainError("mode dimension must be >= 2");
    if (f.kind == ModeKind::qubit && f.dim != 2)
      throw DomainError("qubit mode must have dim 2");
    total_ *= f.dim;
  }
}

Eigen::Index CompositeSpace::stride(std::size_t i) const {
  Eigen::Index s = 1;
  for (std::size_t j = i + 1; j < factors_.size(); ++j)
    s *= factors_[j].dim;
  return s;
}

Eigen::Index CompositeSpace::joint_index(std::span<const int> levels) const {
  if (levels.size() != factors_.size())
    throw DomainError("joint_index: wrong number of levels");
  Eigen::Index idx = 0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 0 || levels[i] >= factors_[i].dim)
      throw DomainError("joint_index: level out of range");
    idx = idx * factors_[i].dim + levels[i];
  }
  return idx;
}

std::vector<int> CompositeSpace::levels(Eigen::Index joint) const {
  std::vector<int> out(factors_.size());
  for (std::size_t i = factors_.size(); i-- > 0;) {
    out[i] = static_cast<int>(joint % factors_[i].dim);
    joint /= factors_[i].dim;
  }
  return out;
}

// ---------------------------------------------------------------------------

LinearOp::LinearOp(CompositeSpace space, CMat matrix)
    : space_(std::move(space)), matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols())
    throw DomainError("LinearOp must be square");
  if (matrix_.rows() != space_.total_dim())
    throw DomainError("LinearOp dimension does not match its space");
}

LinearOp LinearOp::adjoint() const { return {space_, matrix_.adjoint()}; }

bool LinearOp::is_hermitian(double tol) const {
  return (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() < tol;
}

bool LinearOp::is_unitary(double tol) const {
  CMat d = matrix_.adjoint() * matrix_ - CMat::Identity(dim(), dim());
  return d.cwiseAbs().maxCoeff() < tol;
}

bool LinearOp::is_diagonal(double tol) const {
  for (Eigen::Index j = 0; j < matrix_.cols(); ++j)
    for (Eigen::Index i = 0; i < matrix_.rows(); ++i)
      if (i != j && std::abs(matrix_(i, j)) > tol)
        return false;
  return true;
}

namespace {
void require_same(const CompositeSpace &a, const CompositeSpace &b,
                  const char *what) {
  if (!(a == b))
    throw DomainError(std::string(what) + ": space mismatch");
}
} // namespace

LinearOp operator*(const LinearOp &a, const LinearOp &b) {
  require_same(a.space_, b.space_, "operator*");
  return {a.space_, a.matrix_ * b.matrix_};
}

LinearOp operator+(const LinearOp &a, const LinearOp &b) {
  require_same(a.space_, b.space_, "operator+");
  return {a.space_, a.matrix_ + b.matrix_};
}

LinearOp operator-(const LinearOp &a, const LinearOp &b) {
  require_same(a.space_, b.space_, "operator-");
  return {a.space_, a.matrix_ - b.matrix_};
}

LinearOp operator*(cplx s, const LinearOp &a) { return {a.space_, s * a.matrix_}; }

// ---------------------------------------------------------------------------

Ket::Ket(CompositeSpace space, CVec amplitudes)
    : space_(std::move(space)), amps_(std::move(amplitudes)) {
  if (amps_.size() != space_.total_dim())
    throw DomainError("Ket dimension does not match its space");
}

Ket Ket::normalized(CompositeSpace space, CVec amplitudes) {
  const double n = amplitudes.norm();
  if (n == 0.0)
    throw DomainError("cannot normalize the zero vector");
  return {std::move(space), amplitudes / n};
}

Ket operator*(const LinearOp &op, const Ket &k) {
  require_same(op.space(), k.space_, "LinearOp*Ket");
  return {k.space_, op.matrix() * k.amps_};
}

DensityOp::DensityOp(CompositeSpace space, CMat matrix)
    : space_(std::move(space)), matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() != space_.total_dim())
    throw DomainError("DensityOp dimension does not match its space");
}

DensityOp DensityOp::from_ket(const Ket &k) {
  return {k.space(), k.amplitudes() * k.amplitudes().adjoint()};
}

double DensityOp::purity() const { return (matrix_ * matrix_).trace().real(); }

bool DensityOp::is_physical(double tol) const {
  if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() > tol)
    return false;
  if (std::abs(matrix_.trace() - 1.0) > tol)
    return false;
  Eigen::SelfAdjointEigenSolver<CMat> es(matrix_, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

// ---------------------------------------------------------------------------

namespace {

void require_bosonic(const ModeSpec &spec, const char *what) {
  if (!spec.is_bosonic())
    throw DomainError(std::string(what) + " requires a bosonic mode");
}

LinearOp single(const ModeSpec &spec, CMat m) {
  return {CompositeSpace{spec}, std::move(m)};
}

CMat qubit_matrix(cplx a00, cplx a01, cplx a10, cplx a11) {
  CMat m(2, 2);
  m << a00, a01, a10, a11;
  return m;
}

} // namespace

LinearOp identity(const CompositeSpace &space) {
  return {space, CMat::Identity(space.total_dim(), space.total_dim())};
}

LinearOp annihilation(const ModeSpec &spec) {
  require_bosonic(spec, "annihilation");
  CMat a = CMat::Zero(spec.dim, spec.dim);
  for (int n = 1; n < spec.dim; ++n)
    a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return single(spec, std::move(a));
}

LinearOp creation(const ModeSpec &spec) { return annihilation(spec).adjoint(); }

LinearOp number_op(const ModeSpec &spec) {
  require_bosonic(spec, "number_op");
  CMat n = CMat::Zero(spec.dim, spec.dim);
  for (int k = 0; k < spec.dim; ++k)
    n(k, k) = k;
  return single(spec, std::move(n));
}

LinearOp parity_op(const ModeSpec &spec) {
  require_bosonic(spec, "parity_op");
  CMat p = CMat::Zero(spec.dim, spec.dim);
  for (int k = 0; k < spec.dim; ++k)
    p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
  return single(spec, std::move(p));
}

LinearOp displacement(cplx alpha, const ModeSpec &spec) {
  require_bosonic(spec, "displacement");
  if (std::norm(alpha) > spec.dim / 4.0) {
    std::ostringstream os;
    os << "displacement |alpha|^2 = " << std::norm(alpha)
       << " exceeds dim/4 for dim " << spec.dim;
    warn(os.str());
  }
  // alpha a^dag - alpha^* a = -i H with H = i(alpha a^dag - alpha^* a) hermitian.
  const CMat a = annihilation(spec).matrix();
  const CMat h = I_UNIT * (alpha * a.adjoint() - std::conj(alpha) * a);
  return single(spec, expm_hermitian(h, 1.0));
}

LinearOp sigma_plus() {
  return single(ModeSpec::qubit(), qubit_matrix(0, 0, 1, 0));
}
LinearOp sigma_minus() {
  return single(ModeSpec::qubit(), qubit_matrix(0, 1, 0, 0));
}
LinearOp sigma_x() {
  return single(ModeSpec::qubit(), qubit_matrix(0, 1, 1, 0));
}
LinearOp sigma_y() {
  return single(ModeSpec::qubit(), qubit_matrix(0, -I_UNIT, I_UNIT, 0));
}
LinearOp sigma_z() {
  return single(ModeSpec::qubit(), qubit_matrix(1, 0, 0, -1));
}
LinearOp excited_projector() {
  return single(ModeSpec::qubit(), qubit_matrix(0, 0, 0, 1));
}

Ket fock(int n, const ModeSpec &spec) {
  if (n < 0 || n >= spec.dim)
    throw DomainError("fock: level outside truncation");
  CVec v = CVec::Zero(spec.dim);
  v(n) = 1.0;
  return {CompositeSpace{spec}, std::move(v)};
}

Ket coherent(cplx alpha, const ModeSpec &spec) {
  require_bosonic(spec, "coherent");
  CVec v(spec.dim);
  // Recurrence c_n = c_{n-1} alpha / sqrt(n) avoids factorial overflow.
  cplx c = std::exp(-0.5 * std::norm(alpha));
  v(0) = c;
  for (int n = 1; n < spec.dim; ++n) {
    c *= alpha / std::sqrt(static_cast<double>(n));
    v(n) = c;
  }
  return Ket::normalized(CompositeSpace{spec}, std::move(v));
}

Ket basis_ket(const CompositeSpace &space, std::span<const int> levels) {
  CVec v = CVec::Zero(space.total_dim());
  v(space.joint_index(levels)) = 1.0;
  return {space, std::move(v)};
}

// ---------------------------------------------------------------------------

namespace {

CMat kron(const CMat &a, const CMat &b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CVec kron(const CVec &a, const CVec &b) {
  CVec out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

std::vector<ModeSpec> concat(const CompositeSpace &a, const CompositeSpace &b) {
  std::vector<ModeSpec> f = a.factors();
  f.insert(f.end(), b.factors().begin(), b.factors().end());
  return f;
}

} // namespace

LinearOp tensor(const LinearOp &a, const LinearOp &b) {
  return {CompositeSpace(concat(a.space(), b.space())), kron(a.matrix(), b.matrix())};
}

Ket tensor(const Ket &a, const Ket &b) {
  return {CompositeSpace(concat(a.space(), b.space())),
          kron(a.amplitudes(), b.amplitudes())};
}

DensityOp tensor(const DensityOp &a, const DensityOp &b) {
  return {CompositeSpace(concat(a.space(), b.space())), kron(a.matrix(), b.matrix())};
}

LinearOp tensor(std::span<const LinearOp> ops) {
  if (ops.empty())
    throw DomainError("tensor of an empty list");
  LinearOp out = ops[0];
  for (std::size_t i = 1; i < ops.size(); ++i)
    out = tensor(out, ops[i]);
  return out;
}

Ket tensor(std::span<const Ket> kets) {
  if (kets.empty())
    throw DomainError("tensor of an empty list");
  Ket out = kets[0];
  for (std::size_t i = 1; i < kets.size(); ++i)
    out = tensor(out, kets[i]);
  return out;
}

DensityOp tensor(std::span<const DensityOp> rhos) {
  if (rhos.empty())
    throw DomainError("tensor of an empty list");
  DensityOp out = rhos[0];
  for (std::size_t i = 1; i < rhos.size(); ++i)
    out = tensor(out, rhos[i]);
  return out;
}

LinearOp embed(const LinearOp &op, std::size_t factor_index,
               const CompositeSpace &space) {
  if (factor_index >= space.size())
    throw DomainError("embed: factor index out of range");
  if (op.dim() != space.dim(factor_index))
    throw DomainError("embed: operator dimension does not match factor");
  const Eigen::Index left = space.total_dim() / (space.dim(factor_index) * space.stride(factor_index));
  const Eigen::Index right = space.stride(factor_index);
  CMat m = kron(kron(CMat::Identity(left, left), op.matrix()),
                CMat::Identity(right, right));
  return {space, std::move(m)};
}

CVec apply_local(const CMat &local, std::size_t factor_index,
                 const CompositeSpace &space, const CVec &v) {
  if (factor_index >= space.size() || local.rows() != space.dim(factor_index))
    throw DomainError("apply_local: dimension mismatch");
  if (v.size() != space.total_dim())
    throw DomainError("apply_local: vector dimension mismatch");
  const Eigen::Index d = space.dim(factor_index);
  const Eigen::Index right = space.stride(factor_index);
  const Eigen::Index left = space.total_dim() / (d * right);
  CVec out(v.size());
  // For each outer block, the factor index selects a d x right slab.
  for (Eigen::Index l = 0; l < left; ++l) {
    Eigen::Map<const CMat> in(v.data() + l * d * right, right, d);
    Eigen::Map<CMat> res(out.data() + l * d * right, right, d);
    res.noalias() = in * local.transpose();
  }
  return out;
}

cplx expectation(const Ket &state, const LinearOp &op) {
  require_same(state.space(), op.space(), "expectation");
  return state.amplitudes().dot(op.matrix() * state.amplitudes());
}

cplx expectation(const DensityOp &state, const LinearOp &op) {
  require_same(state.space(), op.space(), "expectation");
  return (state.matrix() * op.matrix()).trace();
}

DensityOp partial_trace(const DensityOp &rho, std::span<const std::size_t> keep) {
  const CompositeSpace &sp = rho.space();
  std::vector<std::size_t> kept(keep.begin(), keep.end());
  std::sort(kept.begin(), kept.end());
  if (std::adjacent_find(kept.begin(), kept.end()) != kept.end())
    throw DomainError("partial_trace: duplicate index");
  for (auto k : kept)
    if (k >= sp.size())
      throw DomainError("partial_trace: index out of range");
  if (kept.empty())
    throw DomainError("partial_trace: nothing kept");

  std::vector<ModeSpec> kept_specs;
  std::vector<bool> is_kept(sp.size(), false);
  for (auto k : kept) {
    kept_specs.push_back(sp[k]);
    is_kept[k] = true;
  }
  CompositeSpace out_space(kept_specs);
  const Eigen::Index n = sp.total_dim();

  // Map each joint index to (kept index, traced index).
  std::vector<Eigen::Index> kidx(n), tidx(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto lv = sp.levels(j);
    Eigen::Index ki = 0, ti = 0;
    for (std::size_t f = 0; f < sp.size(); ++f) {
      if (is_kept[f])
        ki = ki * sp.dim(f) + lv[f];
      else
        ti = ti * sp.dim(f) + lv[f];
    }
    kidx[j] = ki;
    tidx[j] = ti;
  }
  CMat out = CMat::Zero(out_space.total_dim(), out_space.total_dim());
  const CMat &m = rho.matrix();
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r)
      if (tidx[r] == tidx[c])
        out(kidx[r], kidx[c]) += m(r, c);
  return {out_space, std::move(out)};
}

DensityOp partial_trace(const Ket &psi, std::span<const std::size_t> keep) {
  const CompositeSpace &sp = psi.space();
  std::vector<std::size_t> kept(keep.begin(), keep.end());
  std::sort(kept.begin(), kept.end());
  for (auto k : kept)
    if (k >= sp.size())
      throw DomainError("partial_trace: index out of range");
  if (kept.empty() || std::adjacent_find(kept.begin(), kept.end()) != kept.end())
    throw DomainError("partial_trace: invalid keep set");
  std::vector<bool> is_kept(sp.size(), false);
  std::vector<ModeSpec> kept_specs;
  Eigen::Index dk = 1;
  for (auto k : kept) {
    is_kept[k] = true;
    kept_specs.push_back(sp[k]);
    dk *= sp.dim(k);
  }
  const Eigen::Index dt = sp.total_dim() / dk;
  // Reshape psi into a dk x dt matrix M; reduced state is M M^dag.
  CMat m = CMat::Zero(dk, dt);
  for (Eigen::Index j = 0; j < sp.total_dim(); ++j) {
    const auto lv = sp.levels(j);
    Eigen::Index ki = 0, ti = 0;
    for (std::size_t f = 0; f < sp.size(); ++f) {
      if (is_kept[f])
        ki = ki * sp.dim(f) + lv[f];
      else
        ti = ti * sp.dim(f) + lv[f];
    }
    m(ki, ti) = psi.amplitudes()(j);
  }
  return {CompositeSpace(kept_specs), m * m.adjoint()};
}

CMat expm_hermitian(const CMat &h, double t) {
  if (t == 0.0)
    return CMat::Identity(h.rows(), h.cols());
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  const RVec &e = es.eigenvalues();
  CVec phases(e.size());
  for (Eigen::Index k = 0; k < e.size(); ++k)
    phases(k) = std::exp(-I_UNIT * e(k) * t);
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

int recommended_dim(double alpha_max) {
  const double a = std::abs(alpha_max);
  return static_cast<int>(std::ceil(a * a + 6.0 * a + 5.0));
}

double fidelity_pure(const Ket &a, const Ket &b) {
  require_same(a.space(), b.space(), "fidelity_pure");
  return std::norm(a.amplitudes().dot(b.amplitudes()));
}

} // namespace geophase
