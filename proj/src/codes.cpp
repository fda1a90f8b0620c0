#include "geophase/codes.hpp"

#include "geophase/diagnostics.hpp"

#include <cmath>
#include <sstream>

namespace geophase {

namespace {

Ket displaced_vacuum(cplx beta, const ModeSpec &spec) {
  return Ket::normalized(CompositeSpace{spec},
                         (displacement(beta, spec) * fock(0, spec)).amplitudes());
}

Encoding make_encoding(std::string name, const ModeSpec &spec, Ket zero, Ket one) {
  const cplx s = zero.amplitudes().dot(one.amplitudes());
  if (std::abs(s) > 1.0 - 1e-9)
    throw DomainError(name + ": logical basis states are degenerate");
  if (std::abs(s) >= 0.05) {
    std::ostringstream os;
    os << name << ": logical overlap |s| = " << std::abs(s)
       << " exceeds 0.05; gate workflows assume near-orthogonal logicals";
    warn(os.str());
  }
  return {std::move(name), spec, std::move(zero), std::move(one), s};
}

} // namespace

Ket Encoding::code_zero() const {
  if (overlap == cplx(0.0))
    return zero;
  const CVec &o = one.amplitudes();
  CVec v = zero.amplitudes() - o * o.dot(zero.amplitudes());
  return Ket::normalized(zero.space(), v);
}

Encoding cat_encoding(cplx alpha, int dim, CatVariant variant) {
  const ModeSpec spec = ModeSpec::bosonic(dim);
  if (variant == CatVariant::symmetric)
    return make_encoding("cat", spec, displaced_vacuum(alpha, spec),
                         displaced_vacuum(-alpha, spec));
  return make_encoding("shifted-cat", spec, displaced_vacuum(2.0 * alpha, spec), fock(0, spec));
}

Encoding binomial_encoding(int dim) {
  if (dim < 5)
    throw DomainError("binomial_encoding: dim must be >= 5");
  const ModeSpec spec = ModeSpec::bosonic(dim);
  CVec z = CVec::Zero(dim);
  z(0) = z(4) = 1.0 / std::sqrt(2.0);
  return make_encoding("binomial", spec, Ket(CompositeSpace{spec}, z), fock(2, spec));
}

Ket logical_ket(const Encoding &enc, cplx c0, cplx c1) {
  if (c0 == cplx(0.0) && c1 == cplx(0.0))
    throw DomainError("logical_ket: zero amplitude vector");
  // |v|^2 = |c0|^2 + |c1|^2 + 2 Re(c0* c1 s); normalize through the Gram matrix.
  const double n2 = std::norm(c0) + std::norm(c1) + 2.0 * (std::conj(c0) * c1 * enc.overlap).real();
  CVec v = c0 * enc.zero.amplitudes() + c1 * enc.one.amplitudes();
  return {enc.zero.space(), v / std::sqrt(n2)};
}

Ket code_ket(const Encoding &enc, cplx c0, cplx c1) {
  if (c0 == cplx(0.0) && c1 == cplx(0.0))
    throw DomainError("code_ket: zero amplitude vector");
  const double n = std::sqrt(std::norm(c0) + std::norm(c1));
  CVec v = (c0 * enc.code_zero().amplitudes() + c1 * enc.one.amplitudes()) / n;
  return {enc.zero.space(), v};
}

CMat complete_unitary(const CMat &fixed_columns, const std::vector<Eigen::Index> &positions) {
  const Eigen::Index n = fixed_columns.rows();
  if (static_cast<Eigen::Index>(positions.size()) != fixed_columns.cols())
    throw DomainError("complete_unitary: one position per fixed column");
  CMat basis(n, n); // orthonormal columns accumulated in order found
  Eigen::Index filled = 0;
  for (Eigen::Index j = 0; j < fixed_columns.cols(); ++j)
    basis.col(filled++) = fixed_columns.col(j);
  if ((basis.leftCols(filled).adjoint() * basis.leftCols(filled) -
       CMat::Identity(filled, filled))
          .cwiseAbs()
          .maxCoeff() > 1e-10)
    throw DomainError("complete_unitary: fixed columns are not orthonormal");
  for (Eigen::Index k = 0; k < n && filled < n; ++k) {
    CVec v = CVec::Unit(n, k);
    for (int pass = 0; pass < 2; ++pass)
      v -= basis.leftCols(filled) * (basis.leftCols(filled).adjoint() * v);
    const double norm = v.norm();
    if (norm > 1e-6)
      basis.col(filled++) = v / norm;
  }
  if (filled != n)
    throw NumericalError("complete_unitary: could not complete the basis");

  CMat u(n, n);
  std::vector<bool> used(n, false);
  for (std::size_t j = 0; j < positions.size(); ++j) {
    if (positions[j] < 0 || positions[j] >= n || used[positions[j]])
      throw DomainError("complete_unitary: invalid or repeated position");
    used[positions[j]] = true;
    u.col(positions[j]) = basis.col(static_cast<Eigen::Index>(j));
  }
  Eigen::Index next = static_cast<Eigen::Index>(positions.size());
  for (Eigen::Index c = 0; c < n; ++c)
    if (!used[c])
      u.col(c) = basis.col(next++);
  return u;
}

LinearOp ideal_encoder(const Encoding &enc) {
  const CompositeSpace sp{ModeSpec::qubit(), enc.cavity};
  const Ket g = fock(0, ModeSpec::qubit());
  CMat fixed(sp.total_dim(), 2);
  fixed.col(0) = tensor(g, enc.code_zero()).amplitudes();
  fixed.col(1) = tensor(g, enc.code_one()).amplitudes();
  const std::array<int, 2> g0{0, 0}, e0{1, 0};
  return {sp, complete_unitary(fixed, {sp.joint_index(g0), sp.joint_index(e0)})};
}

LinearOp kerr_free_evolution(const ModeSpec &cavity, double kerr, double duration) {
  if (!cavity.is_bosonic())
    throw DomainError("kerr_free_evolution: cavity mode required");
  CVec d(cavity.dim);
  for (int n = 0; n < cavity.dim; ++n)
    d(n) = std::exp(I_UNIT * 0.5 * kerr * duration * double(n) * double(n - 1));
  return {CompositeSpace{cavity}, d.asDiagonal()};
}

LinearOp compensated_decoder(const Encoding &enc, const LinearOp &cavity_evolution) {
  if (!(cavity_evolution.space() == CompositeSpace{enc.cavity}))
    throw DomainError("compensated_decoder: evolution must act on the code cavity");
  const LinearOp undo = tensor(identity(CompositeSpace{ModeSpec::qubit()}),
                               cavity_evolution.adjoint());
  return ideal_encoder(enc).adjoint() * undo;
}

LinearOp kerr_corrected_decoder(const Encoding &enc, double kerr, double duration) {
  return compensated_decoder(enc, kerr_free_evolution(enc.cavity, kerr, duration));
}

} // namespace geophase
