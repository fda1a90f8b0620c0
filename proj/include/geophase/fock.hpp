#pragma once

// Dense complex linear algebra over truncated bosonic modes and two-level
// systems. All objects are immutable values; factor order is fixed by the
// CompositeSpace they carry and must match across every expression.

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace geophase {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr cplx I_UNIT{0.0, 1.0};

enum class ModeKind { bosonic, qubit };

struct ModeSpec {
  ModeKind kind = ModeKind::bosonic;
  int dim = 2;

  static ModeSpec bosonic(int dim);
  static ModeSpec qubit();

  bool is_bosonic() const { return kind == ModeKind::bosonic; }
  bool operator==(const ModeSpec &) const = default;
};

class CompositeSpace {
public:
  CompositeSpace() = default;
  explicit CompositeSpace(std::vector<ModeSpec> factors);
  CompositeSpace(std::initializer_list<ModeSpec> factors)
      : CompositeSpace(std::vector<ModeSpec>(factors)) {}

  const std::vector<ModeSpec> &factors() const { return factors_; }
  std::size_t size() const { return factors_.size(); }
  const ModeSpec &operator[](std::size_t i) const { return factors_.at(i); }
  int dim(std::size_t i) const { return factors_.at(i).dim; }
  Eigen::Index total_dim() const { return total_; }

  // Row-major joint index: the first factor is the most significant digit.
  Eigen::Index joint_index(std::span<const int> levels) const;
  std::vector<int> levels(Eigen::Index joint) const;
  Eigen::Index stride(std::size_t i) const;

  bool operator==(const CompositeSpace &o) const { return factors_ == o.factors_; }

private:
  std::vector<ModeSpec> factors_;
  Eigen::Index total_ = 1;
};

class LinearOp {
public:
  LinearOp(CompositeSpace space, CMat matrix);

  const CompositeSpace &space() const { return space_; }
  const CMat &matrix() const { return matrix_; }
  Eigen::Index dim() const { return matrix_.rows(); }

  LinearOp adjoint() const;
  bool is_hermitian(double tol = 1e-12) const;
  bool is_unitary(double tol = 1e-8) const;
  bool is_diagonal(double tol = 0.0) const;

  friend LinearOp operator*(const LinearOp &a, const LinearOp &b);
  friend LinearOp operator+(const LinearOp &a, const LinearOp &b);
  friend LinearOp operator-(const LinearOp &a, const LinearOp &b);
  friend LinearOp operator*(cplx s, const LinearOp &a);

private:
  CompositeSpace space_;
  CMat matrix_;
};

class Ket {
public:
  Ket(CompositeSpace space, CVec amplitudes);
  // Rescales to unit norm; throws on the zero vector.
  static Ket normalized(CompositeSpace space, CVec amplitudes);

  const CompositeSpace &space() const { return space_; }
  const CVec &amplitudes() const { return amps_; }
  double norm() const { return amps_.norm(); }

  friend Ket operator*(const LinearOp &op, const Ket &k);

private:
  CompositeSpace space_;
  CVec amps_;
};

class DensityOp {
public:
  DensityOp(CompositeSpace space, CMat matrix);
  static DensityOp from_ket(const Ket &k);

  const CompositeSpace &space() const { return space_; }
  const CMat &matrix() const { return matrix_; }
  cplx trace() const { return matrix_.trace(); }
  double purity() const;

  // Hermitian, unit trace, eigenvalues >= -tol.
  bool is_physical(double tol = 1e-9) const;

private:
  CompositeSpace space_;
  CMat matrix_;
};

// Single-mode operators; the returned LinearOp lives on CompositeSpace{spec}.
LinearOp identity(const CompositeSpace &space);
LinearOp annihilation(const ModeSpec &spec);
LinearOp creation(const ModeSpec &spec);
LinearOp number_op(const ModeSpec &spec);
LinearOp parity_op(const ModeSpec &spec);
LinearOp displacement(cplx alpha, const ModeSpec &spec);

// Qubit operators in the (|g>, |e>) basis; sigma_plus = |e><g|.
LinearOp sigma_plus();
LinearOp sigma_minus();
LinearOp sigma_x();
LinearOp sigma_y();
LinearOp sigma_z(); // diag(+1, -1)
LinearOp excited_projector();

Ket fock(int n, const ModeSpec &spec);
Ket coherent(cplx alpha, const ModeSpec &spec);
Ket basis_ket(const CompositeSpace &space, std::span<const int> levels);

// Kronecker products in the listed order.
LinearOp tensor(std::span<const LinearOp> ops);
Ket tensor(std::span<const Ket> kets);
DensityOp tensor(std::span<const DensityOp> rhos);
LinearOp tensor(const LinearOp &a, const LinearOp &b);
Ket tensor(const Ket &a, const Ket &b);
DensityOp tensor(const DensityOp &a, const DensityOp &b);

// Lift a single-factor operator into `space`, identity elsewhere.
LinearOp embed(const LinearOp &op, std::size_t factor_index,
               const CompositeSpace &space);

cplx expectation(const Ket &state, const LinearOp &op);
cplx expectation(const DensityOp &state, const LinearOp &op);

DensityOp partial_trace(const DensityOp &rho, std::span<const std::size_t> keep);
DensityOp partial_trace(const Ket &psi, std::span<const std::size_t> keep);

// Apply a single-factor matrix to a joint vector without forming the
// embedded operator.
CVec apply_local(const CMat &local, std::size_t factor_index,
                 const CompositeSpace &space, const CVec &v);

// exp(-i H t) for hermitian H via eigendecomposition.
CMat expm_hermitian(const CMat &h, double t);

// Default truncation for workflows with peak coherent amplitude |alpha_max|:
// ceil(|a|^2 + 6|a| + 5).
int recommended_dim(double alpha_max);

double fidelity_pure(const Ket &a, const Ket &b);

} // namespace geophase
