#pragma once

// Phase-space and qubit tomography: Wigner functions, pre-rotation
// tomography with maximum-likelihood reconstruction, Pauli transfer
// matrices and fidelities.

#include "geophase/device.hpp"
#include "geophase/fock.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace geophase {

// <n| D(beta) P D(beta)^dag |m> for n, m < dim, from the closed-form
// displacement matrix elements (no truncation of the displacement itself).
CMat displaced_parity(cplx beta, int dim);

// W(beta) = (2/pi) <D P D^dag> of a single-mode state.
double wigner(const DensityOp &cavity_state, cplx beta);
// Same, on the reduced state of one cavity of a composite system.
double wigner(const DensityOp &rho, const SystemLayout &layout, const std::string &cavity,
              cplx beta);
double wigner(const Ket &psi, const SystemLayout &layout, const std::string &cavity, cplx beta);

// Joint displaced parity P_J = <P1(beta1) (x) P2(beta2)> in [-1, 1];
// `scaled` multiplies by (2/pi)^2.
double joint_wigner(const DensityOp &rho, const SystemLayout &layout, const std::string &cavity1,
                    const std::string &cavity2, cplx beta1, cplx beta2, bool scaled = false);

struct GridAxis {
  double min = -3.0;
  double max = 3.0;
  int points = 61;
  double step() const;
  double value(int i) const;
};

// values[i * y.points + j] is the value at (x.value(i), y.value(j)).
struct WignerGrid {
  std::string x_label = "re";
  std::string y_label = "im";
  GridAxis x, y;
  std::vector<double> values;

  double at(int i, int j) const { return values[static_cast<std::size_t>(i * y.points + j)]; }
  // Riemann sum over the grid.
  double integral() const;
  std::string to_csv() const;
  std::string to_json() const;
};

// Single-mode map over beta = x + i y. Warns once when the grid reaches
// beyond the truncated phase-space region.
WignerGrid wigner_grid(const DensityOp &cavity_state, const GridAxis &re, const GridAxis &im);

enum class JointCut { real, imag };
// Joint parity on the plane (beta1, beta2) = (x, y) for the real cut or
// (i x, i y) for the imaginary cut.
WignerGrid joint_wigner_cut(const DensityOp &rho, const SystemLayout &layout,
                            const std::string &cavity1, const std::string &cavity2,
                            JointCut cut, const GridAxis &axis, bool scaled = false);

// ---------------------------------------------------------------------------
// Qubit tomography

enum class PreRotation { I, X90, Y90, X180 };
const std::array<PreRotation, 4> &standard_pre_rotations();
Eigen::Matrix2cd pre_rotation_matrix(PreRotation r);
std::string to_string(PreRotation r);

// One row per setting (a pre-rotation per qubit), one column per
// computational outcome in joint-index order.
struct ProbabilityTable {
  int n_qubits = 1;
  std::vector<std::vector<PreRotation>> settings;
  RMat probs;
};

// All 4^n settings in lexicographic order.
std::vector<std::vector<PreRotation>> all_settings(int n_qubits);

ProbabilityTable tomo_probabilities(const CMat &rho, int n_qubits);
ProbabilityTable tomo_probabilities(const CMat &rho, int n_qubits,
                                    const std::vector<std::vector<PreRotation>> &settings);

struct MleOptions {
  int max_iterations = 5000;
  double gradient_tolerance = 1e-9;
};

struct MleReport {
  int iterations = 0;
  double gradient_norm = 0.0;
  double log_likelihood = 0.0;
  bool converged = false;
};

// rho = T^dag T / Tr(T^dag T) maximizing sum shots * p_obs log p(rho).
// Throws NumericalError if the optimizer stalls far from a stationary point.
CMat mle_density(const ProbabilityTable &table, double shots, const MleOptions &options = {},
                 MleReport *report = nullptr);

// ---------------------------------------------------------------------------
// Process characterization

// {I, X, Y, Z}^(x)n in lexicographic order, and their labels ("IX", ...).
std::vector<CMat> pauli_basis(int n_qubits);
std::vector<std::string> pauli_labels(int n_qubits);

struct TransferMatrix {
  int n_qubits = 1;
  RMat R;

  std::string to_json() const;
  static TransferMatrix from_json(const std::string &text);
};

using Channel = std::function<CMat(const CMat &)>;

// Input density matrices {|g>, |e>, (|g>+|e>)/sqrt2, (|g>-i|e>)/sqrt2}^(x)n.
std::vector<CMat> qpt_input_states(int n_qubits);

// R = P_out P_in^{-1}, where column k of P_in/P_out holds the Pauli
// expectations Tr(P_i rho_k) of the k-th input state before/after the channel.
TransferMatrix pauli_transfer(const Channel &channel, int n_qubits);
TransferMatrix pauli_transfer(const CMat &unitary);

// F = (Tr(R^T R_ideal)/d + 1)/(d + 1) with d = 2^n.
double process_fidelity(const TransferMatrix &r, const TransferMatrix &ideal);

// (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
double state_fidelity(const CMat &rho, const CMat &sigma);

} // namespace geophase
