#pragma once

// Classical measurement model: assignment matrices, inversion-based
// correction and multinomial shot sampling.

#include "geophase/device.hpp"
#include "geophase/fock.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace geophase {

// Columns: prepared basis state; rows: assigned outcome. R is column
// stochastic; `raw` keeps the table exactly as loaded.
struct AssignmentMatrix {
  int n_qubits = 1;
  RMat R;
  RMat raw;
  double condition_number = 1.0;
  std::vector<std::string> outcome_labels; // "000", "001", ...
  std::vector<std::string> state_labels;   // "ggg", "gge", ...
};

// Validates and column-normalizes a 2^n x 2^n table. Columns off by more
// than `sum_tolerance` trigger a warning. Throws DomainError on negative
// entries, wrong shape or a singular matrix.
AssignmentMatrix make_assignment(const RMat &table, double sum_tolerance = 5e-3);

// CSV with a header "outcome,ggg,...", one row per outcome label. Lines
// starting with '#' are comments. Entries are probabilities.
AssignmentMatrix parse_assignment_csv(const std::string &text);
AssignmentMatrix load_assignment(const std::filesystem::path &path);
// Bundled table_s3.csv.
AssignmentMatrix default_assignment();
AssignmentMatrix identity_assignment(int n_qubits);
// Joint matrix of independent per-qubit 2x2 matrices, first qubit most
// significant.
AssignmentMatrix kron_assignment(const std::vector<Eigen::Matrix2d> &per_qubit);

// Assignment of the kept qubits (in the listed order, indices into the
// matrix's qubits) with every other qubit prepared in |g> and its outcome
// discarded.
AssignmentMatrix marginal_assignment(const AssignmentMatrix &a, const std::vector<int> &keep);

std::string outcome_label(int index, int n_qubits);
std::string state_label(int index, int n_qubits);

enum class CorrectionMode { raw, simplex };

struct CorrectionReport {
  bool negative = false;     // some raw component fell below -tolerance
  double min_component = 0.0; // of the raw inverse
};

// R^{-1} p; in simplex mode a negative result is projected onto the
// probability simplex (Euclidean).
RVec correct_readout(const RVec &p_measured, const AssignmentMatrix &a,
                     CorrectionMode mode = CorrectionMode::raw, CorrectionReport *report = nullptr,
                     double tolerance = 1e-12);

RVec project_to_simplex(const RVec &v);

// Multinomial draw of `shots` outcomes from R p_true.
std::vector<long long> sample_assignment(const RVec &p_true, const AssignmentMatrix &a,
                                         long long shots, std::uint64_t seed);

// Computational-basis distribution of the listed qubits (first label most
// significant).
RVec qubit_measurement_probs(const DensityOp &rho, const SystemLayout &layout,
                             const std::vector<std::string> &qubits);
RVec qubit_measurement_probs(const Ket &psi, const SystemLayout &layout,
                             const std::vector<std::string> &qubits);

} // namespace geophase
