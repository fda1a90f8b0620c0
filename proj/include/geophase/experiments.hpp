#pragma once

// End-to-end experiment recipes: parity sweeps, repeated-gate decay, process
// tomography, Bell-state generation, error budgets and the two-cavity SNAP.

#include "geophase/codes.hpp"
#include "geophase/device.hpp"
#include "geophase/gates.hpp"
#include "geophase/readout.hpp"
#include "geophase/tomography.hpp"

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace geophase {

enum class SimMode { ideal, pulse, pulse_decoherence };

std::string to_string(SimMode m);
// "ideal", "pulse", "pulse+decoherence"; throws DomainError otherwise.
SimMode parse_mode(const std::string &text);

struct ExperimentContext {
  DeviceParams params = default_device();
  std::string config_hash;
  std::uint64_t seed = 1;
  SimMode mode = SimMode::ideal;
  std::optional<int> dim;         // cavity truncation override
  std::optional<long long> shots; // sampled tomography through the readout model
  AssignmentMatrix readout = default_assignment();
  // Ideal encode/decode maps are followed/preceded by an idle of this length
  // (ns) when decoherence is on; stands in for the optimal-control pulses.
  double encode_duration = 500.0;
};

// Hex SHA-1 of the configuration text.
std::string config_hash(const std::string &config_text);

struct Table {
  Table(std::string name, std::vector<std::string> columns,
        std::vector<std::vector<double>> rows = {})
      : name(std::move(name)), columns(std::move(columns)), rows(std::move(rows)) {}

  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  // Optional leading string column (one label per row).
  std::string label_column;
  std::vector<std::string> labels;

  // %.17g, header line first.
  std::string to_csv() const;
};

enum class Check { none, at_least, at_most, near };

// A reported number with the bound it was checked against.
struct Scalar {
  std::string name;
  double value = 0.0;
  Check check = Check::none;
  double bound = 0.0;     // threshold, or target for `near`
  double tolerance = 0.0; // for `near`
  std::optional<double> measured; // experimental value, quoted for reference only
  std::string note;

  bool passed() const;
};

Scalar info(std::string name, double value, std::string note = {});
Scalar at_least(std::string name, double value, double bound);
Scalar at_most(std::string name, double value, double bound);
Scalar near(std::string name, double value, double target, double tolerance);

struct ExperimentResult {
  std::string name;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<Table> tables;
  std::vector<Scalar> scalars;
  std::vector<TransferMatrix> transfer_matrices;
  std::string config_hash;
  std::uint64_t seed = 0;

  const Scalar &scalar(const std::string &name) const;
  const Table &table(const std::string &name) const;
  bool passed() const; // every checked scalar
  std::string to_json() const;
};

// Sampled n-qubit state tomography of `rho`: shots per setting through the
// assignment model, readout-corrected (simplex) frequencies, then MLE.
CMat sampled_tomography(const CMat &rho, int n, const AssignmentMatrix &a, long long shots,
                             std::uint64_t seed);

// ---------------------------------------------------------------------------

// Shifted cat (|0> + |2 alpha>)/sqrt2 on Q1/S1, phase gate with delta_phi =
// phi, displacement D(-alpha e^{i delta}) and cavity parity.
ExperimentResult run_parity_sweep(double delta, const std::vector<double> &phis,
                                  const ExperimentContext &ctx, double alpha = std::numbers::sqrt2);
std::vector<double> uniform_phis(int points); // [0, 2 pi), endpoint excluded

// QPT fidelity after m = 0..m_max Z gates between one encode and one decode,
// with a linear fit.
ExperimentResult run_zgate_repetition(int m_max, const ExperimentContext &ctx);

enum class GateKind { z, s, t, cz_coherent, cz_binomial };
std::string to_string(GateKind g);
GateKind parse_gate(const std::string &text);

// Process tomography of one gate; reports F_gate_ED, F_ED (no gate) and
// F_gate = 1 - (F_ED - F_gate_ED).
ExperimentResult run_qpt(GateKind gate, const ExperimentContext &ctx);

enum class BellEncoding { binomial, coherent };
ExperimentResult run_bell_generation(BellEncoding encoding, const ExperimentContext &ctx,
                                     const GridAxis &axis = {-2.5, 2.5, 41});

// Per-source infidelity breakdown for z, cz_coherent or cz_binomial.
ExperimentResult run_error_budget(GateKind gate, const ExperimentContext &ctx);

ExperimentResult run_snap_bell(int sign, const ExperimentContext &ctx,
                               const GridAxis &axis = {-2.0, 2.0, 41});

} // namespace geophase
