#pragma once

// Device parameter model and Hamiltonian assembly in the rotating frame of
// every mode's bare frequency. Units: angular frequency in rad/ns, time in ns.
// Config files carry GHz, MHz (as chi/2pi) and microseconds.

#include "geophase/fock.hpp"

#include <filesystem>
#include <limits>
#include <numbers>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace geophase {

enum class ModeRole { qubit, cavity, readout };

struct ModeParams {
  std::string label;
  ModeRole role = ModeRole::qubit;
  double frequency = 0.0;     // rad/ns
  double anharmonicity = 0.0; // rad/ns, qubits only (informational)
  double t1 = std::numeric_limits<double>::infinity();      // ns
  double t2 = std::numeric_limits<double>::infinity();      // ns, Ramsey T2*
  double t2_echo = std::numeric_limits<double>::infinity(); // ns
};

enum class DephasingSource { ramsey, echo };

class DeviceParams {
public:
  DeviceParams() = default;

  void add_mode(ModeParams mode);
  // Symmetric nonlinear coefficient in rad/ns. (a, a) is the self-Kerr K.
  void set_coupling(const std::string &a, const std::string &b, double value);

  const ModeParams &mode(const std::string &label) const;
  bool has_mode(const std::string &label) const { return modes_.count(label) > 0; }
  const std::map<std::string, ModeParams> &modes() const { return modes_; }

  // Zero when the pair is not coupled.
  double coupling(const std::string &a, const std::string &b) const;
  double self_kerr(const std::string &cavity) const { return coupling(cavity, cavity); }
  const std::map<std::pair<std::string, std::string>, double> &couplings() const {
    return couplings_;
  }

  DephasingSource dephasing_source = DephasingSource::ramsey;
  // T2 used for dephasing rates: T2* or T2echo per dephasing_source.
  double t2_effective(const std::string &label) const;

  // Scale every cavity self-Kerr and cross-Kerr term (used to toggle Kerr).
  DeviceParams with_kerr_scaled(double factor) const;
  DeviceParams with_coherence_disabled() const;

  // Throws DomainError on violated invariants (negative chi, T2 > 2 T1).
  void validate() const;

private:
  std::map<std::string, ModeParams> modes_;
  std::map<std::pair<std::string, std::string>, double> couplings_;
};

DeviceParams load_params(std::string_view config_text);
DeviceParams load_params_file(const std::filesystem::path &path);
// Bundled device_b.cfg (measured Hamiltonian and coherence tables).
DeviceParams default_device();
std::filesystem::path data_path(std::string_view file_name);

inline double mhz_to_rad_per_ns(double mhz) { return 2.0 * std::numbers::pi * mhz * 1e-3; }
inline double ghz_to_rad_per_ns(double ghz) { return 2.0 * std::numbers::pi * ghz; }
inline double rad_per_ns_to_mhz(double w) { return w / (2.0 * std::numbers::pi) * 1e3; }

// Quantum factors of a simulation: qubits first, then cavities, each in
// declaration order. Readout resonators are never factors.
class SystemLayout {
public:
  SystemLayout(std::vector<std::string> qubits,
               std::vector<std::pair<std::string, int>> cavities);

  const CompositeSpace &space() const { return space_; }
  std::size_t index(const std::string &label) const;
  bool contains(const std::string &label) const { return index_.count(label) > 0; }
  bool is_qubit(const std::string &label) const;
  const std::vector<std::string> &labels() const { return labels_; }
  const std::vector<std::string> &qubits() const { return qubits_; }
  const std::vector<std::string> &cavities() const { return cavities_; }
  int cavity_dim(const std::string &label) const;

private:
  std::vector<std::string> labels_, qubits_, cavities_;
  std::map<std::string, std::size_t> index_;
  CompositeSpace space_;
};

// Diagonal of the static Hamiltonian in the joint basis.
RVec static_energies(const DeviceParams &params, const SystemLayout &layout);
LinearOp static_hamiltonian(const DeviceParams &params, const SystemLayout &layout);

enum class DriveKind { qubit, cavity };

// One control channel: H = scale * (u e^{-i detuning t} R + h.c.) where R is
// the embedded sigma^+ (qubit) or a^dagger (cavity). Qubit drives use the
// Rabi-frequency convention scale = 1/2, so a constant resonant u rotates by
// angle u*t; cavity drives use scale = 1 so that constant u displaces by
// -i u t.
class DriveTerm {
public:
  DriveTerm(std::string label, DriveKind kind, LinearOp raising, double scale,
            double detuning);

  const std::string &label() const { return label_; }
  DriveKind kind() const { return kind_; }
  double detuning() const { return detuning_; }
  double scale() const { return scale_; }
  const LinearOp &raising() const { return raising_; }

  CMat matrix(cplx amplitude, double t = 0.0) const;
  LinearOp hamiltonian(cplx amplitude, double t = 0.0) const;
  // Hermitian generators for the real and imaginary amplitude parts (detuning 0).
  std::pair<CMat, CMat> generators() const;

private:
  std::string label_;
  DriveKind kind_;
  LinearOp raising_;
  double scale_;
  double detuning_;
};

DriveTerm qubit_drive(const SystemLayout &layout, const std::string &label,
                      double detuning = 0.0);
DriveTerm cavity_drive(const SystemLayout &layout, const std::string &label,
                       double detuning = 0.0);

// Diagonal projector onto the joint Fock assignments listed (identity on
// unlisted factors). Each map sends a cavity label to a photon number.
LinearOp fock_projector(const SystemLayout &layout,
                        const std::vector<std::map<std::string, int>> &states);

// (eps/2) e^{i phi} sigma^+_q P + h.c., the vacuum-conditioned rotation
// generator generalized to any diagonal joint-Fock projector P.
LinearOp effective_conditional_drive(double epsilon, double phi,
                                     const LinearOp &condition,
                                     const SystemLayout &layout,
                                     const std::string &qubit);

} // namespace geophase
