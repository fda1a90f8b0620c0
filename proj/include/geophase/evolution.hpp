#pragma once

// Unitary evolution under piecewise-constant drives and Lindblad
// integration for mixed states.

#include "geophase/device.hpp"
#include "geophase/fock.hpp"

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace geophase {

struct PulseChannel {
  std::string label;
  DriveKind kind = DriveKind::qubit;
  bool operator==(const PulseChannel &) const = default;
};

// Piecewise-constant complex amplitudes, one array per channel, all of the
// same length, sampled at a fixed step dt (ns).
class PulseSequence {
public:
  explicit PulseSequence(double dt = 1.0);

  double dt() const { return dt_; }
  std::size_t steps() const { return steps_; }
  double duration() const { return dt_ * static_cast<double>(steps_); }

  const std::vector<PulseChannel> &channels() const { return channels_; }
  const std::vector<cplx> &amplitudes(std::size_t channel) const { return amps_.at(channel); }
  std::vector<cplx> &amplitudes(std::size_t channel) { return amps_.at(channel); }
  // Index of the channel with this label, or npos.
  std::size_t find(const std::string &label) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  // The first channel fixes steps(); later ones must match it.
  void add_channel(PulseChannel channel, std::vector<cplx> samples);
  // Concatenate in time; channels are matched by label and missing ones are
  // zero-padded. dt must agree.
  void append(const PulseSequence &next);

  std::string to_csv() const;
  static PulseSequence from_csv(const std::string &text);
  std::string to_json() const;
  static PulseSequence from_json(const std::string &text);

  bool operator==(const PulseSequence &) const = default;

private:
  double dt_;
  std::size_t steps_ = 0;
  std::vector<PulseChannel> channels_;
  std::vector<std::vector<cplx>> amps_;
};

// A constant-amplitude pulse on a single channel.
PulseSequence constant_pulse(const PulseChannel &channel, cplx amplitude,
                             double duration, double dt = 1.0);

// exp(-i H dt); throws DomainError if H is not hermitian.
LinearOp segment_propagator(const LinearOp &h, double dt);

// exp(-i H t) applied to the columns of `states`, computed blockwise over the
// connected components of H's sparsity pattern.
CMat apply_propagator(const LinearOp &h, double t, const CMat &states);

// Applies the segment propagators of H0 + sum of channel drives. Runs of
// identical samples share one exponential, and the joint space is split into
// the connected components of the Hamiltonian's sparsity pattern so that
// block-diagonal problems (diagonal H0 with qubit drives) stay cheap.
Ket evolve_pulse(const Ket &state, const LinearOp &h0, const PulseSequence &pulse,
                 const SystemLayout &layout);
// Column-wise version: every column of `states` is an input amplitude vector.
CMat evolve_pulse(const CMat &states, const LinearOp &h0, const PulseSequence &pulse,
                  const SystemLayout &layout);
// Full propagator (identity columns); intended for modest dimensions.
LinearOp pulse_propagator(const LinearOp &h0, const PulseSequence &pulse,
                          const SystemLayout &layout);

// Gamma_phi = 1/T2 - 1/(2 T1). Throws DomainError when T2 > 2 T1.
double dephasing_rate(double t1, double t2);

struct Collapse {
  LinearOp op; // includes sqrt(rate)
  double rate = 0.0;
  std::string description;
};
using CollapseSet = std::vector<Collapse>;

// Qubits: sqrt(1/T1) sigma^-, sqrt(Gamma_phi/2) sigma_z.
// Cavities: sqrt(1/T1) a, sqrt(2 Gamma_phi) a^dag a.
// Terms with zero rate are omitted.
CollapseSet standard_collapses(const DeviceParams &params, const SystemLayout &layout);

struct LindbladOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity(); // ns
  std::size_t max_steps = 5'000'000;
  // Dense density matrices above this dimension are refused.
  Eigen::Index max_dim = 800;
};

struct LindbladStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

DensityOp lindblad_evolve(const DensityOp &rho, const LinearOp &h,
                          const CollapseSet &collapses, double duration,
                          const LindbladOptions &options = {},
                          LindbladStats *stats = nullptr);
// Piecewise-constant drive: each run of identical samples is integrated as
// its own interval so that the drive discontinuities are honored.
DensityOp lindblad_evolve(const DensityOp &rho, const LinearOp &h0,
                          const PulseSequence &pulse, const SystemLayout &layout,
                          const CollapseSet &collapses,
                          const LindbladOptions &options = {},
                          LindbladStats *stats = nullptr);

} // namespace geophase
