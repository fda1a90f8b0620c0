#pragma once

// Gradient pulse engineering for state-transfer ensembles on piecewise-
// constant controls.

#include "geophase/codes.hpp"
#include "geophase/device.hpp"
#include "geophase/evolution.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace geophase {

// H = H0 + sum_c (Re u_c) gx_c + (Im u_c) gy_c for channel amplitudes u_c.
struct Control {
  PulseChannel channel;
  CMat gx, gy;
};

Control make_control(const DriveTerm &drive);

struct TransferTask {
  std::vector<std::pair<Ket, Ket>> pairs; // (initial, target)
  LinearOp h0;
  std::vector<Control> controls;
  std::size_t n_steps = 0;
  double dt = 1.0;

  // Throws DomainError on empty pairs, unnormalized or misplaced states,
  // non-hermitian generators or a zero step count.
  void validate() const;
};

// |(1/K) sum_k <target_k| U(pulse) |init_k>|^2.
double transfer_fidelity(const PulseSequence &pulse, const TransferTask &task);

// dF/d(Re u), dF/d(Im u) for every channel and step, laid out as
// [channel][step][re, im] in a flat vector; also returns F.
RVec transfer_gradient(const PulseSequence &pulse, const TransferTask &task,
                       double *fidelity = nullptr);

struct GrapeOptions {
  int max_iterations = 2000;
  double target_fidelity = 0.9999;
  double gradient_tolerance = 1e-8;
  double amplitude_bound = mhz_to_rad_per_ns(50.0); // on |u|
  double initial_scale = 0.01; // random seed amplitude (rad/ns) when no initial pulse
  std::uint64_t seed = 1;
  bool verbose = false;
};

struct OptimizerReport {
  double fidelity = 0.0;
  int iterations = 0;
  std::vector<double> gradient_norms;
  std::vector<double> fidelities; // after each accepted step
  double wall_seconds = 0.0;
  bool reached_target = false;
  std::string status;
};

// Limited-memory quasi-Newton ascent. The amplitudes are parametrized as
// u = b tanh(|w|/b) w/|w| so that |u| < b throughout; the returned pulse is
// the saturated one. `initial` (optional) must be on the task's channels.
std::pair<PulseSequence, OptimizerReport> optimize(const TransferTask &task,
                                                   const GrapeOptions &options = {},
                                                   const PulseSequence *initial = nullptr);

// Truncated Gaussian of width sigma centred in [0, total], sampled at
// midpoints; the imaginary part is drag * d(envelope)/dt.
PulseSequence gaussian_pulse(const PulseChannel &channel, double sigma, double total,
                             double amplitude, double drag = 0.0, double dt = 1.0);
// Peak amplitude for which the sampled real envelope has area `angle`.
double gaussian_amplitude_for_area(double sigma, double total, double angle, double dt = 1.0);

// (c0, c1) of the four training inputs: |0>, |1>, (|0>+|1>)/sqrt2, (|0>+i|1>)/sqrt2.
std::vector<std::pair<cplx, cplx>> training_coefficients();

// (c0|g> + c1|e>)|0> -> |g>(c0|0~>_L + c1|1>_L) on a layout with one qubit
// and the encoding's cavity, driven on both.
TransferTask encode_task(const DeviceParams &params, const std::string &qubit,
                         const std::string &cavity, const Encoding &enc, std::size_t n_steps,
                         double dt = 1.0);
// Inverse mapping from the code states after a Kerr free evolution of
// `idle` ns: |g> W(idle)(c0|0~>_L + c1|1>_L) -> (c0|g> + c1|e>)|0>.
TransferTask decode_task(const DeviceParams &params, const std::string &qubit,
                         const std::string &cavity, const Encoding &enc, double idle,
                         std::size_t n_steps, double dt = 1.0);

// Zero pulse on the task's channels.
PulseSequence zero_pulse(const TransferTask &task);

} // namespace geophase
