#pragma once

// Geometric-phase gate constructions. A GateSpec is a backend-independent
// step list; the ideal backend realizes conditional rotations with the
// effective conditional-drive Hamiltonian alone, the pulse backend drives
// the full dispersive Hamiltonian with shaped tones.

#include "geophase/codes.hpp"
#include "geophase/device.hpp"
#include "geophase/evolution.hpp"

#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace geophase {

enum class Backend { ideal, pulse };

using FockCondition = std::map<std::string, int>;

// Simultaneous instantaneous displacements.
struct DisplacementStep {
  std::vector<std::pair<std::string, cplx>> alphas;
};

// Qubit rotation by theta about the equatorial axis at angle phi,
// conditioned on the union of the listed joint Fock states (empty = always).
struct RotationStep {
  double theta = 0.0;
  double phi = 0.0;
  double duration = 0.0; // ns
  std::vector<FockCondition> condition;
  // Tone detuning in rad/ns. Defaults to the transition shift of the
  // conditioned state when exactly one is listed, otherwise 0.
  std::optional<double> detuning;
};

struct WaitStep {
  double duration = 0.0;
};

// One tone per joint Fock state; area = theta e^{i phi}.
struct Tone {
  FockCondition fock;
  cplx area;
};

struct MultitoneStep {
  double duration = 0.0;
  std::vector<Tone> tones;
};

using GateStep = std::variant<DisplacementStep, RotationStep, WaitStep, MultitoneStep>;

struct GateSpec {
  std::string name;
  std::string qubit;
  std::vector<std::string> cavities;
  std::vector<GateStep> steps;
  double dt = 1.0;         // ns, pulse sampling
  double rise_sigma = 4.0; // samples, Gaussian-flattop edge

  double duration() const;
  std::string to_json() const;
  static GateSpec from_json(const std::string &text);
};

// Gaussian-flattop samples (peak 1): Gaussian edges of 2 sigma on each side
// and a flat top; falls back to a truncated Gaussian for short pulses.
std::vector<double> flattop_envelope(std::size_t samples, double sigma_samples);

// Qubit transition shift E_e - E_g (rad/ns) for a joint Fock assignment.
double transition_shift(const DeviceParams &params, const std::string &qubit,
                        const FockCondition &fock);

// Sampled qubit drive for one rotation or multitone step starting at gate
// time t0 (tone phases reference gate time).
PulseSequence step_pulse(const RotationStep &step, double t0, const GateSpec &spec,
                         const DeviceParams &params);
PulseSequence step_pulse(const MultitoneStep &step, double t0, const GateSpec &spec,
                         const DeviceParams &params);

SystemLayout gate_layout(const GateSpec &spec, const std::map<std::string, int> &dims);

struct RealizeOptions {
  // Zero every drive; the result is the reference evolution W that the
  // compensated decoders undo.
  bool drive_off = false;
};

// Evolves the columns of `states` (joint amplitudes on `layout`).
CMat realize(const GateSpec &spec, const DeviceParams &params, const SystemLayout &layout,
             Backend backend, const CMat &states, const RealizeOptions &options = {});
LinearOp realize_unitary(const GateSpec &spec, const DeviceParams &params,
                         const SystemLayout &layout, Backend backend,
                         const RealizeOptions &options = {});
// Open-system realization; displacements stay instantaneous and unitary.
DensityOp realize(const GateSpec &spec, const DeviceParams &params, const SystemLayout &layout,
                  Backend backend, const DensityOp &rho, const CollapseSet &collapses,
                  const LindbladOptions &lindblad = {});

// Selectivity precondition for a conditional drive of strength epsilon when
// the nearest competing photon-number gap is nbar * chi: warns above
// nbar chi / 10 and throws DomainError above nbar chi / 3.
void check_selectivity(double epsilon, double nbar, double chi);

struct ConditionalRotation {
  RotationStep step;
  LinearOp ideal; // exp(-i H_eff tau) with H_eff the effective conditional drive
};
ConditionalRotation conditional_rotation(double phi, double theta,
                                         const std::vector<FockCondition> &condition,
                                         double epsilon, double nbar, double chi,
                                         const SystemLayout &layout, const std::string &qubit,
                                         double dt = 1.0);

struct SingleCavityOptions {
  std::string qubit = "Q1";
  std::string cavity = "S1";
  double alpha = std::numbers::sqrt2;
  std::optional<double> epsilon; // default n̄ chi / 20 with n̄ = |2 alpha|^2
  double dt = 1.0;
};

// Two conditional pi rotations on the cavity vacuum with axes 0 and
// -delta_phi: logical diag(1, e^{i(pi + delta_phi)}) on the shifted cat.
GateSpec single_cavity_phase_gate(double delta_phi, const DeviceParams &params,
                                  const SingleCavityOptions &options = {});
GateSpec single_cavity_phase_gate(double delta_phi, const Encoding &enc,
                                  const DeviceParams &params,
                                  const SingleCavityOptions &options = {});

struct TwoCavityOptions {
  std::string qubit = "Q3";
  std::string cavity1 = "S1";
  std::string cavity2 = "S2";
  double alpha = std::numbers::sqrt2;
  std::optional<double> epsilon;
  double dt = 1.0;
};

// D(alpha) (x) D(alpha), 2 pi rotation on the joint vacuum, D(-alpha) (x) D(-alpha).
GateSpec cz_coherent(const DeviceParams &params, const TwoCavityOptions &options = {});

struct BinomialCzOptions {
  std::string qubit = "Q3";
  std::string cavity1 = "S1";
  std::string cavity2 = "S2";
  double first_duration = 20.0;  // ns, nonselective pi pulse
  double first_phi = 0.0;        // axis of the nonselective pulse (x)
  double second_duration = 2000.0;
  double dt = 1.0;
  int max_evaluations = 200;
  double tolerance = 1e-7;
};

struct ToneSolveReport {
  bool converged = false; // optimizer stopped on a tolerance rather than the budget
  int evaluations = 0;
  double residual_norm = 0.0;
  std::vector<double> residuals; // |<g|U|g> - target| per joint Fock state
  double global_phase = 0.0;
};

// Ideal variant: nonselective pi about phi = 0, then nine conditional pi
// rotations with axis pi on every (j, k) in {0,2,4}^2 except axis 0 on (2, 2).
GateSpec cz_binomial_ideal(const BinomialCzOptions &options = {});
// Pulse variant: tone areas solved so that the full-Hamiltonian run returns
// each joint Fock state to |g> with a common phase, except pi on (2, 2).
// Throws NumericalError if the solve fails badly.
GateSpec cz_binomial(const DeviceParams &params, const BinomialCzOptions &options = {},
                     ToneSolveReport *report = nullptr);

struct SnapBellOptions {
  std::string qubit = "Q3";
  std::string cavity1 = "S1";
  std::string cavity2 = "S2";
  std::optional<double> epsilon; // default chi_min / 10
  double dt = 1.0;
};

inline constexpr double kSnapAlphaFirst = 0.8082;
inline constexpr double kSnapAlphaSecond = 0.4103;

// D(-+0.8082) (x) D(-0.8082), 2 pi rotation on |00>, D(+-0.4103) (x) D(0.4103).
GateSpec snap_bell(int sign, const DeviceParams &params, const SnapBellOptions &options = {});

// Phase -E T accumulated by each joint Fock state and qubit level under the
// static Hamiltonian alone.
struct PhaseEntry {
  std::vector<int> cavity_levels;
  int qubit_level = 0;
  double phase = 0.0;
};
std::vector<PhaseEntry> dispersive_phase_table(double duration, const DeviceParams &params,
                                               const SystemLayout &layout);

struct GatePhaseReport {
  double gamma = 0.0;       // acquired geometric phase, wrapped to (-pi, pi]
  double delta_phi = 0.0;
  double solid_angle = 0.0; // 2 gamma
};
GatePhaseReport geometric_phase_report(double delta_phi);

double wrap_phase(double x);

// Logical basis of one qubit (in |g>) and one code per listed cavity, plus
// the compensated readout that undoes a reference evolution W.
class LogicalFrame {
public:
  LogicalFrame(SystemLayout layout, std::string qubit, std::vector<Encoding> codes);

  const SystemLayout &layout() const { return layout_; }
  std::size_t n_logical() const { return codes_.size(); }
  Eigen::Index logical_dim() const { return Eigen::Index(1) << codes_.size(); }
  const std::vector<Encoding> &codes() const { return codes_; }

  // Columns |g> (x) |code_a>, a in lexicographic logical order.
  const CMat &inputs() const { return inputs_; }
  CVec encode(const CVec &logical) const { return inputs_ * logical; }
  CMat encode_density(const CMat &logical_rho) const;

  // `reference` = W applied to inputs() (qubit stays in |g>).
  void set_reference(const CMat &reference);
  // Logical density after tracing the qubit and undoing W; trace < 1 when
  // population leaks out of the code space.
  CMat logical_density(const CMat &rho) const;
  // Kraus operators A_q[a, i] = <q, W code_a| U |g, code_i> of a unitary run.
  std::vector<CMat> kraus(const CMat &evolved_inputs) const;

private:
  SystemLayout layout_;
  std::string qubit_;
  std::vector<Encoding> codes_;
  CMat inputs_;
  std::vector<CMat> readout_; // per qubit level: columns |q> (x) W code_a
};

} // namespace geophase
