#include "geophase/codes.hpp"
#include "geophase/device.hpp"
#include "geophase/diagnostics.hpp"
#include "geophase/evolution.hpp"
#include "geophase/gates.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace geophase;

namespace {

constexpr double kPi = std::numbers::pi;
const double kAlpha = std::sqrt(2.0);

// Rotation by theta about cos(phi) x + sin(phi) y in the (g, e) basis with
// sigma^+ = |e><g|, written out by hand.
Eigen::Matrix2cd rotation(double theta, double phi) {
  const cplx c = std::cos(theta / 2), s = std::sin(theta / 2);
  Eigen::Matrix2cd r;
  r << c, -I_UNIT * s * std::exp(-I_UNIT * phi), -I_UNIT * s * std::exp(I_UNIT * phi), c;
  return r;
}

// Entanglement fidelity of the qubit-resolved Kraus set against a unitary.
double process_fidelity(const std::vector<CMat> &kraus, const CMat &target) {
  const double d = static_cast<double>(target.rows());
  double f = 0.0;
  for (const auto &a : kraus)
    f += std::norm((target.adjoint() * a).trace());
  return f / (d * d);
}

CMat logical_unitary(const LogicalFrame &frame, const GateSpec &g, const DeviceParams &dev,
                     Backend b) {
  CMat out = realize(g, dev, frame.layout(), b, frame.inputs());
  return frame.kraus(out)[0];
}

CMat cz_target() {
  CMat t = CMat::Identity(4, 4);
  t(3, 3) = -1.0;
  return t;
}

double vn_entropy_bits(const CMat &rho) {
  Eigen::SelfAdjointEigenSolver<CMat> es(rho);
  double s = 0.0;
  for (double p : es.eigenvalues())
    if (p > 1e-14)
      s -= p * std::log2(p);
  return s;
}

// Reduced cavity state of a Schmidt-decomposed 4-dim logical vector.
CMat reduced_first(const CVec &v) {
  Eigen::Map<const CMat> m(v.data(), 2, 2); // column-major: m(k, j) = v(2j + k)
  CMat a = m.transpose();                   // a(j, k) = v(2j + k)
  return a * a.adjoint();
}

} // namespace

TEST(Envelope, FlattopShape) {
  auto env = flattop_envelope(100, 4.0);
  EXPECT_DOUBLE_EQ(env[50], 1.0);
  EXPECT_LT(env[0], 0.2);
  EXPECT_NEAR(env[0], env[99], 1e-15);
  for (std::size_t k = 1; k < 8; ++k)
    EXPECT_GT(env[k], env[k - 1]);
  // Short pulse falls back to a single Gaussian.
  auto g = flattop_envelope(10, 4.0);
  EXPECT_NEAR(g[4], g[5], 1e-15);
  EXPECT_THROW(flattop_envelope(10, 0.0), DomainError);
}

TEST(StepPulse, AreaMatchesRotationAngle) {
  const DeviceParams dev = default_device();
  GateSpec spec;
  spec.qubit = "Q1";
  RotationStep r{kPi, 0.3, 200.0, {{{"S1", 0}}}, std::nullopt};
  PulseSequence p = step_pulse(r, 0.0, spec, dev);
  ASSERT_EQ(p.steps(), 200u);
  double area = 0.0;
  for (const auto &u : p.amplitudes(0))
    area += std::abs(u) * p.dt();
  EXPECT_NEAR(area, kPi, 1e-12);
  EXPECT_NEAR(std::arg(p.amplitudes(0)[0]), 0.3, 1e-12); // resonant on vacuum
  r.duration = 200.5;
  EXPECT_THROW(step_pulse(r, 0.0, spec, dev), DomainError);
}

TEST(TransitionShift, MatchesStaticEnergies) {
  const DeviceParams dev = default_device();
  SystemLayout layout({"Q3"}, {{"S1", 5}, {"S2", 5}});
  const RVec e = static_energies(dev, layout);
  for (int j = 0; j < 5; ++j)
    for (int k = 0; k < 5; ++k) {
      const std::array<int, 3> g{0, j, k}, x{1, j, k};
      const double direct = e(layout.space().joint_index(x)) - e(layout.space().joint_index(g));
      EXPECT_NEAR(transition_shift(dev, "Q3", {{"S1", j}, {"S2", k}}), direct, 1e-14);
    }
}

TEST(Selectivity, Thresholds) {
  int warnings = 0;
  auto prev = set_warning_handler([&](std::string_view) { ++warnings; });
  check_selectivity(0.05, 1.0, 1.0);
  EXPECT_EQ(warnings, 0);
  check_selectivity(0.2, 1.0, 1.0);
  EXPECT_EQ(warnings, 1);
  set_warning_handler(prev);
  EXPECT_THROW(check_selectivity(0.34, 1.0, 1.0), DomainError);
  EXPECT_THROW(check_selectivity(0.0, 1.0, 1.0), DomainError);
  const DeviceParams dev = default_device();
  SingleCavityOptions o;
  o.epsilon = 0.5 * 8.0 * dev.coupling("Q1", "S1");
  EXPECT_THROW(single_cavity_phase_gate(0.0, dev, o), DomainError);
  o.cavity = "S3";
  o.epsilon.reset();
  if (dev.coupling("Q1", "S3") == 0.0)
    EXPECT_THROW(single_cavity_phase_gate(0.0, dev, o), DomainError);
}

TEST(ConditionalRotation, PiFlipsOnlyConditioned) {
  SystemLayout layout({"Q1"}, {{"S1", 6}});
  auto cr = conditional_rotation(0.4, kPi, {{{"S1", 0}}}, 0.001, 8.0, 0.01, layout, "Q1");
  EXPECT_DOUBLE_EQ(cr.step.duration, std::ceil(kPi / 0.001));
  const CMat &u = cr.ideal.matrix();
  const Eigen::Matrix2cd r = rotation(kPi, 0.4);
  // Indices: qubit major, |g,n> = n, |e,n> = 6 + n.
  EXPECT_LT(std::abs(u(0, 0) - r(0, 0)), 1e-12);
  EXPECT_LT(std::abs(u(6, 0) - r(1, 0)), 1e-12);
  EXPECT_LT(std::abs(u(0, 6) - r(0, 1)), 1e-12);
  for (int n = 1; n < 6; ++n) {
    EXPECT_LT(std::abs(u(n, n) - 1.0), 1e-12);
    EXPECT_LT(std::abs(u(6 + n, 6 + n) - 1.0), 1e-12);
  }
}

TEST(ConditionalRotation, TwoPiGivesMinusOneOnConditionedSubspace) {
  SystemLayout layout({"Q3"}, {{"S1", 4}, {"S2", 4}});
  std::vector<FockCondition> cond{{{"S1", 0}, {"S2", 0}}, {{"S1", 1}, {"S2", 3}}};
  auto cr = conditional_rotation(1.1, 2.0 * kPi, cond, 0.001, 1.0, 0.01, layout, "Q3");
  const CMat &u = cr.ideal.matrix();
  EXPECT_TRUE(cr.ideal.is_diagonal(1e-12));
  const auto &sp = layout.space();
  for (Eigen::Index i = 0; i < sp.total_dim(); ++i) {
    const auto lv = sp.levels(i);
    const bool hit = (lv[1] == 0 && lv[2] == 0) || (lv[1] == 1 && lv[2] == 3);
    EXPECT_LT(std::abs(u(i, i) - (hit ? -1.0 : 1.0)), 1e-12);
  }
}

TEST(GeometricPhase, ReportIdentity) {
  for (double d : {0.0, kPi / 4, -kPi / 4, kPi / 2, -kPi / 2, kPi}) {
    auto r = geometric_phase_report(d);
    EXPECT_NEAR(std::cos(r.gamma), std::cos(kPi + d), 1e-15);
    EXPECT_NEAR(std::sin(r.gamma), std::sin(kPi + d), 1e-15);
    EXPECT_DOUBLE_EQ(r.solid_angle, 2.0 * r.gamma);
    EXPECT_GT(r.gamma, -kPi);
    EXPECT_LE(r.gamma, kPi);
  }
  EXPECT_DOUBLE_EQ(wrap_phase(-kPi), kPi);
}

class SingleCavityIdeal : public ::testing::Test {
protected:
  DeviceParams dev = default_device();
  Encoding enc = cat_encoding(kAlpha, 30, CatVariant::shifted);
  LogicalFrame frame{SystemLayout({"Q1"}, {{"S1", 30}}), "Q1", {enc}};
};

TEST_F(SingleCavityIdeal, LogicalPhaseIsPiPlusDeltaPhi) {
  for (double d : {0.0, kPi / 4, -kPi / 4, kPi / 2, -kPi / 2, kPi}) {
    GateSpec g = single_cavity_phase_gate(d, enc, dev);
    // Two-rotation oracle on the vacuum component.
    const Eigen::Matrix2cd r = rotation(kPi, -d) * rotation(kPi, 0.0);
    CMat a = logical_unitary(frame, g, dev, Backend::ideal);
    EXPECT_LT(std::abs(a(0, 1)) + std::abs(a(1, 0)), 1e-10);
    EXPECT_LT(std::abs(a(1, 1) - r(0, 0)), 1e-10);
    const double gamma = std::arg(a(1, 1) / a(0, 0));
    EXPECT_LT(std::abs(wrap_phase(gamma - (kPi + d))), 1e-9) << d;
  }
}

TEST_F(SingleCavityIdeal, ZSTTruthTables) {
  const std::vector<std::pair<double, cplx>> cases{
      {0.0, -1.0}, {-kPi / 2, I_UNIT}, {-3 * kPi / 4, std::exp(I_UNIT * (kPi / 4))}, {-kPi, 1.0}};
  for (const auto &[d, ph] : cases) {
    CMat target = CMat::Identity(2, 2);
    target(1, 1) = ph;
    CMat out = realize(single_cavity_phase_gate(d, enc, dev), dev, frame.layout(), Backend::ideal,
                       frame.inputs());
    EXPECT_GT(process_fidelity(frame.kraus(out), target), 1.0 - 1e-10) << d;
  }
}

TEST_F(SingleCavityIdeal, RequiresShiftedCat) {
  EXPECT_THROW(single_cavity_phase_gate(0.0, binomial_encoding(6), dev), DomainError);
  EXPECT_THROW(single_cavity_phase_gate(0.0, cat_encoding(kAlpha, 30, CatVariant::symmetric), dev),
               DomainError);
}

TEST_F(SingleCavityIdeal, DefaultDurationFromSelectivity) {
  GateSpec g = single_cavity_phase_gate(0.0, dev);
  const double eps = 8.0 * dev.coupling("Q1", "S1") / 20.0;
  EXPECT_NEAR(g.duration(), 2.0 * std::ceil(kPi / eps), 1e-9);
}

TEST(CzCoherent, IdealTruthTableAndSymmetry) {
  const DeviceParams dev = default_device();
  Encoding cat = cat_encoding(kAlpha, 30, CatVariant::symmetric);
  LogicalFrame frame(SystemLayout({"Q3"}, {{"S1", 30}, {"S2", 30}}), "Q3", {cat, cat});
  CMat a = logical_unitary(frame, cz_coherent(dev), dev, Backend::ideal);
  EXPECT_LT((a - cz_target()).cwiseAbs().maxCoeff(), 1e-9);

  TwoCavityOptions swapped;
  swapped.cavity1 = "S2";
  swapped.cavity2 = "S1";
  CMat b = logical_unitary(frame, cz_coherent(dev, swapped), dev, Backend::ideal);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CzCoherent, ControlFlipsTargetParity) {
  const DeviceParams dev = default_device();
  Encoding cat = cat_encoding(kAlpha, 30, CatVariant::symmetric);
  LogicalFrame frame(SystemLayout({"Q3"}, {{"S1", 30}, {"S2", 30}}), "Q3", {cat, cat});
  GateSpec g = cz_coherent(dev);
  const LinearOp parity2 = embed(parity_op(cat.cavity), 2, frame.layout().space());
  for (int control = 0; control < 2; ++control) {
    CVec logical = CVec::Zero(4);
    logical(2 * control) = logical(2 * control + 1) = 1.0 / std::sqrt(2.0); // target in |+>_L
    Ket in(frame.layout().space(), frame.encode(logical));
    Ket out(frame.layout().space(),
            realize(g, dev, frame.layout(), Backend::ideal, in.amplitudes()).col(0));
    const double before = expectation(in, parity2).real();
    const double after = expectation(out, parity2).real();
    // Symmetric cat |+>_L is (nearly) even; the controlled flip makes it odd.
    EXPECT_GT(before, 0.99);
    EXPECT_NEAR(after, control == 0 ? before : -before, 1e-6) << control;
  }
}

TEST(CzBinomial, IdealTruthTableSymmetryAndEntanglement) {
  const DeviceParams dev = default_device();
  Encoding bin = binomial_encoding(6);
  LogicalFrame frame(SystemLayout({"Q3"}, {{"S1", 6}, {"S2", 6}}), "Q3", {bin, bin});
  CMat a = logical_unitary(frame, cz_binomial_ideal(), dev, Backend::ideal);
  EXPECT_LT((a - cz_target()).cwiseAbs().maxCoeff(), 1e-10);
  BinomialCzOptions swapped;
  swapped.cavity1 = "S2";
  swapped.cavity2 = "S1";
  CMat b = logical_unitary(frame, cz_binomial_ideal(swapped), dev, Backend::ideal);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);

  CVec plus = CVec::Constant(4, 0.5);
  CVec out = a * plus;
  EXPECT_NEAR(vn_entropy_bits(reduced_first(out)), 1.0, 1e-9);
  EXPECT_NEAR(vn_entropy_bits(reduced_first(plus)), 0.0, 1e-9);
}

TEST(CzBinomial, ToneLayout) {
  GateSpec g = cz_binomial_ideal();
  ASSERT_EQ(g.steps.size(), 2u);
  const auto &first = std::get<RotationStep>(g.steps[0]);
  EXPECT_DOUBLE_EQ(first.duration, 20.0);
  EXPECT_TRUE(first.condition.empty());
  const auto &m = std::get<MultitoneStep>(g.steps[1]);
  EXPECT_DOUBLE_EQ(m.duration, 2000.0);
  ASSERT_EQ(m.tones.size(), 9u);
  for (const auto &t : m.tones) {
    EXPECT_NEAR(std::abs(t.area), kPi, 1e-15);
    const bool centre = t.fock.at("S1") == 2 && t.fock.at("S2") == 2;
    EXPECT_NEAR(std::cos(std::arg(t.area)), centre ? 1.0 : -1.0, 1e-15);
  }
}

TEST(SnapBell, AmplitudesAndIdealFidelity) {
  const DeviceParams dev = default_device();
  SystemLayout layout({"Q3"}, {{"S1", 12}, {"S2", 12}});
  const auto &sp = layout.space();
  std::array<CVec, 2> outputs;
  for (int sign : {1, -1}) {
    GateSpec g = snap_bell(sign, dev);
    const auto &d1 = std::get<DisplacementStep>(g.steps[0]);
    const auto &d2 = std::get<DisplacementStep>(g.steps[2]);
    EXPECT_EQ(d1.alphas[0].second, cplx(-sign * 0.8082));
    EXPECT_EQ(d1.alphas[1].second, cplx(-0.8082));
    EXPECT_EQ(d2.alphas[0].second, cplx(sign * 0.4103));
    EXPECT_EQ(d2.alphas[1].second, cplx(0.4103));
    const std::array<int, 3> vac{0, 0, 0};
    CVec out = realize(g, dev, layout, Backend::ideal, basis_ket(sp, vac).amplitudes()).col(0);
    EXPECT_NEAR(out.norm(), 1.0, 1e-10);
    outputs[sign > 0 ? 0 : 1] = out;
  }
  auto bell = [&](int sign) {
    const std::array<int, 3> a{0, 0, 1}, b{0, 1, 0};
    return CVec((basis_ket(sp, a).amplitudes() + sign * basis_ket(sp, b).amplitudes()) /
                std::sqrt(2.0));
  };
  const double fp = std::norm(bell(1).dot(outputs[0]));
  const double fm = std::norm(bell(-1).dot(outputs[1]));
  EXPECT_GE(fp, 0.95);
  EXPECT_GE(fm, 0.95);
  EXPECT_LT(std::norm(bell(-1).dot(outputs[0])), 0.05);
  EXPECT_LT(std::norm(bell(1).dot(outputs[1])), 0.05);
  const std::array<std::size_t, 1> keep{1};
  DensityOp red = partial_trace(Ket(sp, outputs[0]), keep);
  EXPECT_LE(red.purity(), 0.55);
}

TEST(DispersivePhase, MatchesPropagatorDiagonalAndIsAdditive) {
  const DeviceParams dev = default_device();
  SystemLayout layout({"Q3"}, {{"S1", 5}, {"S2", 5}});
  for (const auto &p : dispersive_phase_table(0.0, dev, layout))
    EXPECT_EQ(p.phase, 0.0);
  const double t1 = 137.0, t2 = 911.0;
  const auto a = dispersive_phase_table(t1, dev, layout);
  const auto b = dispersive_phase_table(t2, dev, layout);
  const auto ab = dispersive_phase_table(t1 + t2, dev, layout);
  const LinearOp u = segment_propagator(static_hamiltonian(dev, layout), t1);
  ASSERT_EQ(a.size(), static_cast<std::size_t>(layout.space().total_dim()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const cplx d = u.matrix()(Eigen::Index(i), Eigen::Index(i));
    EXPECT_LT(std::abs(std::exp(I_UNIT * a[i].phase) - d), 1e-12);
    EXPECT_NEAR(a[i].phase + b[i].phase, ab[i].phase, 1e-9);
  }
  // |g; 2, 0>: only the S1 self-Kerr contributes, phase +K T.
  const double k1 = dev.self_kerr("S1");
  for (const auto &p : a)
    if (p.qubit_level == 0 && p.cavity_levels == std::vector<int>{2, 0})
      EXPECT_NEAR(p.phase, k1 * t1, 1e-12);
}

TEST(GateSpec, JsonRoundTrip) {
  const DeviceParams dev = default_device();
  for (const GateSpec &g : {single_cavity_phase_gate(-kPi / 2, dev), cz_coherent(dev),
                            cz_binomial_ideal(), snap_bell(-1, dev)}) {
    GateSpec back = GateSpec::from_json(g.to_json());
    EXPECT_EQ(back.to_json(), g.to_json());
    EXPECT_EQ(back.steps.size(), g.steps.size());
  }
  GateSpec g = cz_binomial_ideal();
  std::get<RotationStep>(g.steps[0]).detuning = -0.0123;
  GateSpec back = GateSpec::from_json(g.to_json());
  EXPECT_EQ(*std::get<RotationStep>(back.steps[0]).detuning, -0.0123);
  EXPECT_THROW(GateSpec::from_json("{\"name\":1}"), DomainError);
  EXPECT_THROW(GateSpec::from_json(R"({"name":"x","qubit":"Q1","cavities":[],"dt_ns":1,
      "rise_sigma_samples":4,"steps":[{"type":"teleport"}]})"),
               DomainError);
}

TEST(Realize, NormPreservedOnBothBackends) {
  const DeviceParams dev = default_device();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  SystemLayout layout({"Q1"}, {{"S1", 20}});
  GateSpec g = single_cavity_phase_gate(0.7, dev);
  g.steps.insert(g.steps.begin(), DisplacementStep{{{"S1", cplx(0.5, 0.2)}}});
  g.steps.emplace_back(WaitStep{50.0});
  CMat in(layout.space().total_dim(), 3);
  for (Eigen::Index i = 0; i < in.size(); ++i)
    in.data()[i] = cplx(nd(rng), nd(rng));
  in.colwise().normalize();
  for (Backend b : {Backend::ideal, Backend::pulse}) {
    CMat out = realize(g, dev, layout, b, in);
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      EXPECT_NEAR(out.col(c).norm(), 1.0, 1e-8);
  }
}

TEST(Realize, DriveOffIsStaticEvolution) {
  const DeviceParams dev = default_device();
  SystemLayout layout({"Q1"}, {{"S1", 8}});
  GateSpec g = single_cavity_phase_gate(0.0, dev);
  LinearOp w = realize_unitary(g, dev, layout, Backend::pulse, {true});
  LinearOp direct = segment_propagator(static_hamiltonian(dev, layout), g.duration());
  EXPECT_LT((w.matrix() - direct.matrix()).cwiseAbs().maxCoeff(), 1e-10);
  LinearOp wi = realize_unitary(g, dev, layout, Backend::ideal, {true});
  EXPECT_LT((wi.matrix() - CMat::Identity(wi.dim(), wi.dim())).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Realize, DensityPathMatchesUnitaryWithoutCollapses) {
  const DeviceParams dev = default_device();
  SystemLayout layout({"Q1"}, {{"S1", 6}});
  SingleCavityOptions o;
  o.alpha = 0.5; // keeps the gate short
  o.epsilon = 0.1 * 1.0 * dev.coupling("Q1", "S1");
  GateSpec g = single_cavity_phase_gate(0.3, dev, o);
  g.steps.insert(g.steps.begin(), DisplacementStep{{{"S1", cplx(0.3)}}});
  const std::array<int, 2> g0{0, 0};
  const Ket in = basis_ket(layout.space(), g0);
  for (Backend b : {Backend::ideal, Backend::pulse}) {
    CVec psi = realize(g, dev, layout, b, in.amplitudes()).col(0);
    DensityOp rho = realize(g, dev, layout, b, DensityOp(layout.space(), in.amplitudes() * in.amplitudes().adjoint()), {});
    EXPECT_LT((rho.matrix() - psi * psi.adjoint()).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(LogicalFrame, ReadoutProjectsOntoCodeSpace) {
  Encoding bin = binomial_encoding(6);
  LogicalFrame frame(SystemLayout({"Q1"}, {{"S1", 6}}), "Q1", {bin});
  CMat rl(2, 2);
  rl << 0.7, cplx(0.1, 0.2), cplx(0.1, -0.2), 0.3;
  EXPECT_LT((frame.logical_density(frame.encode_density(rl)) - rl).cwiseAbs().maxCoeff(), 1e-14);
  // Population on |g,1> lies outside the code: trace drops.
  CMat rho = CMat::Zero(12, 12);
  rho(1, 1) = 1.0;
  EXPECT_NEAR(frame.logical_density(rho).trace().real(), 0.0, 1e-15);
  EXPECT_THROW(LogicalFrame(SystemLayout({"Q1"}, {{"S1", 7}}), "Q1", {bin}), DomainError);
  CMat bad = frame.inputs();
  bad.row(6) = bad.row(0); // |e, 0>
  EXPECT_THROW(frame.set_reference(bad), DomainError);
}

namespace {

double pulse_fidelity(LogicalFrame &frame, const GateSpec &g, const DeviceParams &dev,
                      const CMat &target) {
  frame.set_reference(realize(g, dev, frame.layout(), Backend::pulse, frame.inputs(), {true}));
  return process_fidelity(
      frame.kraus(realize(g, dev, frame.layout(), Backend::pulse, frame.inputs())), target);
}

} // namespace

TEST(PulseMode, SingleCavityZ) {
  const DeviceParams dev = default_device();
  Encoding enc = cat_encoding(kAlpha, 30, CatVariant::shifted);
  LogicalFrame frame(SystemLayout({"Q1"}, {{"S1", 30}}), "Q1", {enc});
  CMat z = CMat::Identity(2, 2);
  z(1, 1) = -1.0;
  EXPECT_GT(pulse_fidelity(frame, single_cavity_phase_gate(0.0, enc, dev), dev, z), 0.99);
}

TEST(PulseMode, CoherentCz) {
  const DeviceParams dev = default_device();
  Encoding cat = cat_encoding(kAlpha, 30, CatVariant::symmetric);
  LogicalFrame frame(SystemLayout({"Q3"}, {{"S1", 30}, {"S2", 30}}), "Q3", {cat, cat});
  EXPECT_GE(pulse_fidelity(frame, cz_coherent(dev), dev, cz_target()), 0.98);
}

TEST(PulseMode, BinomialCzToneSolve) {
  const DeviceParams dev = default_device();
  Encoding bin = binomial_encoding(6);
  LogicalFrame frame(SystemLayout({"Q3"}, {{"S1", 6}, {"S2", 6}}), "Q3", {bin, bin});
  ToneSolveReport rep;
  GateSpec g = cz_binomial(dev, {}, &rep);
  EXPECT_TRUE(rep.converged);
  ASSERT_EQ(rep.residuals.size(), 9u);
  EXPECT_LT(rep.residual_norm, 0.2);
  EXPECT_TRUE(std::get<RotationStep>(g.steps[0]).detuning.has_value());
  EXPECT_GE(pulse_fidelity(frame, g, dev, cz_target()), 0.95);
}
