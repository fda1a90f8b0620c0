#include "geophase/diagnostics.hpp"
#include "geophase/grape.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace geophase;

namespace {

constexpr double kPi = std::numbers::pi;

// Qubit (x) cavity(dim) with a diagonal dispersive H0 and both drives.
struct Small {
  static DeviceParams params() {
    DeviceParams p;
    p.add_mode({"Q", ModeRole::qubit});
    p.add_mode({"S", ModeRole::cavity});
    p.set_coupling("Q", "S", mhz_to_rad_per_ns(2.0));
    p.set_coupling("S", "S", mhz_to_rad_per_ns(0.05));
    return p;
  }
  SystemLayout layout{{"Q"}, {{"S", 4}}};
  LinearOp h0 = static_hamiltonian(params(), layout);
  TransferTask task(std::size_t steps, std::mt19937_64 &rng) const {
    TransferTask t{{}, h0, {}, steps, 1.0};
    t.controls.push_back(make_control(qubit_drive(layout, "Q")));
    t.controls.push_back(make_control(cavity_drive(layout, "S")));
    std::normal_distribution<double> nd;
    for (int k = 0; k < 3; ++k) {
      CVec a(layout.space().total_dim()), b(a.size());
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        a(i) = cplx(nd(rng), nd(rng));
        b(i) = cplx(nd(rng), nd(rng));
      }
      t.pairs.emplace_back(Ket::normalized(layout.space(), a), Ket::normalized(layout.space(), b));
    }
    return t;
  }
};

PulseSequence random_pulse(const TransferTask &task, double scale, std::mt19937_64 &rng) {
  std::normal_distribution<double> nd(0.0, scale);
  PulseSequence p = zero_pulse(task);
  for (std::size_t c = 0; c < p.channels().size(); ++c)
    for (auto &u : p.amplitudes(c))
      u = cplx(nd(rng), nd(rng));
  return p;
}

// Oracle: propagate every input with the evolution module.
double fidelity_by_evolution(const PulseSequence &p, const TransferTask &t,
                             const SystemLayout &layout) {
  cplx o = 0.0;
  for (const auto &[a, b] : t.pairs)
    o += b.amplitudes().dot(evolve_pulse(a, t.h0, p, layout).amplitudes());
  return std::norm(o / static_cast<double>(t.pairs.size()));
}

} // namespace

TEST(TransferFidelity, MatchesPulseEvolution) {
  Small s;
  std::mt19937_64 rng(1);
  const auto t = s.task(30, rng);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_pulse(t, 0.05, rng);
    EXPECT_NEAR(transfer_fidelity(p, t), fidelity_by_evolution(p, t, s.layout), 1e-12);
  }
}

TEST(TransferFidelity, Examples) {
  Small s;
  std::mt19937_64 rng(2);
  auto t = s.task(20, rng);
  const auto p = random_pulse(t, 0.05, rng);
  // Targets built from the pulse's own propagator: F = 1.
  for (auto &[a, b] : t.pairs)
    b = evolve_pulse(a, t.h0, p, s.layout);
  EXPECT_NEAR(transfer_fidelity(p, t), 1.0, 1e-12);
  // A common global phase on the targets is invisible.
  auto shifted = t;
  for (auto &[a, b] : shifted.pairs)
    b = Ket(b.space(), std::exp(I_UNIT * 0.7) * b.amplitudes());
  EXPECT_NEAR(transfer_fidelity(p, shifted), 1.0, 1e-12);
  // A relative phase between members is not.
  shifted.pairs[0].second = Ket(t.pairs[0].second.space(), -t.pairs[0].second.amplitudes());
  EXPECT_LT(transfer_fidelity(p, shifted), 0.5);

  // Zero pulse, H0 = 0, orthogonal pairs.
  SystemLayout q({"Q"}, {});
  TransferTask flip{{}, LinearOp(q.space(), CMat::Zero(2, 2)), {}, 10, 1.0};
  flip.controls.push_back(make_control(qubit_drive(q, "Q")));
  const int g[] = {0}, e[] = {1};
  flip.pairs.emplace_back(basis_ket(q.space(), g), basis_ket(q.space(), e));
  EXPECT_EQ(transfer_fidelity(zero_pulse(flip), flip), 0.0);
}

TEST(TransferFidelity, LengthMismatchThrows) {
  Small s;
  std::mt19937_64 rng(3);
  const auto t = s.task(10, rng);
  auto t2 = t;
  t2.n_steps = 11;
  EXPECT_THROW(transfer_fidelity(zero_pulse(t), t2), DomainError);
  EXPECT_THROW(transfer_gradient(zero_pulse(t), t2), DomainError);
}

TEST(TransferFidelity, CommutingSymmetryInvariance) {
  Small s;
  std::mt19937_64 rng(4);
  auto t = s.task(15, rng);
  t.controls.pop_back(); // qubit drive only: cavity phases commute with everything
  const auto p = random_pulse(t, 0.1, rng);
  const Eigen::Index d = s.layout.space().total_dim();
  CVec phases(d);
  for (Eigen::Index i = 0; i < d; ++i)
    phases(i) = std::exp(I_UNIT * 0.37 * static_cast<double>((i % 4) * (i % 4)));
  const CMat V = phases.asDiagonal();
  ASSERT_LT((V * t.h0.matrix() - t.h0.matrix() * V).norm(), 1e-14);
  ASSERT_LT((V * t.controls[0].gx - t.controls[0].gx * V).norm(), 1e-14);
  auto rotated = t;
  for (auto &[a, b] : rotated.pairs) {
    a = Ket(a.space(), V * a.amplitudes());
    b = Ket(b.space(), V * b.amplitudes());
  }
  EXPECT_NEAR(transfer_fidelity(p, rotated), transfer_fidelity(p, t), 1e-12);
}

TEST(TransferFidelity, Rediscretization) {
  // Constant drive: n steps of dt equal 2n steps of dt/2.
  Small s;
  std::mt19937_64 rng(5);
  auto t = s.task(12, rng);
  const cplx u0(0.03, -0.02), u1(0.01, 0.04);
  PulseSequence p(1.0), p2(0.5);
  p.add_channel(t.controls[0].channel, std::vector<cplx>(12, u0));
  p.add_channel(t.controls[1].channel, std::vector<cplx>(12, u1));
  p2.add_channel(t.controls[0].channel, std::vector<cplx>(24, u0));
  p2.add_channel(t.controls[1].channel, std::vector<cplx>(24, u1));
  auto t2 = t;
  t2.n_steps = 24;
  t2.dt = 0.5;
  EXPECT_NEAR(transfer_fidelity(p2, t2), transfer_fidelity(p, t), 1e-12);

  // With H0 = 0 and a single channel, 2n steps at half amplitude match n steps.
  auto t0 = t;
  t0.h0 = LinearOp(t.h0.space(), CMat::Zero(t.h0.dim(), t.h0.dim()));
  t0.controls.pop_back();
  PulseSequence q(1.0), q2(1.0);
  q.add_channel(t0.controls[0].channel, std::vector<cplx>(12, u0));
  q2.add_channel(t0.controls[0].channel, std::vector<cplx>(24, u0 / 2.0));
  auto t02 = t0;
  t02.n_steps = 24;
  EXPECT_NEAR(transfer_fidelity(q2, t02), transfer_fidelity(q, t0), 1e-12);
}

TEST(TransferGradient, MatchesFiniteDifferences) {
  Small s;
  std::mt19937_64 rng(6);
  const auto t = s.task(25, rng);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_pulse(t, 0.08, rng);
    double f = 0.0;
    const RVec g = transfer_gradient(p, t, &f);
    EXPECT_NEAR(f, transfer_fidelity(p, t), 1e-13);
    RVec fd(g.size());
    for (std::size_t c = 0; c < t.controls.size(); ++c)
      for (std::size_t j = 0; j < t.n_steps; ++j)
        for (int part = 0; part < 2; ++part) {
          const cplx du = part == 0 ? cplx(h, 0) : cplx(0, h);
          auto pp = p, pm = p;
          pp.amplitudes(c)[j] += du;
          pm.amplitudes(c)[j] -= du;
          fd(static_cast<Eigen::Index>(2 * (c * t.n_steps + j) + part)) =
              (transfer_fidelity(pp, t) - transfer_fidelity(pm, t)) / (2 * h);
        }
    worst = std::max(worst, (g - fd).norm() / fd.norm());
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(TransferGradient, StationaryAndEmpty) {
  Small s;
  std::mt19937_64 rng(7);
  auto t = s.task(20, rng);
  const auto p = random_pulse(t, 0.05, rng);
  for (auto &[a, b] : t.pairs)
    b = evolve_pulse(a, t.h0, p, s.layout);
  EXPECT_LT(transfer_gradient(p, t).norm(), 1e-6);

  auto none = t;
  none.controls.clear();
  const RVec g = transfer_gradient(PulseSequence(1.0), [&] {
    auto z = none;
    z.n_steps = 0;
    return z;
  }());
  EXPECT_EQ(g.size(), 0);
}

TEST(Optimize, QubitPiPulse) {
  SystemLayout q({"Q"}, {});
  TransferTask flip{{}, LinearOp(q.space(), CMat::Zero(2, 2)), {}, 50, 1.0};
  flip.controls.push_back(make_control(qubit_drive(q, "Q")));
  const int g[] = {0}, e[] = {1};
  flip.pairs.emplace_back(basis_ket(q.space(), g), basis_ket(q.space(), e));
  GrapeOptions opt;
  opt.target_fidelity = 0.9999;
  const auto [pulse, rep] = optimize(flip, opt);
  EXPECT_GE(rep.fidelity, 0.9999);
  EXPECT_NEAR(transfer_fidelity(pulse, flip), rep.fidelity, 1e-12);
  for (std::size_t k = 1; k < rep.fidelities.size(); ++k)
    EXPECT_GE(rep.fidelities[k], rep.fidelities[k - 1] - 1e-12);
  for (const auto &u : pulse.amplitudes(0))
    EXPECT_LT(std::abs(u), opt.amplitude_bound);
}

TEST(Optimize, RespectsBoundAndZeroTarget) {
  SystemLayout q({"Q"}, {});
  TransferTask flip{{}, LinearOp(q.space(), CMat::Zero(2, 2)), {}, 10, 1.0};
  flip.controls.push_back(make_control(qubit_drive(q, "Q")));
  const int g[] = {0}, e[] = {1};
  flip.pairs.emplace_back(basis_ket(q.space(), g), basis_ket(q.space(), e));

  // pi needs |u| = pi/10 over 10 ns; a bound below that caps the fidelity.
  GrapeOptions opt;
  opt.amplitude_bound = 0.2;
  opt.max_iterations = 300;
  const auto [pulse, rep] = optimize(flip, opt);
  for (const auto &u : pulse.amplitudes(0))
    EXPECT_LT(std::abs(u), 0.2);
  EXPECT_LT(rep.fidelity, std::pow(std::sin(0.2 * 10 / 2), 2) + 1e-9);
  EXPECT_FALSE(rep.reached_target);

  PulseSequence init(1.0);
  init.add_channel(flip.controls[0].channel, std::vector<cplx>(10, cplx(0.01, 0.0)));
  GrapeOptions zero;
  zero.target_fidelity = 0.0;
  const auto [same, r0] = optimize(flip, zero, &init);
  EXPECT_EQ(r0.iterations, 0);
  for (std::size_t j = 0; j < 10; ++j)
    EXPECT_NEAR(std::abs(same.amplitudes(0)[j] - init.amplitudes(0)[j]), 0.0, 1e-15);
}

TEST(Optimize, BinomialEncodeDim8) {
  const auto t = encode_task(default_device(), "Q2", "S2", binomial_encoding(8), 500);
  GrapeOptions opt;
  opt.target_fidelity = 0.99;
  const auto [pulse, rep] = optimize(t, opt);
  EXPECT_GE(rep.fidelity, 0.99) << rep.status;
  EXPECT_NEAR(transfer_fidelity(pulse, t), rep.fidelity, 1e-12);
  for (std::size_t c = 0; c < pulse.channels().size(); ++c)
    for (const auto &u : pulse.amplitudes(c))
      EXPECT_LT(std::abs(u), opt.amplitude_bound);
}

TEST(GaussianPulse, Shape) {
  const PulseChannel ch{"Q", DriveKind::qubit};
  const auto p = gaussian_pulse(ch, 5.0, 20.0, 0.1);
  ASSERT_EQ(p.steps(), 20u);
  for (const auto &u : p.amplitudes(0))
    EXPECT_EQ(u.imag(), 0.0);
  // Symmetric about the centre, peak next to it, edges at exp(-(9.5/5)^2/2).
  EXPECT_DOUBLE_EQ(p.amplitudes(0)[0].real(), p.amplitudes(0)[19].real());
  EXPECT_NEAR(p.amplitudes(0)[0].real(), 0.1 * std::exp(-0.5 * 9.5 * 9.5 / 25.0), 1e-15);
  EXPECT_NEAR(p.amplitudes(0)[10].real(), 0.1 * std::exp(-0.5 * 0.25 / 25.0), 1e-15);

  const double amp = gaussian_amplitude_for_area(5.0, 20.0, kPi);
  double area = 0.0;
  const auto pi_pulse = gaussian_pulse(ch, 5.0, 20.0, amp);
  for (const auto &u : pi_pulse.amplitudes(0))
    area += u.real();
  EXPECT_NEAR(area, kPi, 1e-12);

  // A pi-area resonant pulse on a bare qubit flips it, up to the DRAG term.
  SystemLayout q({"Q"}, {});
  const int g[] = {0};
  const Ket out = evolve_pulse(basis_ket(q.space(), g), LinearOp(q.space(), CMat::Zero(2, 2)),
                               pi_pulse, q);
  EXPECT_NEAR(std::norm(out.amplitudes()(1)), 1.0, 1e-12);

  const auto d = gaussian_pulse(ch, 5.0, 20.0, 0.1, 0.5);
  // Derivative quadrature: antisymmetric, positive before the centre.
  EXPECT_GT(d.amplitudes(0)[5].imag(), 0.0);
  EXPECT_DOUBLE_EQ(d.amplitudes(0)[5].imag(), -d.amplitudes(0)[14].imag());
  const double t5 = 5.5 - 10.0;
  EXPECT_NEAR(d.amplitudes(0)[5].imag(),
              0.5 * (-t5 / 25.0) * 0.1 * std::exp(-0.5 * t5 * t5 / 25.0), 1e-15);

  EXPECT_THROW(gaussian_pulse(ch, 5.0, 19.0, 0.1), DomainError);
}

TEST(Tasks, EncodeDecodeTargets) {
  const DeviceParams params = default_device();
  const Encoding enc = binomial_encoding(8);
  const auto t = encode_task(params, "Q2", "S2", enc, 10);
  ASSERT_EQ(t.pairs.size(), 4u);
  ASSERT_EQ(t.controls.size(), 2u);
  EXPECT_EQ(t.h0.dim(), 16);
  // The ideal encoder maps every training input onto its target.
  const LinearOp u = ideal_encoder(enc);
  for (const auto &[a, b] : t.pairs)
    EXPECT_NEAR(std::norm(b.amplitudes().dot(u.matrix() * a.amplitudes())), 1.0, 1e-12);

  const double idle = 2000.0;
  const auto dt = decode_task(params, "Q2", "S2", enc, idle, 10);
  const LinearOp dec = kerr_corrected_decoder(enc, params.self_kerr("S2"), idle);
  for (const auto &[a, b] : dt.pairs)
    EXPECT_NEAR(std::norm(b.amplitudes().dot(dec.matrix() * a.amplitudes())), 1.0, 1e-12);
}
