#include "geophase/evolution.hpp"

#include "geophase/diagnostics.hpp"

#include <Eigen/Sparse>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace geophase {

namespace {

std::string kind_name(DriveKind k) { return k == DriveKind::qubit ? "qubit" : "cavity"; }

DriveKind parse_kind(const std::string &s) {
  if (s == "qubit")
    return DriveKind::qubit;
  if (s == "cavity")
    return DriveKind::cavity;
  throw DomainError("unknown drive kind '" + s + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string &s) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  // Subnormals report ERANGE but still parse to the nearest value.
  if ((ec != std::errc() && ec != std::errc::result_out_of_range) || end != s.data() + s.size())
    throw DomainError("malformed number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    out.push_back(cur);
  if (!s.empty() && s.back() == sep)
    out.emplace_back();
  return out;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

DriveTerm resolve(const PulseChannel &c, const SystemLayout &layout) {
  if (!layout.contains(c.label))
    throw DomainError("pulse channel '" + c.label + "' is not a factor of the layout");
  return c.kind == DriveKind::qubit ? qubit_drive(layout, c.label)
                                    : cavity_drive(layout, c.label);
}

void check_h0(const LinearOp &h0, const SystemLayout &layout) {
  if (!(h0.space() == layout.space()))
    throw DomainError("H0 space does not match the layout");
  if (!h0.is_hermitian())
    throw DomainError("H0 is not hermitian");
}

// Consecutive runs of identical samples across every channel.
struct Run {
  std::size_t begin, length;
};

std::vector<Run> sample_runs(const PulseSequence &p) {
  std::vector<Run> runs;
  for (std::size_t k = 0; k < p.steps(); ++k) {
    bool same = !runs.empty();
    for (std::size_t c = 0; same && c < p.channels().size(); ++c)
      same = p.amplitudes(c)[k] == p.amplitudes(c)[runs.back().begin];
    if (same)
      ++runs.back().length;
    else
      runs.push_back({k, 1});
  }
  return runs;
}

// Hamiltonian H0 + sum_c (Re u_c Gx_c + Im u_c Gy_c) restricted to the
// connected components of its sparsity pattern.
class BlockHamiltonian {
public:
  BlockHamiltonian(const LinearOp &h0, const std::vector<DriveTerm> &drives) {
    const Eigen::Index n = h0.dim();
    std::vector<Eigen::Index> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](Eigen::Index i) {
      while (parent[i] != i)
        i = parent[i] = parent[parent[i]];
      return i;
    };
    auto mark = [&](const CMat &m) {
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
          if (m(i, j) != cplx(0.0)) {
            auto a = find(i), b = find(j);
            if (a != b)
              parent[std::max(a, b)] = std::min(a, b);
          }
    };
    mark(h0.matrix());
    std::vector<std::pair<CMat, CMat>> gens;
    for (const auto &d : drives) {
      gens.push_back(d.generators());
      mark(d.raising().matrix());
    }
    std::vector<Eigen::Index> root_to_block(n, -1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto r = find(i);
      if (root_to_block[r] < 0) {
        root_to_block[r] = static_cast<Eigen::Index>(blocks_.size());
        blocks_.emplace_back();
      }
      blocks_[root_to_block[r]].index.push_back(i);
    }
    for (auto &b : blocks_) {
      const auto m = static_cast<Eigen::Index>(b.index.size());
      auto sub = [&](const CMat &full) {
        CMat s(m, m);
        for (Eigen::Index j = 0; j < m; ++j)
          for (Eigen::Index i = 0; i < m; ++i)
            s(i, j) = full(b.index[i], b.index[j]);
        return s;
      };
      b.h0 = sub(h0.matrix());
      for (const auto &[gx, gy] : gens) {
        b.gx.push_back(sub(gx));
        b.gy.push_back(sub(gy));
      }
    }
  }

  std::size_t block_count() const { return blocks_.size(); }

  // states <- exp(-i H(u) tau) states
  void apply(const std::vector<cplx> &u, double tau, CMat &states) const {
    for (const auto &b : blocks_) {
      CMat h = b.h0;
      for (std::size_t c = 0; c < u.size(); ++c)
        h += u[c].real() * b.gx[c] + u[c].imag() * b.gy[c];
      const CMat ub = block_exp(h, tau);
      const auto m = static_cast<Eigen::Index>(b.index.size());
      if (static_cast<Eigen::Index>(m) == states.rows()) {
        states = ub * states;
        continue;
      }
      CMat slab(m, states.cols());
      for (Eigen::Index i = 0; i < m; ++i)
        slab.row(i) = states.row(b.index[i]);
      slab = ub * slab;
      for (Eigen::Index i = 0; i < m; ++i)
        states.row(b.index[i]) = slab.row(i);
    }
  }

private:
  struct Block {
    std::vector<Eigen::Index> index;
    CMat h0;
    std::vector<CMat> gx, gy;
  };
  std::vector<Block> blocks_;

  static CMat block_exp(const CMat &h, double tau) {
    if (h.rows() == 1)
      return CMat::Constant(1, 1, std::exp(-I_UNIT * h(0, 0).real() * tau));
    if (h.rows() == 2) {
      const double a = h(0, 0).real(), d = h(1, 1).real();
      const double mean = 0.5 * (a + d), delta = 0.5 * (a - d);
      const double w = std::sqrt(delta * delta + std::norm(h(0, 1)));
      const cplx ph = std::exp(-I_UNIT * mean * tau);
      CMat u = CMat::Identity(2, 2) * std::cos(w * tau);
      if (w > 0.0) {
        CMat k = h;
        k(0, 0) = delta;
        k(1, 1) = -delta;
        u -= I_UNIT * (std::sin(w * tau) / w) * k;
      }
      return ph * u;
    }
    return expm_hermitian(h, tau);
  }
};

using SpMat = Eigen::SparseMatrix<cplx>;

// d rho/dt = B + B^dag + sum_k L_k (L_k rho)^dag with B = -i H_eff rho and
// H_eff = H - (i/2) sum_k L_k^dag L_k. Valid for hermitian rho, which the
// integrator preserves up to rounding.
class LindbladRhs {
public:
  LindbladRhs(const CMat &h, const CollapseSet &collapses) {
    CMat heff = h;
    for (const auto &c : collapses) {
      const CMat &l = c.op.matrix();
      heff -= 0.5 * I_UNIT * (l.adjoint() * l);
      ls_.push_back(l.sparseView(1.0, 0.0));
    }
    heff_ = (-I_UNIT * heff).sparseView(1.0, 0.0);
  }

  void operator()(const CMat &rho, CMat &out) const {
    CMat b = heff_ * rho;
    out = b + b.adjoint();
    for (const auto &l : ls_) {
      CMat lr = l * rho;
      out.noalias() += l * lr.adjoint();
    }
  }

private:
  SpMat heff_;
  std::vector<SpMat> ls_;
};

// Dormand–Prince 5(4) with FSAL and standard step-size control.
class DormandPrince {
public:
  DormandPrince(const LindbladOptions &o, LindbladStats *stats) : opt_(o), stats_(stats) {}

  void integrate(const LindbladRhs &f, CMat &y, double duration) {
    if (duration <= 0.0)
      return;
    double t = 0.0;
    CMat k1, k2, k3, k4, k5, k6, k7, ytmp, y5, err;
    f(y, k1);
    if (h_ <= 0.0) {
      const double d0 = y.norm(), d1 = k1.norm();
      h_ = (d0 < 1e-5 || d1 < 1e-5) ? 1e-3 : 0.01 * d0 / d1;
    }
    while (t < duration) {
      if (steps_++ > opt_.max_steps)
        throw NumericalError("lindblad_evolve: exceeded max_steps");
      double h = std::min({h_, opt_.max_step, duration - t});
      const bool last = h >= duration - t;

      ytmp = y + h * (1.0 / 5) * k1;
      f(ytmp, k2);
      ytmp = y + h * ((3.0 / 40) * k1 + (9.0 / 40) * k2);
      f(ytmp, k3);
      ytmp = y + h * ((44.0 / 45) * k1 - (56.0 / 15) * k2 + (32.0 / 9) * k3);
      f(ytmp, k4);
      ytmp = y + h * ((19372.0 / 6561) * k1 - (25360.0 / 2187) * k2 +
                      (64448.0 / 6561) * k3 - (212.0 / 729) * k4);
      f(ytmp, k5);
      ytmp = y + h * ((9017.0 / 3168) * k1 - (355.0 / 33) * k2 + (46732.0 / 5247) * k3 +
                      (49.0 / 176) * k4 - (5103.0 / 18656) * k5);
      f(ytmp, k6);
      y5 = y + h * ((35.0 / 384) * k1 + (500.0 / 1113) * k3 + (125.0 / 192) * k4 -
                    (2187.0 / 6784) * k5 + (11.0 / 84) * k6);
      f(y5, k7);
      err = h * ((71.0 / 57600) * k1 - (71.0 / 16695) * k3 + (71.0 / 1920) * k4 -
                 (17253.0 / 339200) * k5 + (22.0 / 525) * k6 - (1.0 / 40) * k7);

      double acc = 0.0;
      for (Eigen::Index j = 0; j < y.cols(); ++j)
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
          const double sc =
              opt_.atol + opt_.rtol * std::max(std::abs(y(i, j)), std::abs(y5(i, j)));
          const double r = std::abs(err(i, j)) / sc;
          acc += r * r;
        }
      const double e = std::sqrt(acc / static_cast<double>(y.size()));
      if (!std::isfinite(e))
        throw NumericalError("lindblad_evolve: non-finite error estimate");

      if (e <= 1.0) {
        t = last ? duration : t + h;
        y.swap(y5);
        k1.swap(k7);
        if (stats_)
          ++stats_->accepted;
        const double fac = e == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(e, -0.2), 0.2, 5.0);
        // Keep the unclipped step when the interval end truncated this one.
        if (!(last && h < h_))
          h_ = h * fac;
      } else {
        if (stats_)
          ++stats_->rejected;
        h_ = h * std::max(0.2, 0.9 * std::pow(e, -0.2));
        if (h_ < 1e-12 * std::max(1.0, duration))
          throw NumericalError("lindblad_evolve: step size underflow");
      }
    }
  }

private:
  LindbladOptions opt_;
  LindbladStats *stats_;
  double h_ = 0.0;
  std::size_t steps_ = 0;
};

void check_lindblad_inputs(const DensityOp &rho, const LinearOp &h,
                           const CollapseSet &collapses, const LindbladOptions &o) {
  if (!(rho.space() == h.space()))
    throw DomainError("lindblad_evolve: rho and H live on different spaces");
  for (const auto &c : collapses)
    if (!(c.op.space() == h.space()))
      throw DomainError("lindblad_evolve: collapse operator on a different space");
  if (rho.matrix().rows() > o.max_dim)
    throw DomainError("lindblad_evolve: dimension " + std::to_string(rho.matrix().rows()) +
                      " exceeds max_dim " + std::to_string(o.max_dim));
  if (!h.is_hermitian())
    throw DomainError("lindblad_evolve: H is not hermitian");
}

DensityOp finish(const CompositeSpace &sp, CMat y) {
  CMat sym = 0.5 * (y + y.adjoint());
  return {sp, std::move(sym)};
}

} // namespace

PulseSequence::PulseSequence(double dt) : dt_(dt) {
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw DomainError("PulseSequence: dt must be positive");
}

std::size_t PulseSequence::find(const std::string &label) const {
  for (std::size_t i = 0; i < channels_.size(); ++i)
    if (channels_[i].label == label)
      return i;
  return npos;
}

void PulseSequence::add_channel(PulseChannel channel, std::vector<cplx> samples) {
  if (find(channel.label) != npos)
    throw DomainError("PulseSequence: duplicate channel '" + channel.label + "'");
  if (channels_.empty())
    steps_ = samples.size();
  else if (samples.size() != steps_)
    throw DomainError("PulseSequence: channel length mismatch");
  channels_.push_back(std::move(channel));
  amps_.push_back(std::move(samples));
}

void PulseSequence::append(const PulseSequence &next) {
  if (next.dt_ != dt_)
    throw DomainError("PulseSequence::append: dt mismatch");
  for (const auto &c : next.channels_)
    if (find(c.label) == npos) {
      channels_.push_back(c);
      amps_.emplace_back(steps_, cplx(0.0));
    }
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    const auto j = next.find(channels_[i].label);
    if (j == npos) {
      amps_[i].resize(steps_ + next.steps_, cplx(0.0));
    } else {
      if (!(next.channels_[j] == channels_[i]))
        throw DomainError("PulseSequence::append: channel kind mismatch");
      amps_[i].insert(amps_[i].end(), next.amps_[j].begin(), next.amps_[j].end());
    }
  }
  steps_ += next.steps_;
}

std::string PulseSequence::to_csv() const {
  std::ostringstream out;
  out << "# dt_ns=" << fmt(dt_) << "\n# channels=";
  for (std::size_t c = 0; c < channels_.size(); ++c)
    out << (c ? "," : "") << channels_[c].label << ':' << kind_name(channels_[c].kind);
  out << "\nstep,channel,re,im\n";
  for (std::size_t k = 0; k < steps_; ++k)
    for (std::size_t c = 0; c < channels_.size(); ++c)
      out << k << ',' << channels_[c].label << ':' << kind_name(channels_[c].kind) << ','
          << fmt(amps_[c][k].real()) << ',' << fmt(amps_[c][k].imag()) << '\n';
  return out.str();
}

PulseSequence PulseSequence::from_csv(const std::string &text) {
  std::istringstream in(text);
  std::string line;
  double dt = 1.0;
  std::vector<PulseChannel> chans;
  std::map<std::string, std::size_t> chan_index;
  std::vector<std::vector<std::pair<std::size_t, cplx>>> rows;
  auto channel_of = [&](const std::string &spec) -> std::size_t {
    auto it = chan_index.find(spec);
    if (it != chan_index.end())
      return it->second;
    const auto colon = spec.rfind(':');
    if (colon == std::string::npos)
      throw DomainError("pulse CSV: channel must be label:kind, got '" + spec + "'");
    chans.push_back({spec.substr(0, colon), parse_kind(spec.substr(colon + 1))});
    rows.emplace_back();
    return chan_index[spec] = chans.size() - 1;
  };
  bool header = false;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty())
      continue;
    if (line[0] == '#') {
      const auto body = trim(line.substr(1));
      if (body.rfind("dt_ns=", 0) == 0)
        dt = parse_double(body.substr(6));
      else if (body.rfind("channels=", 0) == 0)
        for (const auto &spec : split(body.substr(9), ','))
          if (!trim(spec).empty())
            channel_of(trim(spec));
      continue;
    }
    if (!header) {
      if (line != "step,channel,re,im")
        throw DomainError("pulse CSV: expected header 'step,channel,re,im'");
      header = true;
      continue;
    }
    auto f = split(line, ',');
    if (f.size() != 4)
      throw DomainError("pulse CSV: expected 4 fields in '" + line + "'");
    const double step = parse_double(trim(f[0]));
    if (step < 0 || step != std::floor(step))
      throw DomainError("pulse CSV: bad step index '" + f[0] + "'");
    rows[channel_of(trim(f[1]))].emplace_back(
        static_cast<std::size_t>(step), cplx(parse_double(trim(f[2])), parse_double(trim(f[3]))));
  }
  PulseSequence p(dt);
  for (std::size_t c = 0; c < chans.size(); ++c) {
    std::size_t n = 0;
    for (const auto &[k, v] : rows[c])
      n = std::max(n, k + 1);
    std::vector<cplx> s(n, cplx(0.0));
    std::vector<bool> seen(n, false);
    for (const auto &[k, v] : rows[c]) {
      if (seen[k])
        throw DomainError("pulse CSV: duplicate step for channel " + chans[c].label);
      seen[k] = true;
      s[k] = v;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
      throw DomainError("pulse CSV: missing steps for channel " + chans[c].label);
    p.add_channel(chans[c], std::move(s));
  }
  return p;
}

std::string PulseSequence::to_json() const {
  nlohmann::json j;
  j["dt_ns"] = dt_;
  j["channels"] = nlohmann::json::array();
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    std::vector<double> re, im;
    for (const auto &v : amps_[c]) {
      re.push_back(v.real());
      im.push_back(v.imag());
    }
    j["channels"].push_back({{"label", channels_[c].label},
                             {"kind", kind_name(channels_[c].kind)},
                             {"re", re},
                             {"im", im}});
  }
  return j.dump(1);
}

PulseSequence PulseSequence::from_json(const std::string &text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    PulseSequence p(j.at("dt_ns").get<double>());
    for (const auto &c : j.at("channels")) {
      auto re = c.at("re").get<std::vector<double>>();
      auto im = c.at("im").get<std::vector<double>>();
      if (re.size() != im.size())
        throw DomainError("pulse JSON: re/im length mismatch");
      std::vector<cplx> s(re.size());
      for (std::size_t k = 0; k < re.size(); ++k)
        s[k] = {re[k], im[k]};
      p.add_channel({c.at("label").get<std::string>(), parse_kind(c.at("kind").get<std::string>())},
                    std::move(s));
    }
    return p;
  } catch (const nlohmann::json::exception &e) {
    throw DomainError(std::string("pulse JSON: ") + e.what());
  }
}

PulseSequence constant_pulse(const PulseChannel &channel, cplx amplitude, double duration,
                             double dt) {
  const double n = std::round(duration / dt);
  if (n < 0 || std::abs(n * dt - duration) > 1e-9 * std::max(1.0, duration))
    throw DomainError("constant_pulse: duration must be a non-negative multiple of dt");
  PulseSequence p(dt);
  p.add_channel(channel, std::vector<cplx>(static_cast<std::size_t>(n), amplitude));
  return p;
}

LinearOp segment_propagator(const LinearOp &h, double dt) {
  if (!h.is_hermitian())
    throw DomainError("segment_propagator: H is not hermitian");
  return {h.space(), expm_hermitian(h.matrix(), dt)};
}

CMat apply_propagator(const LinearOp &h, double t, const CMat &states) {
  if (!h.is_hermitian())
    throw DomainError("apply_propagator: H is not hermitian");
  if (states.rows() != h.dim())
    throw DomainError("apply_propagator: state dimension mismatch");
  CMat out = states;
  BlockHamiltonian(h, {}).apply({}, t, out);
  return out;
}

CMat evolve_pulse(const CMat &states, const LinearOp &h0, const PulseSequence &pulse,
                  const SystemLayout &layout) {
  check_h0(h0, layout);
  if (states.rows() != h0.dim())
    throw DomainError("evolve_pulse: state dimension mismatch");
  std::vector<DriveTerm> drives;
  for (const auto &c : pulse.channels())
    drives.push_back(resolve(c, layout));
  BlockHamiltonian bh(h0, drives);
  CMat out = states;
  std::vector<cplx> u(drives.size());
  for (const auto &run : sample_runs(pulse)) {
    for (std::size_t c = 0; c < u.size(); ++c)
      u[c] = pulse.amplitudes(c)[run.begin];
    bh.apply(u, pulse.dt() * static_cast<double>(run.length), out);
  }
  return out;
}

Ket evolve_pulse(const Ket &state, const LinearOp &h0, const PulseSequence &pulse,
                 const SystemLayout &layout) {
  if (!(state.space() == layout.space()))
    throw DomainError("evolve_pulse: state space does not match the layout");
  CMat col = evolve_pulse(CMat(state.amplitudes()), h0, pulse, layout);
  return {state.space(), col.col(0)};
}

LinearOp pulse_propagator(const LinearOp &h0, const PulseSequence &pulse,
                          const SystemLayout &layout) {
  const auto n = h0.dim();
  return {h0.space(), evolve_pulse(CMat::Identity(n, n), h0, pulse, layout)};
}

double dephasing_rate(double t1, double t2) {
  if (!(t1 > 0.0) || !(t2 > 0.0))
    throw DomainError("dephasing_rate: T1 and T2 must be positive");
  if (t2 > 2.0 * t1)
    throw DomainError("dephasing_rate: T2 > 2 T1 is unphysical");
  return 1.0 / t2 - 0.5 / t1;
}

CollapseSet standard_collapses(const DeviceParams &params, const SystemLayout &layout) {
  CollapseSet out;
  const auto &sp = layout.space();
  for (const auto &label : layout.labels()) {
    const auto &m = params.mode(label);
    const double t2 = params.t2_effective(label);
    const double gamma1 = std::isfinite(m.t1) ? 1.0 / m.t1 : 0.0;
    const double gphi = std::isfinite(t2) ? dephasing_rate(m.t1, t2) : 0.0;
    const std::size_t idx = layout.index(label);
    if (layout.is_qubit(label)) {
      if (gamma1 > 0.0)
        out.push_back({std::sqrt(gamma1) * embed(sigma_minus(), idx, sp), gamma1,
                       label + " relaxation"});
      if (gphi > 0.0)
        out.push_back({std::sqrt(gphi / 2.0) * embed(sigma_z(), idx, sp), gphi,
                       label + " dephasing"});
    } else {
      if (gamma1 > 0.0)
        out.push_back({std::sqrt(gamma1) * embed(annihilation(sp[idx]), idx, sp), gamma1,
                       label + " photon loss"});
      if (gphi > 0.0)
        out.push_back({std::sqrt(2.0 * gphi) * embed(number_op(sp[idx]), idx, sp), gphi,
                       label + " dephasing"});
    }
  }
  return out;
}

DensityOp lindblad_evolve(const DensityOp &rho, const LinearOp &h,
                          const CollapseSet &collapses, double duration,
                          const LindbladOptions &options, LindbladStats *stats) {
  check_lindblad_inputs(rho, h, collapses, options);
  if (duration < 0.0)
    throw DomainError("lindblad_evolve: negative duration");
  CMat y = rho.matrix();
  DormandPrince dp(options, stats);
  dp.integrate(LindbladRhs(h.matrix(), collapses), y, duration);
  return finish(rho.space(), std::move(y));
}

DensityOp lindblad_evolve(const DensityOp &rho, const LinearOp &h0,
                          const PulseSequence &pulse, const SystemLayout &layout,
                          const CollapseSet &collapses, const LindbladOptions &options,
                          LindbladStats *stats) {
  check_h0(h0, layout);
  check_lindblad_inputs(rho, h0, collapses, options);
  std::vector<DriveTerm> drives;
  for (const auto &c : pulse.channels())
    drives.push_back(resolve(c, layout));
  CMat y = rho.matrix();
  DormandPrince dp(options, stats);
  for (const auto &run : sample_runs(pulse)) {
    CMat h = h0.matrix();
    for (std::size_t c = 0; c < drives.size(); ++c)
      h += drives[c].matrix(pulse.amplitudes(c)[run.begin]);
    dp.integrate(LindbladRhs(h, collapses), y, pulse.dt() * static_cast<double>(run.length));
  }
  return finish(rho.space(), std::move(y));
}

} // namespace geophase
