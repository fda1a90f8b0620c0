#include "geophase/device.hpp"

#include "geophase/diagnostics.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace geophase {

namespace {

std::pair<std::string, std::string> key(const std::string &a, const std::string &b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

void DeviceParams::add_mode(ModeParams mode) {
  const std::string label = mode.label;
  modes_[label] = std::move(mode);
}

void DeviceParams::set_coupling(const std::string &a, const std::string &b,
                                double value) {
  couplings_[key(a, b)] = value;
}

const ModeParams &DeviceParams::mode(const std::string &label) const {
  auto it = modes_.find(label);
  if (it == modes_.end())
    throw DomainError("unknown mode label '" + label + "'");
  return it->second;
}

double DeviceParams::coupling(const std::string &a, const std::string &b) const {
  auto it = couplings_.find(key(a, b));
  return it == couplings_.end() ? 0.0 : it->second;
}

double DeviceParams::t2_effective(const std::string &label) const {
  const auto &m = mode(label);
  if (dephasing_source == DephasingSource::echo && std::isfinite(m.t2_echo))
    return m.t2_echo;
  return m.t2;
}

DeviceParams DeviceParams::with_kerr_scaled(double factor) const {
  DeviceParams out = *this;
  for (auto &[k, v] : out.couplings_) {
    const bool both_cavities = mode(k.first).role == ModeRole::cavity &&
                               mode(k.second).role == ModeRole::cavity;
    if (both_cavities)
      v *= factor;
  }
  return out;
}

DeviceParams DeviceParams::with_coherence_disabled() const {
  DeviceParams out = *this;
  for (auto &[label, m] : out.modes_)
    m.t1 = m.t2 = m.t2_echo = kInf;
  return out;
}

void DeviceParams::validate() const {
  for (const auto &[k, v] : couplings_) {
    if (!modes_.count(k.first) || !modes_.count(k.second))
      throw DomainError("coupling references unknown mode " + k.first + "/" + k.second);
    if (v < 0.0)
      throw DomainError("coupling " + k.first + "-" + k.second + " must be >= 0");
  }
  for (const auto &[label, m] : modes_) {
    if (!(m.t1 > 0.0) || !(m.t2 > 0.0) || !(m.t2_echo > 0.0))
      throw DomainError("coherence times of " + label + " must be positive");
    if (std::isfinite(m.t2) && m.t2 > 2.0 * m.t1)
      throw DomainError("T2* of " + label + " exceeds 2 T1");
    if (std::isfinite(m.t2_echo) && m.t2_echo > 2.0 * m.t1)
      throw DomainError("T2echo of " + label + " exceeds 2 T1");
  }
}

// ---------------------------------------------------------------------------

namespace {

namespace pt = boost::property_tree;

double parse_number(const std::string &s, const std::string &where) {
  if (s == "-" || s.empty())
    return kInf;
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size())
      throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    throw DomainError("config: cannot parse number '" + s + "' in " + where);
  }
}

std::vector<std::string> split_ws(const std::string &s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;)
    out.push_back(tok);
  return out;
}

ModeRole parse_role(const std::string &s, const std::string &label) {
  if (s == "qubit")
    return ModeRole::qubit;
  if (s == "cavity")
    return ModeRole::cavity;
  if (s == "readout")
    return ModeRole::readout;
  throw DomainError("config: mode " + label + " has unknown kind '" + s + "'");
}

std::string required(const pt::ptree &section, const std::string &name,
                     const std::string &label) {
  auto v = section.get_optional<std::string>(name);
  if (!v)
    throw DomainError("config: mode " + label + " is missing field " + name);
  return *v;
}

double optional_us(const pt::ptree &section, const std::string &name,
                   const std::string &label) {
  auto v = section.get_optional<std::string>(name);
  if (!v)
    return kInf;
  return parse_number(*v, label + "." + name) * 1e3;
}

} // namespace

DeviceParams load_params(std::string_view config_text) {
  pt::ptree tree;
  std::istringstream is{std::string(config_text)};
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error &e) {
    throw DomainError(std::string("config: ") + e.what());
  }

  DeviceParams params;
  for (const auto &[name, section] : tree) {
    if (name == "options" || name == "chi_MHz")
      continue;
    ModeParams m;
    m.label = name;
    m.role = parse_role(required(section, "kind", name), name);
    m.frequency = ghz_to_rad_per_ns(
        parse_number(required(section, "frequency_GHz", name), name + ".frequency_GHz"));
    m.t1 = parse_number(required(section, "T1_us", name), name + ".T1_us") * 1e3;
    if (m.role != ModeRole::readout) {
      m.t2 = parse_number(required(section, "T2_us", name), name + ".T2_us") * 1e3;
    } else {
      m.t2 = optional_us(section, "T2_us", name);
    }
    m.t2_echo = optional_us(section, "T2echo_us", name);
    params.add_mode(std::move(m));
  }
  if (params.modes().empty())
    throw DomainError("config: no modes defined");

  if (auto opts = tree.get_child_optional("options")) {
    const auto src = opts->get<std::string>("dephasing", "ramsey");
    if (src == "ramsey")
      params.dephasing_source = DephasingSource::ramsey;
    else if (src == "echo")
      params.dephasing_source = DephasingSource::echo;
    else
      throw DomainError("config: options.dephasing must be ramsey or echo");
  }

  auto chi = tree.get_child_optional("chi_MHz");
  if (!chi)
    throw DomainError("config: missing [chi_MHz] table");
  const auto columns = split_ws(required(*chi, "columns", "chi_MHz"));
  for (const auto &c : columns)
    params.mode(c); // throws on unknown column label

  // Entries are read row by row; a pair listed twice must agree.
  std::map<std::pair<std::string, std::string>, double> seen;
  for (const auto &[row, value] : *chi) {
    if (row == "columns")
      continue;
    params.mode(row);
    const auto cells = split_ws(value.data());
    if (cells.size() != columns.size())
      throw DomainError("config: chi_MHz row " + row + " has wrong number of entries");
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const double mhz = parse_number(cells[j], "chi_MHz." + row);
      if (!std::isfinite(mhz))
        continue;
      const auto &col = columns[j];
      if (row == col && params.mode(row).role == ModeRole::qubit) {
        ModeParams m = params.mode(row);
        m.anharmonicity = mhz_to_rad_per_ns(mhz);
        params.add_mode(std::move(m));
        continue;
      }
      auto k = key(row, col);
      if (auto it = seen.find(k); it != seen.end() && it->second != mhz)
        throw DomainError("config: chi_MHz is not symmetric for " + row + "/" + col);
      seen[k] = mhz;
      params.set_coupling(row, col, mhz_to_rad_per_ns(mhz));
    }
  }
  params.validate();
  return params;
}

DeviceParams load_params_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw DomainError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_params(ss.str());
}

std::filesystem::path data_path(std::string_view file_name) {
  return std::filesystem::path(GEOPHASE_DATA_DIR) / std::string(file_name);
}

DeviceParams default_device() { return load_params_file(data_path("device_b.cfg")); }

// ---------------------------------------------------------------------------

SystemLayout::SystemLayout(std::vector<std::string> qubits,
                           std::vector<std::pair<std::string, int>> cavities)
    : qubits_(std::move(qubits)) {
  std::vector<ModeSpec> specs;
  for (const auto &q : qubits_) {
    labels_.push_back(q);
    specs.push_back(ModeSpec::qubit());
  }
  for (const auto &[c, d] : cavities) {
    cavities_.push_back(c);
    labels_.push_back(c);
    specs.push_back(ModeSpec::bosonic(d));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (!index_.emplace(labels_[i], i).second)
      throw DomainError("layout: duplicate label " + labels_[i]);
  space_ = CompositeSpace(std::move(specs));
}

std::size_t SystemLayout::index(const std::string &label) const {
  auto it = index_.find(label);
  if (it == index_.end())
    throw DomainError("layout has no factor '" + label + "'");
  return it->second;
}

bool SystemLayout::is_qubit(const std::string &label) const {
  return index(label) < qubits_.size();
}

int SystemLayout::cavity_dim(const std::string &label) const {
  if (is_qubit(label))
    throw DomainError(label + " is not a cavity");
  return space_.dim(index(label));
}

RVec static_energies(const DeviceParams &params, const SystemLayout &layout) {
  const auto &sp = layout.space();
  const auto &qs = layout.qubits();
  const auto &cs = layout.cavities();
  struct Term {
    std::size_t i, j;
    double c;
  };
  std::vector<Term> dispersive, cross;
  std::vector<std::pair<std::size_t, double>> self;
  for (const auto &q : qs)
    for (const auto &c : cs)
      if (double chi = params.coupling(q, c); chi != 0.0)
        dispersive.push_back({layout.index(q), layout.index(c), chi});
  for (std::size_t a = 0; a < cs.size(); ++a) {
    if (double k = params.self_kerr(cs[a]); k != 0.0)
      self.emplace_back(layout.index(cs[a]), k);
    for (std::size_t b = a + 1; b < cs.size(); ++b)
      if (double x = params.coupling(cs[a], cs[b]); x != 0.0)
        cross.push_back({layout.index(cs[a]), layout.index(cs[b]), x});
  }
  RVec e = RVec::Zero(sp.total_dim());
  for (Eigen::Index j = 0; j < sp.total_dim(); ++j) {
    const auto lv = sp.levels(j);
    double v = 0.0;
    for (const auto &t : dispersive)
      v -= t.c * lv[t.i] * lv[t.j];
    for (const auto &[i, k] : self)
      v -= 0.5 * k * lv[i] * (lv[i] - 1);
    for (const auto &t : cross)
      v -= t.c * lv[t.i] * lv[t.j];
    e(j) = v;
  }
  return e;
}

LinearOp static_hamiltonian(const DeviceParams &params, const SystemLayout &layout) {
  return {layout.space(), static_energies(params, layout).cast<cplx>().asDiagonal()};
}

// ---------------------------------------------------------------------------

DriveTerm::DriveTerm(std::string label, DriveKind kind, LinearOp raising,
                     double scale, double detuning)
    : label_(std::move(label)), kind_(kind), raising_(std::move(raising)),
      scale_(scale), detuning_(detuning) {}

CMat DriveTerm::matrix(cplx amplitude, double t) const {
  const cplx u = scale_ * amplitude * std::exp(-I_UNIT * detuning_ * t);
  CMat m = u * raising_.matrix();
  return m + m.adjoint().eval();
}

LinearOp DriveTerm::hamiltonian(cplx amplitude, double t) const {
  return {raising_.space(), matrix(amplitude, t)};
}

std::pair<CMat, CMat> DriveTerm::generators() const {
  const CMat &r = raising_.matrix();
  CMat hx = scale_ * (r + r.adjoint());
  CMat hy = scale_ * I_UNIT * (r - r.adjoint());
  return {hx, hy};
}

DriveTerm qubit_drive(const SystemLayout &layout, const std::string &label,
                      double detuning) {
  if (!layout.is_qubit(label))
    throw DomainError("qubit_drive: " + label + " is not a qubit");
  return {label, DriveKind::qubit,
          embed(sigma_plus(), layout.index(label), layout.space()), 0.5, detuning};
}

DriveTerm cavity_drive(const SystemLayout &layout, const std::string &label,
                       double detuning) {
  const std::size_t idx = layout.index(label);
  if (layout.is_qubit(label))
    throw DomainError("cavity_drive: " + label + " is not a cavity");
  return {label, DriveKind::cavity,
          embed(creation(layout.space()[idx]), idx, layout.space()), 1.0, detuning};
}

LinearOp fock_projector(const SystemLayout &layout,
                        const std::vector<std::map<std::string, int>> &states) {
  const auto &sp = layout.space();
  RVec diag = RVec::Zero(sp.total_dim());
  for (const auto &st : states) {
    std::vector<std::pair<std::size_t, int>> req;
    for (const auto &[label, n] : st) {
      if (layout.is_qubit(label))
        throw DomainError("fock_projector: " + label + " is not a cavity");
      if (n < 0 || n >= layout.cavity_dim(label))
        throw DomainError("fock_projector: photon number outside truncation");
      req.emplace_back(layout.index(label), n);
    }
    for (Eigen::Index j = 0; j < sp.total_dim(); ++j) {
      const auto lv = sp.levels(j);
      bool match = true;
      for (const auto &[i, n] : req)
        match = match && lv[i] == n;
      if (match)
        diag(j) = 1.0;
    }
  }
  return {sp, diag.cast<cplx>().asDiagonal()};
}

LinearOp effective_conditional_drive(double epsilon, double phi,
                                     const LinearOp &condition,
                                     const SystemLayout &layout,
                                     const std::string &qubit) {
  if (!(condition.space() == layout.space()))
    throw DomainError("effective_conditional_drive: projector space mismatch");
  if (!condition.is_diagonal(1e-14))
    throw DomainError("effective_conditional_drive: projector must be diagonal");
  if (!layout.is_qubit(qubit))
    throw DomainError("effective_conditional_drive: " + qubit + " is not a qubit");
  // sigma^+ is a partial permutation, so the product with the diagonal
  // projector is read off its nonzero entries.
  const CMat sp = embed(sigma_plus(), layout.index(qubit), layout.space()).matrix();
  const CVec p = condition.matrix().diagonal();
  const cplx amp = 0.5 * epsilon * std::exp(I_UNIT * phi);
  const Eigen::Index n = sp.rows();
  CMat m = CMat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      if (sp(i, j) != cplx(0.0)) {
        if (std::abs(p(i) - p(j)) > 1e-14)
          throw DomainError("effective_conditional_drive: projector must act trivially on the qubit");
        m(i, j) = amp * sp(i, j) * p(j);
      }
  return {layout.space(), m + m.adjoint().eval()};
}

} // namespace geophase
