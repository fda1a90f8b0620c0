#include "geophase/readout.hpp"

#include "geophase/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace geophase {

namespace {

int qubits_for_dim(Eigen::Index d) {
  int n = 0;
  while ((Eigen::Index{1} << n) < d)
    ++n;
  if ((Eigen::Index{1} << n) != d || n == 0)
    throw DomainError("assignment matrix dimension must be 2^n with n >= 1");
  return n;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(trim(cell));
  return out;
}

RVec diagonal_probs(const CVec &diag, const SystemLayout &layout,
                    const std::vector<std::string> &qubits) {
  if (qubits.empty())
    throw DomainError("qubit_measurement_probs: no qubits listed");
  std::vector<std::size_t> factors;
  for (const auto &q : qubits) {
    if (!layout.is_qubit(q))
      throw DomainError("qubit_measurement_probs: '" + q + "' is not a qubit");
    factors.push_back(layout.index(q));
  }
  const auto &sp = layout.space();
  const int n = static_cast<int>(qubits.size());
  RVec p = RVec::Zero(Eigen::Index{1} << n);
  for (Eigen::Index j = 0; j < diag.size(); ++j) {
    const auto lv = sp.levels(j);
    Eigen::Index k = 0;
    for (auto f : factors)
      k = 2 * k + lv[f];
    p(k) += diag(j).real();
  }
  return p;
}

} // namespace

std::string outcome_label(int index, int n_qubits) {
  std::string s(static_cast<std::size_t>(n_qubits), '0');
  for (int b = 0; b < n_qubits; ++b)
    if (index >> (n_qubits - 1 - b) & 1)
      s[static_cast<std::size_t>(b)] = '1';
  return s;
}

std::string state_label(int index, int n_qubits) {
  std::string s = outcome_label(index, n_qubits);
  for (auto &c : s)
    c = c == '1' ? 'e' : 'g';
  return s;
}

AssignmentMatrix make_assignment(const RMat &table, double sum_tolerance) {
  if (table.rows() != table.cols())
    throw DomainError("assignment matrix must be square");
  AssignmentMatrix a;
  a.n_qubits = qubits_for_dim(table.rows());
  if ((table.array() < 0.0).any())
    throw DomainError("assignment matrix has a negative entry");
  if (!table.allFinite())
    throw DomainError("assignment matrix has a non-finite entry");
  a.raw = table;
  a.R = table;
  for (Eigen::Index c = 0; c < table.cols(); ++c) {
    const double s = table.col(c).sum();
    if (s <= 0.0)
      throw DomainError("assignment matrix has an empty column");
    if (std::abs(s - 1.0) > sum_tolerance)
      warn("assignment column " + state_label(static_cast<int>(c), a.n_qubits) + " sums to " +
           std::to_string(s) + "; renormalizing");
    a.R.col(c) /= s;
  }
  Eigen::JacobiSVD<RMat> svd(a.R);
  const RVec &sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (!(smin > 1e-12 * sv(0)))
    throw DomainError("assignment matrix is singular");
  a.condition_number = sv(0) / smin;
  for (int i = 0; i < table.rows(); ++i) {
    a.outcome_labels.push_back(outcome_label(i, a.n_qubits));
    a.state_labels.push_back(state_label(i, a.n_qubits));
  }
  return a;
}

AssignmentMatrix parse_assignment_csv(const std::string &text) {
  std::stringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#')
      continue;
    if (header.empty())
      header = split(t);
    else
      rows.push_back(split(t));
  }
  if (header.size() < 3)
    throw DomainError("assignment CSV: missing header");
  const Eigen::Index d = static_cast<Eigen::Index>(header.size() - 1);
  const int n = qubits_for_dim(d);
  if (static_cast<Eigen::Index>(rows.size()) != d)
    throw DomainError("assignment CSV: expected " + std::to_string(d) + " rows");

  // Columns and rows may appear in any order; labels fix the placement.
  std::vector<Eigen::Index> col_of(static_cast<std::size_t>(d), -1);
  for (Eigen::Index c = 0; c < d; ++c) {
    const auto &lab = header[static_cast<std::size_t>(c + 1)];
    Eigen::Index k = -1;
    for (int i = 0; i < d; ++i)
      if (state_label(i, n) == lab)
        k = i;
    if (k < 0)
      throw DomainError("assignment CSV: unknown state label '" + lab + "'");
    col_of[static_cast<std::size_t>(c)] = k;
  }
  RMat table = RMat::Constant(d, d, std::nan(""));
  for (const auto &row : rows) {
    if (static_cast<Eigen::Index>(row.size()) != d + 1)
      throw DomainError("assignment CSV: ragged row");
    Eigen::Index r = -1;
    for (int i = 0; i < d; ++i)
      if (outcome_label(i, n) == row[0])
        r = i;
    if (r < 0)
      throw DomainError("assignment CSV: unknown outcome label '" + row[0] + "'");
    for (Eigen::Index c = 0; c < d; ++c) {
      const auto &cell = row[static_cast<std::size_t>(c + 1)];
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used == 0 || used != cell.size())
        throw DomainError("assignment CSV: bad number '" + cell + "'");
      table(r, col_of[static_cast<std::size_t>(c)]) = v;
    }
  }
  if (table.hasNaN())
    throw DomainError("assignment CSV: duplicate or missing labels");
  return make_assignment(table);
}

AssignmentMatrix load_assignment(const std::filesystem::path &path) {
  std::ifstream f(path);
  if (!f)
    throw DomainError("cannot open assignment file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_assignment_csv(ss.str());
}

AssignmentMatrix default_assignment() { return load_assignment(data_path("table_s3.csv")); }

AssignmentMatrix identity_assignment(int n_qubits) {
  if (n_qubits < 1)
    throw DomainError("identity_assignment: n_qubits must be positive");
  const Eigen::Index d = Eigen::Index{1} << n_qubits;
  return make_assignment(RMat::Identity(d, d));
}

AssignmentMatrix kron_assignment(const std::vector<Eigen::Matrix2d> &per_qubit) {
  if (per_qubit.empty())
    throw DomainError("kron_assignment: no qubits");
  RMat out = RMat::Ones(1, 1);
  for (const auto &m : per_qubit) {
    RMat next(out.rows() * 2, out.cols() * 2);
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index j = 0; j < out.cols(); ++j)
        next.block(2 * i, 2 * j, 2, 2) = out(i, j) * m;
    out = std::move(next);
  }
  return make_assignment(out);
}

AssignmentMatrix marginal_assignment(const AssignmentMatrix &a, const std::vector<int> &keep) {
  const int n = a.n_qubits;
  const int m = static_cast<int>(keep.size());
  if (m == 0)
    throw DomainError("marginal_assignment: nothing kept");
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] < 0 || keep[i] >= n)
      throw DomainError("marginal_assignment: qubit index out of range");
    for (std::size_t j = 0; j < i; ++j)
      if (keep[j] == keep[i])
        throw DomainError("marginal_assignment: duplicate qubit");
  }
  auto bit = [n](Eigen::Index idx, int q) { return static_cast<int>(idx >> (n - 1 - q)) & 1; };
  const Eigen::Index dk = Eigen::Index{1} << m;
  RMat out = RMat::Zero(dk, dk);
  for (Eigen::Index s = 0; s < dk; ++s) {
    // Full prepared index: kept qubits from s, the rest in |g>.
    Eigen::Index full = 0;
    for (int i = 0; i < m; ++i)
      if (s >> (m - 1 - i) & 1)
        full |= Eigen::Index{1} << (n - 1 - keep[static_cast<std::size_t>(i)]);
    for (Eigen::Index o = 0; o < a.R.rows(); ++o) {
      Eigen::Index ok = 0;
      for (int i = 0; i < m; ++i)
        ok = 2 * ok + bit(o, keep[static_cast<std::size_t>(i)]);
      out(ok, s) += a.R(o, full);
    }
  }
  return make_assignment(out);
}

RVec project_to_simplex(const RVec &v) {
  // Sort-based Euclidean projection onto {x >= 0, sum x = 1}.
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0)
      theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

RVec correct_readout(const RVec &p_measured, const AssignmentMatrix &a, CorrectionMode mode,
                     CorrectionReport *report, double tolerance) {
  if (p_measured.size() != a.R.rows())
    throw DomainError("correct_readout: vector length does not match the assignment matrix");
  if ((p_measured.array() < 0.0).any() || std::abs(p_measured.sum() - 1.0) > 1e-6)
    throw DomainError("correct_readout: input is not a probability vector");
  RVec p = a.R.partialPivLu().solve(p_measured);
  const double mn = p.minCoeff();
  const bool negative = mn < -tolerance;
  if (report)
    *report = CorrectionReport{negative, mn};
  if (negative && mode == CorrectionMode::simplex)
    return project_to_simplex(p);
  return p;
}

std::vector<long long> sample_assignment(const RVec &p_true, const AssignmentMatrix &a,
                                         long long shots, std::uint64_t seed) {
  if (p_true.size() != a.R.cols())
    throw DomainError("sample_assignment: vector length does not match the assignment matrix");
  if (shots <= 0)
    throw DomainError("sample_assignment: shots must be positive");
  if ((p_true.array() < -1e-12).any() || std::abs(p_true.sum() - 1.0) > 1e-6)
    throw DomainError("sample_assignment: p_true is not a probability vector");
  const RVec q = (a.R * p_true.cwiseMax(0.0)).eval();
  std::mt19937_64 rng(seed);
  std::vector<long long> counts(static_cast<std::size_t>(q.size()), 0);
  // Conditional-binomial chain.
  long long left = shots;
  double mass = q.sum();
  for (Eigen::Index k = 0; k + 1 < q.size() && left > 0; ++k) {
    const double pk = mass > 0.0 ? std::clamp(q(k) / mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<long long> bd(left, pk);
    const long long c = bd(rng);
    counts[static_cast<std::size_t>(k)] = c;
    left -= c;
    mass -= q(k);
  }
  counts.back() += left;
  return counts;
}

RVec qubit_measurement_probs(const DensityOp &rho, const SystemLayout &layout,
                             const std::vector<std::string> &qubits) {
  if (!(rho.space() == layout.space()))
    throw DomainError("qubit_measurement_probs: state does not live on the layout");
  return diagonal_probs(rho.matrix().diagonal(), layout, qubits);
}

RVec qubit_measurement_probs(const Ket &psi, const SystemLayout &layout,
                             const std::vector<std::string> &qubits) {
  if (!(psi.space() == layout.space()))
    throw DomainError("qubit_measurement_probs: state does not live on the layout");
  return diagonal_probs(psi.amplitudes().cwiseAbs2().cast<cplx>(), layout, qubits);
}

} // namespace geophase
