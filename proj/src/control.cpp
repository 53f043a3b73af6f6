#include "lfm/control.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lfm/errors.hpp"
#include "lfm/systheory.hpp"

namespace lfm::control {

void CostSpec::validate(Eigen::Index n_f, Eigen::Index m) const {
  if (X.rows() != n_f || X.cols() != n_f || Phi.rows() != n_f || Phi.cols() != n_f ||
      U.rows() != m || U.cols() != m) {
    std::ostringstream os;
    os << "CostSpec: expected X, Phi " << n_f << "x" << n_f << " and U " << m << "x" << m;
    throw ArgumentError(os.str());
  }
  if (!numlin::is_symmetric(X) || !numlin::is_psd(X)) throw ArgumentError("CostSpec: X must be symmetric PSD");
  if (!numlin::is_symmetric(Phi) || !numlin::is_psd(Phi)) {
    throw ArgumentError("CostSpec: Phi must be symmetric PSD");
  }
  if (!numlin::is_symmetric(U) || (m > 0 && U.llt().info() != Eigen::Success)) {
    throw ArgumentError("CostSpec: U must be symmetric positive definite");
  }
  if (!(horizon > 0.0)) throw ArgumentError("CostSpec: horizon must be positive");
}

const Matrix& LqrSolution::gain_at(double t) const {
  if (mode == GainMode::Stationary || times.empty()) return gain;
  auto it = std::upper_bound(times.begin(), times.end(), t);
  const size_t k = it == times.begin() ? 0 : size_t(it - times.begin()) - 1;
  return gain_trajectory[k];
}

double riccati_step(const Matrix& a) {
  const double norm = a.norm();
  return norm > 0.0 ? std::min(0.01, 0.1 / norm) : 0.01;
}

namespace {

struct Lifted {
  Matrix xg, phig, uinv, g;
};

Lifted lift_cost(const model::AugmentedLfm& aug, const CostSpec& cost) {
  cost.validate(aug.n_f, aug.M.cols());
  const auto n = aug.dim();
  Lifted l;
  l.xg = Matrix::Zero(n, n);
  l.xg.topLeftCorner(aug.n_f, aug.n_f) = cost.X;
  l.phig = Matrix::Zero(n, n);
  l.phig.topLeftCorner(aug.n_f, aug.n_f) = cost.Phi;
  l.uinv = cost.U.llt().solve(Matrix::Identity(cost.U.rows(), cost.U.cols()));
  l.uinv = 0.5 * (l.uinv + l.uinv.transpose());
  l.g = aug.M * l.uinv * aug.M.transpose();
  return l;
}

void check_grid(const std::vector<double>& grid) {
  if (grid.size() < 2) throw ArgumentError("Riccati grid needs at least two points");
  for (size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw ArgumentError("Riccati grid must be strictly increasing");
  }
}

void check_blowup(const Matrix& p, double t) {
  if (!p.allFinite() || p.norm() > 1e12) {
    std::ostringstream os;
    os << "backward Riccati integration blew up near t = " << t;
    throw IntegrationError(os.str());
  }
}

// Integrates a state backward over the grid with RK4; `rate` returns the
// derivative in reversed time s = T - t.
template <class State, class Rate, class Record>
void integrate_backward(State state, const std::vector<double>& grid, double h_max, Rate rate,
                        Record record) {
  record(grid.size() - 1, state);
  for (size_t k = grid.size() - 1; k-- > 0;) {
    const double interval = grid[k + 1] - grid[k];
    const long steps = std::max(1L, long(std::ceil(interval / h_max - 1e-9)));
    const double h = interval / double(steps);
    for (long s = 0; s < steps; ++s) {
      const State k1 = rate(state);
      const State k2 = rate(state + (0.5 * h) * k1);
      const State k3 = rate(state + (0.5 * h) * k2);
      const State k4 = rate(state + h * k3);
      state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    record(k, state);
  }
}

LqrSolution finalize_trajectory(LqrSolution sol, const Matrix& uinv, const Matrix& m) {
  sol.mode = GainMode::FiniteHorizon;
  sol.gain_trajectory.resize(sol.P_trajectory.size());
  for (size_t k = 0; k < sol.P_trajectory.size(); ++k) {
    sol.gain_trajectory[k] = uinv * m.transpose() * sol.P_trajectory[k];
  }
  sol.P = sol.P_trajectory.front();
  sol.gain = sol.gain_trajectory.front();
  return sol;
}

// Connected components of the coupling pattern of A, G and Xg.
std::vector<std::vector<Eigen::Index>> decoupled_components(const Matrix& a, const Matrix& g,
                                                            const Matrix& xg) {
  const auto n = a.rows();
  std::vector<Eigen::Index> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](Eigen::Index i) {
    while (parent[size_t(i)] != i) i = parent[size_t(i)] = parent[size_t(parent[size_t(i)])];
    return i;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && (a(i, j) != 0.0 || g(i, j) != 0.0 || xg(i, j) != 0.0)) {
        parent[size_t(find(i))] = find(j);
      }
    }
  }
  std::vector<std::vector<Eigen::Index>> groups;
  std::vector<long> slot(size_t(n), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = find(i);
    if (slot[size_t(r)] < 0) {
      slot[size_t(r)] = long(groups.size());
      groups.emplace_back();
    }
    groups[size_t(slot[size_t(r)])].push_back(i);
  }
  return groups;
}

Matrix select(const Matrix& a, const std::vector<Eigen::Index>& rows,
              const std::vector<Eigen::Index>& cols) {
  Matrix out(Eigen::Index(rows.size()), Eigen::Index(cols.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) out(Eigen::Index(i), Eigen::Index(j)) = a(rows[i], cols[j]);
  return out;
}

// Stationary Riccati solution, split into independent sub-problems when the
// sparsity pattern allows it.
Matrix care_maybe_decoupled(const Matrix& a, const Matrix& m, const Matrix& uinv, const Matrix& xg,
                            bool decouple) {
  const Matrix g = m * uinv * m.transpose();
  const auto groups = decouple ? decoupled_components(a, g, xg)
                               : std::vector<std::vector<Eigen::Index>>{};
  if (groups.size() <= 1) return numlin::solve_care(a, m, uinv, xg).matrix();

  const auto n = a.rows();
  Matrix p = Matrix::Zero(n, n);
  std::vector<Eigen::Index> all_cols(size_t(m.cols()));
  std::iota(all_cols.begin(), all_cols.end(), 0);
  for (const auto& idx : groups) {
    const Matrix pb = numlin::solve_care(select(a, idx, idx), select(m, idx, all_cols), uinv,
                                         select(xg, idx, idx))
                          .matrix();
    for (size_t i = 0; i < idx.size(); ++i)
      for (size_t j = 0; j < idx.size(); ++j) p(idx[i], idx[j]) = pb(Eigen::Index(i), Eigen::Index(j));
  }
  return p;
}

// Riccati blocks P11 (n_f x n_f), P12 (n_f x n_u), P22 (n_u x n_u).
struct RiccatiBlocks {
  Matrix p11, p12, p22;
};
RiccatiBlocks operator+(const RiccatiBlocks& a, const RiccatiBlocks& b) {
  return {a.p11 + b.p11, a.p12 + b.p12, a.p22 + b.p22};
}
RiccatiBlocks operator*(double s, const RiccatiBlocks& b) { return {s * b.p11, s * b.p12, s * b.p22}; }

void require_physical_stabilizable(const Matrix& af, const Matrix& mf) {
  const auto v = systheory::pbh_stabilizability(af, mf);
  if (!v.holds) {
    std::ostringstream os;
    os << "(Af, Mf) is not stabilizable; uncontrollable eigenvalue " << v.failing.front().first;
    throw StabilizabilityError(os.str());
  }
}

}  // namespace

LqrSolution solve_finite_horizon(const model::AugmentedLfm& aug, const CostSpec& cost,
                                 const std::vector<double>& grid) {
  check_grid(grid);
  const Lifted l = lift_cost(aug, cost);
  const Matrix at = aug.A.transpose();
  auto rate = [&](const Matrix& p) -> Matrix {
    Matrix d = at * p + p * aug.A - p * l.g * p + l.xg;
    return 0.5 * (d + d.transpose());
  };
  LqrSolution sol;
  sol.n_f = aug.n_f;
  sol.times = grid;
  sol.P_trajectory.resize(grid.size());
  integrate_backward(l.phig, grid, riccati_step(aug.A), rate, [&](size_t k, const Matrix& p) {
    check_blowup(p, grid[k]);
    sol.P_trajectory[k] = 0.5 * (p + p.transpose());
  });
  return finalize_trajectory(std::move(sol), l.uinv, aug.M);
}

LqrSolution solve_finite_horizon_partitioned(const model::AugmentedLfm& aug, const CostSpec& cost,
                                             const std::vector<double>& grid) {
  check_grid(grid);
  const Lifted l = lift_cost(aug, cost);
  const auto nf = aug.n_f, nu = aug.n_u;
  const Matrix af = aug.Af(), au = aug.Au(), coupling = aug.coupling();
  const Matrix gf = l.g.topLeftCorner(nf, nf);
  const Matrix aft = af.transpose(), aut = au.transpose(), ct = coupling.transpose();

  auto rate = [&](const RiccatiBlocks& b) -> RiccatiBlocks {
    Matrix d11 = aft * b.p11 + b.p11 * af - b.p11 * gf * b.p11 + cost.X;
    Matrix d12 = aft * b.p12 + b.p11 * coupling + b.p12 * au - b.p11 * gf * b.p12;
    Matrix d22 = ct * b.p12 + b.p12.transpose() * coupling + aut * b.p22 + b.p22 * au -
                 b.p12.transpose() * gf * b.p12;
    return {0.5 * (d11 + d11.transpose()), std::move(d12), 0.5 * (d22 + d22.transpose())};
  };
  RiccatiBlocks terminal{cost.Phi, Matrix::Zero(nf, nu), Matrix::Zero(nu, nu)};

  LqrSolution sol;
  sol.n_f = nf;
  sol.times = grid;
  sol.P_trajectory.resize(grid.size());
  integrate_backward(terminal, grid, riccati_step(aug.A), rate, [&](size_t k, const RiccatiBlocks& b) {
    Matrix p(nf + nu, nf + nu);
    p.topLeftCorner(nf, nf) = b.p11;
    p.topRightCorner(nf, nu) = b.p12;
    p.bottomLeftCorner(nu, nf) = b.p12.transpose();
    p.bottomRightCorner(nu, nu) = b.p22;
    check_blowup(p, grid[k]);
    sol.P_trajectory[k] = std::move(p);
  });
  return finalize_trajectory(std::move(sol), l.uinv, aug.M);
}

LqrSolution solve_stationary(const model::AugmentedLfm& aug, const CostSpec& cost, bool decouple) {
  const Lifted l = lift_cost(aug, cost);
  require_physical_stabilizable(aug.Af(), aug.Mf());
  LqrSolution sol;
  sol.n_f = aug.n_f;
  sol.P = care_maybe_decoupled(aug.A, aug.M, l.uinv, l.xg, decouple);
  sol.gain = l.uinv * aug.M.transpose() * sol.P;
  return sol;
}

LqrSolution gain_via_sylvester(const model::AugmentedLfm& aug, const CostSpec& cost) {
  const Lifted l = lift_cost(aug, cost);
  const auto nf = aug.n_f, nu = aug.n_u;
  const Matrix af = aug.Af(), mf = aug.Mf(), au = aug.Au(), coupling = aug.coupling();
  require_physical_stabilizable(af, mf);
  const Matrix gf = l.g.topLeftCorner(nf, nf);

  const Matrix pf = care_maybe_decoupled(af, mf, l.uinv, cost.X, true);
  const Matrix p12 = numlin::solve_sylvester(pf * gf - af.transpose(), au, pf * coupling);
  // Latent block from the (2, 2) stationarity condition, a Lyapunov-type equation in P22.
  const Matrix q = coupling.transpose() * p12 + p12.transpose() * coupling - p12.transpose() * gf * p12;
  Matrix p22 = numlin::solve_sylvester(au.transpose(), -au, -q);
  p22 = 0.5 * (p22 + p22.transpose());

  LqrSolution sol;
  sol.n_f = nf;
  sol.P = Matrix(nf + nu, nf + nu);
  sol.P.topLeftCorner(nf, nf) = pf;
  sol.P.topRightCorner(nf, nu) = p12;
  sol.P.bottomLeftCorner(nu, nf) = p12.transpose();
  sol.P.bottomRightCorner(nu, nu) = p22;
  sol.gain = Matrix(l.uinv.rows(), nf + nu);
  sol.gain.leftCols(nf) = l.uinv * mf.transpose() * pf;
  sol.gain.rightCols(nu) = l.uinv * mf.transpose() * p12;
  return sol;
}

LqrSolution basic_lqr_gain(const model::LtiPhysicalSystem& phys, const CostSpec& cost,
                           Eigen::Index latent_dim) {
  phys.validate();
  cost.validate(phys.state_dim(), phys.control_dim());
  if (latent_dim < 0) throw ArgumentError("basic_lqr_gain: negative latent dimension");
  require_physical_stabilizable(phys.Af, phys.Mf);
  Matrix uinv = cost.U.llt().solve(Matrix::Identity(cost.U.rows(), cost.U.cols()));
  uinv = 0.5 * (uinv + uinv.transpose());
  const auto nf = phys.state_dim();
  const Matrix pf = care_maybe_decoupled(phys.Af, phys.Mf, uinv, cost.X, true);

  LqrSolution sol;
  sol.n_f = nf;
  sol.P = Matrix::Zero(nf + latent_dim, nf + latent_dim);
  sol.P.topLeftCorner(nf, nf) = pf;
  sol.gain = Matrix::Zero(uinv.rows(), nf + latent_dim);
  sol.gain.leftCols(nf) = uinv * phys.Mf.transpose() * pf;
  return sol;
}

}  // namespace lfm::control
