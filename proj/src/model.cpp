#include "lfm/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "lfm/errors.hpp"

namespace lfm::model {

void LtiPhysicalSystem::validate() const {
  const auto n = Af.rows();
  if (Af.cols() != n || Bf.rows() != n || Mf.rows() != n || Cf.cols() != n) {
    throw ArgumentError("LtiPhysicalSystem: inconsistent dimensions");
  }
  if (!state_labels.empty() && Eigen::Index(state_labels.size()) != n) {
    throw ArgumentError("LtiPhysicalSystem: one label per state required");
  }
  numlin::require_finite(Af, "Af");
  numlin::require_finite(Bf, "Bf");
  numlin::require_finite(Cf, "Cf");
  numlin::require_finite(Mf, "Mf");
}

void AugmentedLfm::validate() const {
  const auto n = n_f + n_u;
  if (A.rows() != n || A.cols() != n || B.rows() != n || M.rows() != n || C.cols() != n) {
    throw InvariantError("AugmentedLfm: inconsistent dimensions");
  }
  if ((A.bottomLeftCorner(n_u, n_f).array() != 0.0).any()) {
    throw InvariantError("AugmentedLfm: lower-left block of A must be exactly zero");
  }
  if ((B.topRows(n_f).array() != 0.0).any()) {
    throw InvariantError("AugmentedLfm: physical rows of B must be exactly zero");
  }
  if ((M.bottomRows(n_u).array() != 0.0).any()) {
    throw InvariantError("AugmentedLfm: latent rows of M must be exactly zero");
  }
  if ((C.rightCols(n_u).array() != 0.0).any()) {
    throw InvariantError("AugmentedLfm: latent columns of C must be exactly zero");
  }
}

LtiPhysicalSystem build_spring(double lambda, double gamma) {
  if (!(lambda > 0.0) || !(gamma > 0.0)) {
    throw ArgumentError("build_spring: lambda and gamma must be positive");
  }
  LtiPhysicalSystem s;
  s.Af.resize(2, 2);
  s.Af << 0.0, 1.0, -gamma, -lambda;
  s.Bf = Matrix::Zero(2, 1);
  s.Bf(1, 0) = 1.0;
  s.Mf = s.Bf;
  s.Cf = Matrix::Zero(1, 2);
  s.Cf(0, 0) = 1.0;
  s.state_labels = {"position", "velocity"};
  return s;
}

std::vector<std::array<double, 2>> HeatConfig::uniform_sensor_grid(const Rectangle& d, int n) {
  std::vector<std::array<double, 2>> pts;
  pts.reserve(size_t(n) * size_t(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      pts.push_back({d.x0 + (i + 0.5) * (d.x1 - d.x0) / n, d.y0 + (j + 0.5) * (d.y1 - d.y0) / n});
    }
  }
  return pts;
}

void HeatConfig::validate() const {
  if (!(D > 0.0) || !(lambda > 0.0)) throw ArgumentError("HeatConfig: D and lambda must be positive");
  if (modes_per_axis < 1) throw ArgumentError("HeatConfig: modes_per_axis must be >= 1");
  if (!(domain.x1 > domain.x0) || !(domain.y1 > domain.y0)) {
    throw ArgumentError("HeatConfig: empty domain");
  }
  if (!(space_ell > 0.0)) throw ArgumentError("HeatConfig: space_ell must be positive");
  for (const auto& s : sensors) {
    if (!domain.contains(s[0], s[1])) {
      std::ostringstream os;
      os << "HeatConfig: sensor (" << s[0] << ", " << s[1] << ") lies outside the domain";
      throw ArgumentError(os.str());
    }
  }
}

double heat_basis(const HeatConfig& cfg, int j, int k, double x, double y) {
  const double l1 = cfg.domain.x1 - cfg.domain.x0, l2 = cfg.domain.y1 - cfg.domain.y0;
  using std::numbers::pi;
  return 2.0 * std::sin(j * pi * (x - cfg.domain.x0) / l1) *
         std::sin(k * pi * (y - cfg.domain.y0) / l2) / std::sqrt(l1 * l2);
}

double heat_mode_laplacian(const HeatConfig& cfg, int j, int k) {
  const double l1 = cfg.domain.x1 - cfg.domain.x0, l2 = cfg.domain.y1 - cfg.domain.y0;
  using std::numbers::pi;
  const double w1 = j * pi / l1, w2 = k * pi / l2;
  return cfg.D * (w1 * w1 + w2 * w2);
}

Matrix heat_basis_matrix(const HeatConfig& cfg, const std::vector<std::array<double, 2>>& points) {
  const int m = cfg.modes_per_axis;
  Matrix out(Eigen::Index(points.size()), m * m);
  for (size_t p = 0; p < points.size(); ++p) {
    for (int j = 1; j <= m; ++j) {
      for (int k = 1; k <= m; ++k) {
        out(Eigen::Index(p), (j - 1) * m + (k - 1)) = heat_basis(cfg, j, k, points[p][0], points[p][1]);
      }
    }
  }
  return out;
}

LtiPhysicalSystem build_heat_fourier(const HeatConfig& cfg) {
  cfg.validate();
  const int m = cfg.modes_per_axis;
  const int n = m * m;
  LtiPhysicalSystem s;
  s.Af = Matrix::Zero(n, n);
  for (int j = 1; j <= m; ++j) {
    for (int k = 1; k <= m; ++k) {
      const int idx = (j - 1) * m + (k - 1);
      s.Af(idx, idx) = -heat_mode_laplacian(cfg, j, k) - cfg.lambda;
      s.state_labels.push_back("mode_" + std::to_string(j) + "_" + std::to_string(k));
    }
  }
  s.Bf = Matrix::Identity(n, n);
  s.Mf = Matrix::Identity(n, n);
  s.Cf = heat_basis_matrix(cfg, cfg.sensors);
  return s;
}

namespace {

bool is_diagonal(const Matrix& a) {
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (i != j && a(i, j) != 0.0) return false;
  return true;
}

}  // namespace

AugmentedLfm augment(const LtiPhysicalSystem& phys, const std::vector<gpss::LtiGpRealization>& forces) {
  phys.validate();
  if (Eigen::Index(forces.size()) != phys.force_channels()) {
    std::ostringstream os;
    os << "augment: " << forces.size() << " force realizations for " << phys.force_channels()
       << " input channels";
    throw ArgumentError(os.str());
  }
  std::vector<Matrix> fs, ls, hs;
  std::vector<Eigen::Index> offsets;
  Eigen::Index n_u = 0;
  Matrix q = Matrix::Zero(Eigen::Index(forces.size()), Eigen::Index(forces.size()));
  for (size_t c = 0; c < forces.size(); ++c) {
    offsets.push_back(n_u);
    fs.push_back(forces[c].F);
    ls.push_back(forces[c].noise_gain);
    hs.push_back(forces[c].H);
    q(Eigen::Index(c), Eigen::Index(c)) = forces[c].spectral_density;
    n_u += forces[c].dim();
  }
  const Eigen::Index n_f = phys.state_dim();
  const Matrix au = numlin::block_diagonal(fs);
  const Matrix bu = numlin::block_diagonal(ls);
  const Matrix cu = numlin::block_diagonal(hs);

  AugmentedLfm aug;
  aug.n_f = n_f;
  aug.n_u = n_u;
  aug.A = Matrix::Zero(n_f + n_u, n_f + n_u);
  aug.A.topLeftCorner(n_f, n_f) = phys.Af;
  aug.A.topRightCorner(n_f, n_u) = phys.Bf * cu;
  aug.A.bottomRightCorner(n_u, n_u) = au;
  aug.B = Matrix::Zero(n_f + n_u, bu.cols());
  aug.B.bottomRows(n_u) = bu;
  aug.C = Matrix::Zero(phys.Cf.rows(), n_f + n_u);
  aug.C.leftCols(n_f) = phys.Cf;
  aug.M = Matrix::Zero(n_f + n_u, phys.Mf.cols());
  aug.M.topRows(n_f) = phys.Mf;
  aug.noise_density = q;
  aug.Cu = cu;

  // Per-mode blocks when Af is diagonal and each channel drives one mode.
  if (n_f > 1 && is_diagonal(phys.Af)) {
    std::vector<std::vector<Eigen::Index>> blocks(static_cast<size_t>(n_f));
    for (Eigen::Index i = 0; i < n_f; ++i) blocks[size_t(i)].push_back(i);
    bool ok = true;
    for (Eigen::Index c = 0; c < phys.force_channels() && ok; ++c) {
      Eigen::Index mode = -1;
      for (Eigen::Index i = 0; i < n_f; ++i) {
        if (phys.Bf(i, c) != 0.0) {
          if (mode >= 0) ok = false;
          mode = i;
        }
      }
      if (mode < 0) continue;
      for (Eigen::Index k = 0; k < forces[size_t(c)].dim(); ++k) {
        blocks[size_t(mode)].push_back(n_f + offsets[size_t(c)] + k);
      }
    }
    if (ok && phys.force_channels() > 0) aug.block_structure = std::move(blocks);
  }
  aug.validate();
  return aug;
}

std::vector<double> heat_force_weights(const HeatConfig& cfg) {
  const int m = cfg.modes_per_axis;
  using std::numbers::pi;
  const double l1 = cfg.domain.x1 - cfg.domain.x0, l2 = cfg.domain.y1 - cfg.domain.y0;
  const double c = cfg.space_ell * cfg.space_ell / 4.0;
  const double w0 = std::pow(pi / l1, 2) + std::pow(pi / l2, 2);
  std::vector<double> w;
  w.reserve(size_t(m * m));
  for (int j = 1; j <= m; ++j) {
    for (int k = 1; k <= m; ++k) {
      const double wk = std::pow(j * pi / l1, 2) + std::pow(k * pi / l2, 2);
      // ratio to the (1, 1) mode, the spectral maximum
      w.push_back(std::exp(-c * (wk - w0)));
    }
  }
  return w;
}

std::vector<gpss::LtiGpRealization> heat_latent_forces(const HeatConfig& cfg,
                                                       const gpss::CovarianceSpec& temporal) {
  std::vector<gpss::LtiGpRealization> out;
  const auto base = gpss::realize(temporal);
  for (double w : heat_force_weights(cfg)) {
    auto r = base;
    r.spectral_density *= w;
    r.Pinf *= w;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<gpss::LtiGpRealization> replicate_force(const LtiPhysicalSystem& phys,
                                                    const gpss::CovarianceSpec& spec) {
  return std::vector<gpss::LtiGpRealization>(size_t(phys.force_channels()), gpss::realize(spec));
}

}  // namespace lfm::model
