#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lfm/gpss.hpp"
#include "lfm/numlin.hpp"

namespace lfm::model {

using numlin::Matrix;
using numlin::Vector;

// df/dt = Af f + Bf u + Mf c,  y = Cf f + eps.
struct LtiPhysicalSystem {
  Matrix Af;
  Matrix Bf;
  Matrix Cf;
  Matrix Mf;
  std::vector<std::string> state_labels;

  Eigen::Index state_dim() const { return Af.rows(); }
  Eigen::Index force_channels() const { return Bf.cols(); }
  Eigen::Index control_dim() const { return Mf.cols(); }
  void validate() const;
};

// Joint model g = (f, z):
//   A = [[Af, Bf Cu], [0, Au]], B = [0; Bu], C = [Cf, 0], M = [Mf; 0].
struct AugmentedLfm {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix M;
  Matrix noise_density;  // p x p spectral density of w
  Matrix Cu;             // p x n_u, latent force read-out
  Eigen::Index n_f = 0;
  Eigen::Index n_u = 0;
  // Index sets of mutually decoupled sub-blocks of A (one per physical mode).
  std::optional<std::vector<std::vector<Eigen::Index>>> block_structure;

  Eigen::Index dim() const { return A.rows(); }
  Matrix Af() const { return A.topLeftCorner(n_f, n_f); }
  Matrix Mf() const { return M.topRows(n_f); }
  Matrix Au() const { return A.bottomRightCorner(n_u, n_u); }
  Matrix coupling() const { return A.topRightCorner(n_f, n_u); }  // Bf Cu
  void validate() const;
};

struct Rectangle {
  double x0 = 0.0, x1 = 1.0;
  double y0 = 0.0, y1 = 1.0;
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

struct HeatConfig {
  double D = 0.001;
  double lambda = 0.2;
  int modes_per_axis = 10;
  Rectangle domain{};
  std::vector<std::array<double, 2>> sensors = uniform_sensor_grid(Rectangle{}, 10);
  double space_ell = 0.1;

  void validate() const;
  // n x n grid at cell centres of the domain.
  static std::vector<std::array<double, 2>> uniform_sensor_grid(const Rectangle& domain, int n);
};

LtiPhysicalSystem build_spring(double lambda, double gamma);
LtiPhysicalSystem build_heat_fourier(const HeatConfig& cfg);

// Orthonormal sine mode (j, k), both 1-based, evaluated at (x, y).
double heat_basis(const HeatConfig& cfg, int j, int k, double x, double y);
// Decay rate D ((j pi / L1)^2 + (k pi / L2)^2).
double heat_mode_laplacian(const HeatConfig& cfg, int j, int k);
// Mode ordering: index = (j - 1) * modes_per_axis + (k - 1).
Matrix heat_basis_matrix(const HeatConfig& cfg, const std::vector<std::array<double, 2>>& points);

AugmentedLfm augment(const LtiPhysicalSystem& phys, const std::vector<gpss::LtiGpRealization>& forces);

// Spatial SE spectrum at each mode frequency, max-normalized.
std::vector<double> heat_force_weights(const HeatConfig& cfg);

// One temporal realization per mode with amplitude sigma * sqrt(weight).
std::vector<gpss::LtiGpRealization> heat_latent_forces(const HeatConfig& cfg,
                                                       const gpss::CovarianceSpec& temporal);

// Identical realization on every force channel of `phys`.
std::vector<gpss::LtiGpRealization> replicate_force(const LtiPhysicalSystem& phys,
                                                    const gpss::CovarianceSpec& spec);

}  // namespace lfm::model
