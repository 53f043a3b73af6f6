#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "lfm/errors.hpp"
#include "lfm/infer.hpp"

namespace lfm::infer {

namespace {

using Point = std::array<double, 2>;  // (log sigma, log ell)

struct Simplex {
  std::array<Point, 3> x;
  std::array<double, 3> f;  // negative log likelihood

  void sort() {
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return f[a] < f[b]; });
    auto xs = x;
    auto fs = f;
    for (int i = 0; i < 3; ++i) {
      x[i] = xs[order[i]];
      f[i] = fs[order[i]];
    }
  }

  double diameter() const {
    double d = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        d = std::max(d, std::hypot(x[i][0] - x[j][0], x[i][1] - x[j][1]));
    return d;
  }
};

Point lerp(const Point& a, const Point& b, double t) {
  return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
}

template <class Objective>
struct NelderMead {
  Objective& objective;
  int evaluations = 0;

  double eval(const Point& p) {
    ++evaluations;
    return objective(p);
  }

  // Returns the iteration count.
  int minimize(Simplex& s, int max_iterations, double tolerance) {
    s.sort();
    int it = 0;
    for (; it < max_iterations && s.diameter() > tolerance; ++it) {
      const Point centroid = lerp(s.x[0], s.x[1], 0.5);
      const Point reflected = lerp(centroid, s.x[2], -1.0);
      const double fr = eval(reflected);
      if (fr < s.f[0]) {
        const Point expanded = lerp(centroid, s.x[2], -2.0);
        const double fe = eval(expanded);
        if (fe < fr) {
          s.x[2] = expanded;
          s.f[2] = fe;
        } else {
          s.x[2] = reflected;
          s.f[2] = fr;
        }
      } else if (fr < s.f[1]) {
        s.x[2] = reflected;
        s.f[2] = fr;
      } else {
        const bool outside = fr < s.f[2];
        const Point contracted = outside ? lerp(centroid, reflected, 0.5) : lerp(centroid, s.x[2], 0.5);
        const double fc = eval(contracted);
        if (fc < std::min(fr, s.f[2])) {
          s.x[2] = contracted;
          s.f[2] = fc;
        } else {
          for (int i = 1; i < 3; ++i) {
            s.x[i] = lerp(s.x[0], s.x[i], 0.5);
            s.f[i] = eval(s.x[i]);
          }
        }
      }
      s.sort();
    }
    return it;
  }
};

}  // namespace

FitResult fit_hyperparameters(const TimeSeriesData& data, const gpss::CovarianceSpec& spec_template,
                              const model::LtiPhysicalSystem& phys, const MeasurementModel& meas,
                              const FitOptions& opts) {
  data.validate();
  meas.validate();
  double sum = 0.0, sum2 = 0.0;
  int count = 0;
  for (const auto& y : data.observations) {
    if (!y) continue;
    sum += (*y)(0);
    sum2 += (*y)(0) * (*y)(0);
    ++count;
  }
  if (count == 0) throw ArgumentError("fit_hyperparameters: no observations");
  const double mean = sum / count;
  const double stdev = std::sqrt(std::max(sum2 / count - mean * mean, 1e-12));
  const double span = std::max(data.times.back() - data.times.front(), 1e-6);

  auto objective = [&](const Point& p) {
    gpss::CovarianceSpec spec = spec_template;
    spec.sigma = std::exp(p[0]);
    spec.ell = std::exp(p[1]);
    try {
      const double ll = log_marginal_likelihood(data, spec, phys, meas);
      return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  NelderMead<decltype(objective)> nm{objective};

  FitResult best;
  best.loglik = -std::numeric_limits<double>::infinity();
  int total_iterations = 0;
  for (double frac : {1.0 / 20.0, 1.0 / 5.0, 1.0 / 2.0}) {
    const Point start{std::log(stdev), std::log(span * frac)};
    gpss::CovarianceSpec s0 = spec_template;
    s0.sigma = stdev;
    s0.ell = span * frac;
    best.starts.push_back(s0);

    Simplex simplex;
    simplex.x = {start, Point{start[0] + 0.5, start[1]}, Point{start[0], start[1] + 0.5}};
    for (int i = 0; i < 3; ++i) simplex.f[i] = nm.eval(simplex.x[i]);
    best.start_logliks.push_back(-simplex.f[0]);
    total_iterations += nm.minimize(simplex, opts.max_iterations, opts.simplex_tolerance);
    if (std::isfinite(simplex.f[0]) && -simplex.f[0] > best.loglik) {
      best.loglik = -simplex.f[0];
      best.spec = spec_template;
      best.spec.sigma = std::exp(simplex.x[0][0]);
      best.spec.ell = std::exp(simplex.x[0][1]);
    }
  }
  best.iterations = total_iterations;
  best.evaluations = nm.evaluations;
  if (!std::isfinite(best.loglik)) {
    std::ostringstream os;
    os << "fit_hyperparameters: no start produced a finite likelihood after " << nm.evaluations
       << " evaluations";
    throw OptimizationError(os.str());
  }
  return best;
}

}  // namespace lfm::infer
