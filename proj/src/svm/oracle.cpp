// Reference solver for the SVM primal. Deliberately self-contained: no
// kernels, no shared helpers with fit.cpp.
//
// The hinge is replaced by a Huber-smoothed version h_mu (quadratic on
// [0, mu], linear above), which makes the objective C^1 and piecewise
// quadratic. Each smoothing level is minimized by Newton's method with
// Armijo backtracking, warm-started from the previous level, while mu shrinks
// geometrically to 1e-13. The smoothed and exact objectives differ by at most
// n*C*mu/2.

#include <algorithm>
#include <cmath>
#include <vector>

#include "latcompass/svm.hpp"

namespace latcompass::svm {
namespace {

struct Problem {
  std::size_t n = 0;
  std::size_t dim = 0;  // augmented dimension
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  std::vector<double> centroid;
  double c = 1.0;
};

double huber(double u, double mu) {
  if (u <= 0.0) return 0.0;
  if (u < mu) return 0.5 * u * u / mu;
  return u - 0.5 * mu;
}

double huber_slope(double u, double mu) {
  if (u <= 0.0) return 0.0;
  if (u < mu) return u / mu;
  return 1.0;
}

double inner(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double smoothed_objective(const Problem& p, const std::vector<double>& v, double mu) {
  double obj = 0.5 * inner(v, v);
  for (std::size_t i = 0; i < p.n; ++i) obj += p.c * huber(1.0 - p.y[i] * inner(v, p.rows[i]), mu);
  return obj;
}

// Solves H x = r for symmetric positive definite H (dense, row-major).
std::vector<double> cholesky_solve(std::vector<double> h, std::vector<double> r, std::size_t m) {
  for (std::size_t j = 0; j < m; ++j) {
    double diag = h[j * m + j];
    for (std::size_t k = 0; k < j; ++k) diag -= h[j * m + k] * h[j * m + k];
    diag = std::sqrt(std::max(diag, 1e-300));
    h[j * m + j] = diag;
    for (std::size_t i = j + 1; i < m; ++i) {
      double s = h[i * m + j];
      for (std::size_t k = 0; k < j; ++k) s -= h[i * m + k] * h[j * m + k];
      h[i * m + j] = s / diag;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    double s = r[i];
    for (std::size_t k = 0; k < i; ++k) s -= h[i * m + k] * r[k];
    r[i] = s / h[i * m + i];
  }
  for (std::size_t ii = m; ii-- > 0;) {
    double s = r[ii];
    for (std::size_t k = ii + 1; k < m; ++k) s -= h[k * m + ii] * r[k];
    r[ii] = s / h[ii * m + ii];
  }
  return r;
}

void newton_stage(const Problem& p, std::vector<double>& v, double mu) {
  const std::size_t m = p.dim;
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<double> grad = v;
    std::vector<double> hess(m * m, 0.0);
    for (std::size_t j = 0; j < m; ++j) hess[j * m + j] = 1.0;
    for (std::size_t i = 0; i < p.n; ++i) {
      const double u = 1.0 - p.y[i] * inner(v, p.rows[i]);
      const double s = huber_slope(u, mu);
      if (s == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) grad[j] -= p.c * s * p.y[i] * p.rows[i][j];
      if (u > 0.0 && u < mu) {
        const double k = p.c / mu;
        for (std::size_t a = 0; a < m; ++a)
          for (std::size_t b = 0; b < m; ++b) hess[a * m + b] += k * p.rows[i][a] * p.rows[i][b];
      }
    }
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    if (gmax <= 1e-14 * (1.0 + p.c * static_cast<double>(p.n))) return;

    std::vector<double> neg(grad.size());
    for (std::size_t j = 0; j < m; ++j) neg[j] = -grad[j];
    std::vector<double> step = cholesky_solve(hess, neg, m);

    const double f0 = smoothed_objective(p, v, mu);
    const double slope = inner(grad, step);
    if (!(slope < 0.0)) return;
    double t = 1.0;
    std::vector<double> trial(m);
    bool moved = false;
    while (t > 1e-20) {
      for (std::size_t j = 0; j < m; ++j) trial[j] = v[j] + t * step[j];
      const double f1 = smoothed_objective(p, trial, mu);
      if (f1 <= f0 + 1e-4 * t * slope) {
        moved = f1 < f0 || t == 1.0;
        v = trial;
        break;
      }
      t *= 0.5;
    }
    if (!moved) return;
  }
}

}  // namespace

Hyperplane oracle_fit(const LabeledSet& set, const SolverConfig& config) {
  config.validate();
  std::size_t npos = 0;
  std::size_t nneg = 0;
  for (const auto& pt : set.points()) (pt.label > 0 ? npos : nneg) += 1;
  if (npos == 0 || nneg == 0) {
    throw Error(ErrorCode::SingleClass, "training set needs at least one point of each label");
  }

  Problem p;
  p.n = set.size();
  const std::size_t d = set.dimension();
  p.dim = d + 1;
  p.c = config.c;
  p.centroid.assign(d, 0.0);
  for (const auto& pt : set.points())
    for (std::size_t j = 0; j < d; ++j) p.centroid[j] += pt.x[j];
  for (double& cj : p.centroid) cj /= static_cast<double>(p.n);
  for (const auto& pt : set.points()) {
    std::vector<double> row(p.dim);
    for (std::size_t j = 0; j < d; ++j) row[j] = pt.x[j] - p.centroid[j];
    row[d] = 1.0;
    p.rows.push_back(std::move(row));
    p.y.push_back(static_cast<double>(pt.label));
  }

  std::vector<double> v(p.dim, 0.0);
  for (double mu = 1.0; mu >= 1e-13; mu *= 0.1) newton_stage(p, v, mu);

  Hyperplane h;
  h.w.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(d));
  double wc = 0.0;
  for (std::size_t j = 0; j < d; ++j) wc += h.w[j] * p.centroid[j];
  h.b = v[d] - wc;
  return h;
}

}  // namespace latcompass::svm
