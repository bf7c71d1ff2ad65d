#include <algorithm>
#include <cmath>
#include <string>

#include "latcompass/kernels.hpp"
#include "latcompass/svm.hpp"

namespace latcompass::svm {

LabeledSet::LabeledSet(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw Error(ErrorCode::InvalidArgument, "feature dimension must be positive");
}

void LabeledSet::add(std::vector<double> x, int label) {
  if (x.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch, "feature vector has dimension " +
                                                  std::to_string(x.size()) + ", expected " +
                                                  std::to_string(dimension_));
  }
  if (label != 1 && label != -1) throw Error(ErrorCode::InvalidArgument, "label must be -1 or +1");
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "feature vector has a non-finite entry");
  }
  points_.push_back({std::move(x), label});
}

std::size_t LabeledSet::count(int label) const {
  return static_cast<std::size_t>(
      std::count_if(points_.begin(), points_.end(), [&](const auto& p) { return p.label == label; }));
}

void SolverConfig::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorCode::InvalidArgument, "C must be positive");
  if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
    throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  }
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
}

FitResult fit_detailed(const LabeledSet& set, const SolverConfig& config) {
  config.validate();
  if (set.count(1) == 0 || set.count(-1) == 0) {
    throw Error(ErrorCode::SingleClass, "training set needs at least one point of each label");
  }

  const std::size_t n = set.size();
  const std::size_t d = set.dimension();
  const std::size_t da = d + 1;
  const auto& pts = set.points();

  std::vector<double> centroid(d, 0.0);
  for (const auto& p : pts) kernels::axpy(1.0, p.x, centroid);
  for (double& v : centroid) v /= static_cast<double>(n);

  // Row-major augmented design: [x_i - c, 1].
  std::vector<double> rows(n * da);
  std::vector<double> qd(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = rows.data() + i * da;
    for (std::size_t j = 0; j < d; ++j) row[j] = pts[i].x[j] - centroid[j];
    row[d] = 1.0;
    qd[i] = kernels::sum_squares({row, da});
  }

  const double c = config.c;
  std::vector<double> alpha(n, 0.0);
  std::vector<double> v(da, 0.0);  // sum_i alpha_i y_i x_i = (w, beta)

  int sweep = 0;
  double max_violation = 0.0;
  bool converged = false;
  while (sweep < config.max_iterations) {
    ++sweep;
    max_violation = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const double> xi{rows.data() + i * da, da};
      const double yi = pts[i].label;
      const double g = yi * kernels::dot(v, xi) - 1.0;

      double pg = g;
      if (alpha[i] == 0.0) {
        pg = std::min(g, 0.0);
      } else if (alpha[i] == c) {
        pg = std::max(g, 0.0);
      }
      max_violation = std::max(max_violation, std::abs(pg));

      if (pg != 0.0) {
        const double old = alpha[i];
        alpha[i] = std::min(std::max(old - g / qd[i], 0.0), c);
        const double delta = (alpha[i] - old) * yi;
        if (delta != 0.0) kernels::axpy(delta, xi, v);
      }
    }
    if (max_violation <= config.tolerance) {
      converged = true;
      break;
    }
  }

  FitResult result;
  result.hyperplane.w.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(d));
  result.hyperplane.b = v[d] - kernels::dot(result.hyperplane.w, centroid);
  result.alpha = std::move(alpha);
  result.sweeps = sweep;
  result.max_violation = max_violation;

  if (!converged) {
    throw IterationLimitError("KKT violation " + std::to_string(max_violation) + " after " +
                                  std::to_string(sweep) + " sweeps",
                              std::move(result));
  }
  return result;
}

Hyperplane fit(const LabeledSet& set, const SolverConfig& config) {
  return fit_detailed(set, config).hyperplane;
}

double primal_objective(const LabeledSet& set, const Hyperplane& h, double c) {
  const std::size_t d = set.dimension();
  if (h.w.size() != d) throw Error(ErrorCode::DimensionMismatch, "hyperplane dimension mismatch");
  const auto& pts = set.points();
  double beta = h.b;
  if (!pts.empty()) {
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (const auto& p : pts) mean += p.x[j];
      beta += h.w[j] * mean / static_cast<double>(pts.size());
    }
  }
  double obj = 0.5 * beta * beta;
  for (double wj : h.w) obj += 0.5 * wj * wj;
  for (const auto& p : pts) {
    double m = h.b;
    for (std::size_t j = 0; j < d; ++j) m += h.w[j] * p.x[j];
    obj += c * std::max(0.0, 1.0 - p.label * m);
  }
  return obj;
}

double margin(const Hyperplane& h, std::span<const double> x) {
  if (x.size() != h.w.size()) {
    throw Error(ErrorCode::DimensionMismatch, "feature dimension " + std::to_string(x.size()) +
                                                  " does not match hyperplane " +
                                                  std::to_string(h.w.size()));
  }
  return kernels::dot(h.w, x) + h.b;
}

Direction direction_of(const Hyperplane& h, SpaceTag tag) {
  if (h.w.empty() || std::sqrt(kernels::sum_squares(h.w)) <= kZeroNormThreshold) {
    throw Error(ErrorCode::DegenerateHyperplane, "hyperplane has a zero weight vector");
  }
  return normalize(h.w, tag);
}

}  // namespace latcompass::svm
