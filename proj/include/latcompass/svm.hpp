#pragma once

// Soft-margin linear SVM for small labeled sets.
//
// Both solvers minimize the same primal
//
//   1/2 ||w||^2 + 1/2 beta^2 + C * sum_i max(0, 1 - y_i (w . (x_i - c) + beta))
//
// where c is the centroid of the training points and b = beta - w . c. The
// bias is handled by appending a constant-1 coordinate to the centered
// features, which regularizes it around the centroid rather than the origin
// and keeps the fit covariant under translation of the inputs.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "latcompass/error.hpp"
#include "latcompass/latent.hpp"

namespace latcompass::svm {

struct LabeledPoint {
  std::vector<double> x;
  int label;  // -1 or +1
};

class LabeledSet {
 public:
  explicit LabeledSet(std::size_t dimension);

  // Errors: DimensionMismatch, InvalidArgument (label not +-1), NonFinite.
  void add(std::vector<double> x, int label);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<LabeledPoint>& points() const noexcept { return points_; }
  std::size_t count(int label) const;

 private:
  std::size_t dimension_;
  std::vector<LabeledPoint> points_;
};

struct Hyperplane {
  std::vector<double> w;
  double b = 0.0;
};

struct SolverConfig {
  double c = 1.0;
  double tolerance = 1e-6;
  int max_iterations = 10000;  // sweeps over the data
  std::uint64_t seed = 0;      // reserved; the solver is deterministic

  void validate() const;
};

struct FitResult {
  Hyperplane hyperplane;
  std::vector<double> alpha;  // dual variables, in input order
  int sweeps = 0;
  double max_violation = 0.0;  // projected-gradient violation of the last sweep
};

class IterationLimitError : public Error {
 public:
  IterationLimitError(const std::string& message, FitResult partial)
      : Error(ErrorCode::IterationLimit, message), partial_(std::move(partial)) {}
  const FitResult& partial() const noexcept { return partial_; }

 private:
  FitResult partial_;
};

// Dual coordinate descent over alpha_i in [0, C], sweeping points in input
// order until the largest projected-gradient violation of a sweep is within
// tolerance. Throws SingleClass, or IterationLimitError carrying the partial
// solution.
FitResult fit_detailed(const LabeledSet& set, const SolverConfig& config);
Hyperplane fit(const LabeledSet& set, const SolverConfig& config);

// Independent reference solver for small problems (dim <= 6, <= 12 points):
// smoothed-hinge continuation with damped Newton steps on the primal.
// Shares no code with fit().
Hyperplane oracle_fit(const LabeledSet& set, const SolverConfig& config);

// Value of the primal objective above for a given hyperplane.
double primal_objective(const LabeledSet& set, const Hyperplane& h, double c);

// w . x + b. Errors: DimensionMismatch.
double margin(const Hyperplane& h, std::span<const double> x);

// Unit normal of the hyperplane. Errors: DegenerateHyperplane when ||w|| <= 1e-12.
Direction direction_of(const Hyperplane& h, SpaceTag tag);

}  // namespace latcompass::svm
