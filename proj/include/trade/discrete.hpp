#pragma once

#include <optional>
#include <vector>

#include "trade/negotiation.hpp"

namespace trade::discrete {

/// Coordinates on the hyperplane {tau + M x}, M orthonormal and orthogonal to tau.
class HyperplaneChart {
 public:
  explicit HyperplaneChart(const Vec& tau);

  const Vec& tau() const { return tau_; }
  const Mat& basis() const { return basis_; }
  int dim() const { return static_cast<int>(basis_.cols()); }

  Vec lift(const Vec& x) const { return tau_ + basis_ * x; }
  // Chart point where the ray through `v` meets the hyperplane; v must have <v, tau> > 0.
  Vec project(const Vec& v) const;
  // Chart trace of the full-space cut <t, y> >= 0.
  std::optional<Halfspace> trace(const Vec& t) const;

 private:
  Vec tau_;
  Mat basis_;
};

struct GradientPolytope {
  HyperplaneChart chart;
  std::vector<Halfspace> cube;
  std::vector<Halfspace> cuts;
  bool contradictory = false;  // a cut parallel to tau excludes the whole chart

  std::vector<Halfspace> all() const;
  bool contains(const Vec& x, double tol = 1e-8) const;
};

struct EnclosingSphere {
  Vec center;
  double radius = 0.0;
};

// `cuts` are full-space normals t of the constraints <t, y> >= 0: rejected
// offers and negated counteroffers.
GradientPolytope build_polytope(double theta, const std::vector<Vec>& cuts, const HyperplaneChart& chart);
std::vector<Vec> polytope_corners(const GradientPolytope& p);
std::pair<Vec, Vec> farthest_pair(const std::vector<Vec>& corners);
EnclosingSphere enclosing_sphere(const Vec& x1, const Vec& x2);
// Cone with axis through the sphere center whose angle is the largest angle
// between that axis and a point of the sphere; nullopt past a hemisphere.
std::optional<GradientCone> sphere_to_cone(const EnclosingSphere& s, const HyperplaneChart& chart);

// Integer offer whose cut bisects x1 and x2 (see bisecting_direction), with
// <T, grad f_A> >= 0. Retries with doubled norm bounds before giving up.
std::optional<Vec> bisecting_offer(const Vec& x1, const Vec& x2, const HyperplaneChart& chart, const MarketView& view);
// Unit full-space normal of the bisecting hyperplane's cut, sign-free.
Vec bisecting_direction(const Vec& x1, const Vec& x2, const HyperplaneChart& chart);
bool separates(const Vec& t, const Vec& x1, const Vec& x2, const HyperplaneChart& chart);

struct StepResult {
  enum class Kind { Adopted, Bisect, Collapsed, Reinit, Stop };
  Kind kind = Kind::Stop;
  double theta_used = 0.0;              // after expansions
  std::vector<double> expansions;       // angle after each expansion
  std::optional<HyperplaneChart> chart;
  std::vector<Vec> corners;
  std::optional<EnclosingSphere> sphere;
  std::optional<GradientCone> candidate;
  std::optional<Vec> offer;
};

struct StepParams {
  double expansion_factor = 1.1;
  double max_angle = kHalfPi - 0.05;
};

// One pass of the integer refinement after a rejection: polytope, enclosure,
// adopt when the enclosing cone is strictly narrower, else a bisecting offer.
StepResult discrete_refine_step(const MarketView& view, const GradientCone& cone, const std::vector<Vec>& cuts,
                                const StepParams& params);

}  // namespace trade::discrete
