#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace trade {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kHalfPi = kPi / 2.0;
inline constexpr double kGeomTol = 1e-9;

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct DegeneracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Cone of directions within `angle` of the unit vector `direction`.
class GradientCone {
 public:
  GradientCone(Vec direction, double angle);

  const Vec& direction() const { return direction_; }
  double angle() const { return angle_; }
  int dim() const { return static_cast<int>(direction_.size()); }

 private:
  Vec direction_;
  double angle_;
};

/// Constraint <normal, x> >= offset.
struct Halfspace {
  Vec normal;
  double offset = 0.0;

  bool satisfied(const Vec& x, double tol = 0.0) const {
    return normal.dot(x) >= offset - tol;
  }
};

double angle_between(const Vec& a, const Vec& b);
bool cone_contains(const GradientCone& cone, const Vec& v, double tol = kGeomTol);

// Unit vectors completing `fixed` to an orthonormal basis of R^n.
std::vector<Vec> orthonormal_extension(const std::vector<Vec>& fixed, int n);

Vec rotate_towards(const Vec& u, const Vec& w, double phi);

// Largest absolute eigenvalue of a symmetric matrix by power iteration.
double spectral_radius_symmetric(const Mat& m, double tol = 1e-9, int max_iter = 100000);

void require_finite(const Vec& v, const char* what);

}  // namespace trade
