#include "trade/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace trade {

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw DomainError(std::string(what) + ": non-finite component");
}

GradientCone::GradientCone(Vec direction, double angle)
    : direction_(std::move(direction)), angle_(angle) {
  require_finite(direction_, "cone direction");
  if (std::abs(direction_.norm() - 1.0) > kGeomTol)
    throw DomainError("cone direction must be a unit vector");
  if (!(angle_ >= 0.0 && angle_ <= kHalfPi + kGeomTol))
    throw DomainError("cone angle outside [0, pi/2]");
  angle_ = std::min(angle_, kHalfPi);
}

double angle_between(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DomainError("angle_between: dimension mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DomainError("angle_between: zero vector");
  const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return std::acos(c);
}

bool cone_contains(const GradientCone& cone, const Vec& v, double tol) {
  return angle_between(v, cone.direction()) <= cone.angle() + tol;
}

std::vector<Vec> orthonormal_extension(const std::vector<Vec>& fixed, int n) {
  if (static_cast<int>(fixed.size()) >= n) throw DomainError("orthonormal_extension: too many fixed vectors");
  std::vector<Vec> basis;
  basis.reserve(n);
  for (const Vec& f : fixed) {
    if (f.size() != n) throw DomainError("orthonormal_extension: dimension mismatch");
    Vec v = f;
    // Two passes of modified Gram-Schmidt keep the residual orthogonal to 1e-15.
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& b : basis) v -= b.dot(v) * b;
    const double nv = v.norm();
    if (nv <= 1e-10 * std::max(1.0, f.norm()))
      throw DegeneracyError("orthonormal_extension: fixed vectors are linearly dependent");
    basis.push_back(v / nv);
  }
  const std::size_t n_fixed = basis.size();
  for (int i = 0; i < n && static_cast<int>(basis.size()) < n; ++i) {
    Vec v = Vec::Unit(n, i);
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& b : basis) v -= b.dot(v) * b;
    const double nv = v.norm();
    if (nv > 1e-6) basis.push_back(v / nv);
  }
  return {basis.begin() + static_cast<std::ptrdiff_t>(n_fixed), basis.end()};
}

Vec rotate_towards(const Vec& u, const Vec& w, double phi) {
  if (u.size() != w.size()) throw DomainError("rotate_towards: dimension mismatch");
  if (std::abs(u.norm() - 1.0) > 1e-9 || std::abs(w.norm() - 1.0) > 1e-9)
    throw DomainError("rotate_towards: inputs must be unit vectors");
  if (std::abs(u.dot(w)) > 1e-9) throw DomainError("rotate_towards: inputs not orthogonal");
  return u * std::cos(phi) + w * std::sin(phi);
}

double spectral_radius_symmetric(const Mat& m, double tol, int max_iter) {
  const auto n = m.rows();
  if (n == 0 || m.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  // Iterate on m^2 so that eigenvalues +l and -l do not make the iterate oscillate.
  const Mat sq = m * m;
  Vec x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = 1.0 + 0.1 * static_cast<double>(i + 1) / static_cast<double>(n);
  x.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vec y = sq * x;
    const double ny = y.norm();
    if (ny == 0.0) return 0.0;
    y /= ny;
    const double next = y.dot(sq * y);
    if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next)) && it > 2) {
      lambda = next;
      x = y;
      break;
    }
    lambda = next;
    x = y;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

}  // namespace trade
