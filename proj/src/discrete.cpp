#include "trade/discrete.hpp"

#include <algorithm>
#include <cmath>

#include "trade/rounding.hpp"

namespace trade::discrete {

HyperplaneChart::HyperplaneChart(const Vec& tau) : tau_(tau) {
  if (std::abs(tau.norm() - 1.0) > kGeomTol) throw DomainError("chart axis must be a unit vector");
  const int n = static_cast<int>(tau.size());
  const auto cols = orthonormal_extension({tau}, n);
  basis_.resize(n, n - 1);
  for (int j = 0; j < n - 1; ++j) basis_.col(j) = cols[j];
}

Vec HyperplaneChart::project(const Vec& v) const {
  const double along = v.dot(tau_);
  if (!(along > 0.0)) throw DomainError("chart projection of a direction outside the open halfspace of tau");
  return basis_.transpose() * v / along;
}

std::optional<Halfspace> HyperplaneChart::trace(const Vec& t) const {
  Vec g = basis_.transpose() * t;
  if (g.norm() <= 1e-12 * std::max(1.0, t.norm())) return std::nullopt;
  return Halfspace{std::move(g), -t.dot(tau_)};
}

std::vector<Halfspace> GradientPolytope::all() const {
  std::vector<Halfspace> out = cube;
  out.insert(out.end(), cuts.begin(), cuts.end());
  return out;
}

bool GradientPolytope::contains(const Vec& x, double tol) const {
  if (contradictory) return false;
  for (const auto& h : cube)
    if (!h.satisfied(x, tol)) return false;
  for (const auto& h : cuts)
    if (!h.satisfied(x, tol)) return false;
  return true;
}

GradientPolytope build_polytope(double theta, const std::vector<Vec>& cuts, const HyperplaneChart& chart) {
  if (!(theta > 0.0 && theta < kHalfPi)) throw DomainError("build_polytope: angle must lie in (0, pi/2)");
  GradientPolytope p{chart, {}, {}, false};
  const int k = chart.dim();
  const double half_width = std::tan(theta);
  for (int i = 0; i < k; ++i) {
    p.cube.push_back(Halfspace{Vec::Unit(k, i), -half_width});
    p.cube.push_back(Halfspace{-Vec::Unit(k, i), -half_width});
  }
  for (const Vec& t : cuts) {
    if (auto h = chart.trace(t)) {
      p.cuts.push_back(std::move(*h));
    } else if (t.dot(chart.tau()) < 0.0) {
      p.contradictory = true;
    }
  }
  return p;
}

std::vector<Vec> polytope_corners(const GradientPolytope& p) {
  std::vector<Vec> corners;
  if (p.contradictory) return corners;
  const auto hs = p.all();
  const int k = p.chart.dim();
  const int m = static_cast<int>(hs.size());
  if (m < k) return corners;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  Mat a(k, k);
  Vec b(k);
  for (;;) {
    for (int r = 0; r < k; ++r) {
      a.row(r) = hs[idx[r]].normal.transpose();
      b[r] = hs[idx[r]].offset;
    }
    Eigen::FullPivLU<Mat> lu(a);
    lu.setThreshold(1e-12);
    if (lu.isInvertible()) {
      const Vec x = lu.solve(b);
      if (x.allFinite() && p.contains(x, 1e-8)) {
        const bool dup = std::any_of(corners.begin(), corners.end(), [&](const Vec& c) { return (c - x).norm() <= 1e-7; });
        if (!dup) corners.push_back(x);
      }
    }
    int i = k - 1;
    while (i >= 0 && idx[i] == m - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  std::sort(corners.begin(), corners.end(), [](const Vec& l, const Vec& r) {
    return std::lexicographical_compare(l.data(), l.data() + l.size(), r.data(), r.data() + r.size());
  });
  return corners;
}

std::pair<Vec, Vec> farthest_pair(const std::vector<Vec>& corners) {
  if (corners.size() < 2) throw DegeneracyError("farthest_pair: fewer than two corners");
  std::size_t bi = 0, bj = 1;
  double best = -1.0;
  for (std::size_t i = 0; i < corners.size(); ++i)
    for (std::size_t j = i + 1; j < corners.size(); ++j) {
      const double dist = (corners[i] - corners[j]).squaredNorm();
      if (dist > best * (1.0 + 1e-12) + 1e-300) {
        best = dist;
        bi = i;
        bj = j;
      }
    }
  return {corners[bi], corners[bj]};
}

EnclosingSphere enclosing_sphere(const Vec& x1, const Vec& x2) {
  return EnclosingSphere{(x1 + x2) / 2.0, std::sqrt(3.0) / 2.0 * (x1 - x2).norm()};
}

std::optional<GradientCone> sphere_to_cone(const EnclosingSphere& s, const HyperplaneChart& chart) {
  const double c = s.center.norm();
  const double r = s.radius;
  const double s2 = 1.0 + c * c;
  const double sn = std::sqrt(s2);
  const Vec axis = chart.lift(s.center) / sn;
  double theta;
  if (r <= c) {
    // The extreme point sees the axis at a right angle from the sphere center.
    theta = std::asin(std::min(1.0, r / sn));
  } else {
    // The extreme point is the one opposite the center's offset.
    const double gap = r - c;
    const double cos_theta = (s2 - r * c) / (sn * std::sqrt(1.0 + gap * gap));
    if (cos_theta <= 0.0) return std::nullopt;
    theta = std::acos(std::min(1.0, cos_theta));
  }
  return GradientCone(axis.normalized(), theta);
}

Vec bisecting_direction(const Vec& x1, const Vec& x2, const HyperplaneChart& chart) {
  const Vec diff = x1 - x2;
  const double dist = diff.norm();
  if (dist == 0.0) throw DegeneracyError("bisecting_direction: coincident points");
  Vec a = diff / dist;
  double b = (x1.squaredNorm() - x2.squaredNorm()) / (2.0 * dist);
  // Orient so the bisector a.x = b reads a.x >= -|b| after lifting.
  if (b > 0.0) {
    a = -a;
    b = -b;
  }
  const Vec ma = chart.basis() * a;
  return rotate_towards(ma.normalized(), chart.tau(), std::atan(std::abs(b)));
}

bool separates(const Vec& t, const Vec& x1, const Vec& x2, const HyperplaneChart& chart) {
  const auto h = chart.trace(t);
  if (!h) return false;
  const double s1 = h->normal.dot(x1) - h->offset;
  const double s2 = h->normal.dot(x2) - h->offset;
  // A corner on the cut's own plane must not count as separated, or a
  // rejected offer is proposed again.
  const double tol = 1e-9 * h->normal.norm();
  return (s1 < -tol && s2 > tol) || (s1 > tol && s2 < -tol);
}

std::optional<Vec> bisecting_offer(const Vec& x1, const Vec& x2, const HyperplaneChart& chart, const MarketView& view) {
  Vec dir = bisecting_direction(x1, x2, chart);
  const Vec g = view.gradient();
  if (dir.dot(g) < 0.0) dir = -dir;
  const double d = view.limits().norm_cap;
  auto pred = [&](const Vec& z) { return z.dot(g) >= 0.0 && separates(z, x1, x2, chart); };
  for (double bound = d; bound <= 4.0 * d + 1e-9; bound *= 2.0) {
    if (auto z = round_min_angle(view, dir * bound, bound, pred)) return z;
    // Larger bounds only help if the cap box admits longer vectors.
    auto [lo, hi] = view.component_bounds();
    const double box = std::max(lo.cwiseAbs().norm(), hi.cwiseAbs().norm());
    if (bound >= box) break;
  }
  return std::nullopt;
}

StepResult discrete_refine_step(const MarketView& view, const GradientCone& cone, const std::vector<Vec>& cuts,
                                const StepParams& params) {
  StepResult out;
  double theta = cone.angle();
  HyperplaneChart chart(cone.direction());
  GradientPolytope poly = build_polytope(std::min(theta, params.max_angle), cuts, chart);
  std::vector<Vec> corners = polytope_corners(poly);
  while (corners.empty()) {
    theta *= params.expansion_factor;
    if (theta >= params.max_angle) {
      out.kind = StepResult::Kind::Reinit;
      out.theta_used = theta;
      return out;
    }
    out.expansions.push_back(theta);
    poly = build_polytope(theta, cuts, chart);
    corners = polytope_corners(poly);
  }
  out.theta_used = theta;
  out.chart = chart;
  out.corners = corners;
  if (corners.size() == 1) {
    out.kind = StepResult::Kind::Collapsed;
    out.sphere = EnclosingSphere{corners.front(), 0.0};
    out.candidate = GradientCone(chart.lift(corners.front()).normalized(), 0.0);
    return out;
  }
  const auto [x1, x2] = farthest_pair(corners);
  out.sphere = enclosing_sphere(x1, x2);
  out.candidate = sphere_to_cone(*out.sphere, chart);
  // Equal width is no progress: the same offers would repeat after adoption.
  if (out.candidate && out.candidate->angle() < theta * (1.0 - 1e-12)) {
    out.kind = StepResult::Kind::Adopted;
    return out;
  }
  out.offer = bisecting_offer(x1, x2, chart, view);
  out.kind = out.offer ? StepResult::Kind::Bisect : StepResult::Kind::Stop;
  return out;
}

}  // namespace trade::discrete
