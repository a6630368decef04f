#include "trade/rounding.hpp"

#include <cmath>
#include <limits>

namespace trade {

namespace {

struct Best {
  std::optional<Vec> z;
  double cos = -std::numeric_limits<double>::infinity();
  double norm = 0.0;

  void offer(const Vec& cand, double c, double nrm) {
    constexpr double kTie = 1e-12;
    bool better = false;
    if (!z || c > cos + kTie) {
      better = true;
    } else if (c > cos - kTie) {
      if (nrm > norm + kTie) {
        better = true;
      } else if (nrm > norm - kTie) {
        for (int i = 0; i < cand.size(); ++i) {
          if (cand[i] != (*z)[i]) {
            better = cand[i] < (*z)[i];
            break;
          }
        }
      }
    }
    if (better) {
      z = cand;
      cos = c;
      norm = nrm;
    }
  }
};

}  // namespace

std::optional<Vec> round_min_angle(const MarketView& view, const Vec& target, double norm_bound,
                                   const OfferPredicate& predicate) {
  const int n = view.dim();
  const double tn = target.norm();
  if (n == 0 || tn == 0.0 || norm_bound < 1.0) return std::nullopt;
  const Vec unit = target / tn;
  auto [lo, hi] = view.component_bounds();
  const double r = std::floor(norm_bound + 1e-9);
  Vec ilo(n), ihi(n);
  for (int i = 0; i < n; ++i) {
    ilo[i] = std::max(std::ceil(lo[i] - 1e-9), -r);
    ihi[i] = std::min(std::floor(hi[i] + 1e-9), r);
  }
  Best best;
  auto consider = [&](const Vec& z) {
    const double nz = z.norm();
    if (nz == 0.0 || nz > norm_bound + 1e-9) return;
    for (int i = 0; i < n; ++i)
      if (z[i] < ilo[i] || z[i] > ihi[i]) return;
    const double c = z.dot(unit) / nz;
    if (best.z && c < best.cos - 1e-12) return;
    if (predicate && !predicate(z)) return;
    best.offer(z, c, nz);
  };

  if (n <= 4) {
    Vec z = ilo;
    for (;;) {
      consider(z);
      int i = n - 1;
      while (i >= 0 && z[i] >= ihi[i]) {
        z[i] = ilo[i];
        --i;
      }
      if (i < 0) break;
      z[i] += 1.0;
    }
    return best.z;
  }

  // Seeds along the ray at every integer magnitude, each expanded by a +-1 neighborhood.
  const int reach = static_cast<int>(r);
  const long combos = static_cast<long>(std::pow(3.0, std::min(n, 12)));
  for (int m = 1; m <= reach; ++m) {
    const Vec seed = (unit * m).array().round().matrix();
    if (n > 12) {
      consider(seed);
      continue;
    }
    for (long code = 0; code < combos; ++code) {
      Vec z = seed;
      long c = code;
      for (int i = 0; i < n; ++i) {
        z[i] += static_cast<double>(c % 3) - 1.0;
        c /= 3;
      }
      consider(z);
    }
  }
  return best.z;
}

std::optional<Vec> round_nearest_feasible(const MarketView& view, const Vec& t) {
  double scale = 1.0;
  for (int attempt = 0; attempt < 64; ++attempt, scale *= 0.9) {
    const Vec z = (t * scale).array().round().matrix();
    if (z.isZero(0.0)) return std::nullopt;
    if (view.feasible(z)) return z;
  }
  return std::nullopt;
}

}  // namespace trade
