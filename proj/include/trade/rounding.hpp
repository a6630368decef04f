#pragma once

#include <functional>
#include <optional>

#include "trade/negotiation.hpp"

namespace trade {

using OfferPredicate = std::function<bool(const Vec&)>;

// Nonzero integer offer minimizing the angle to `target` among candidates that
// satisfy resources, the per-category cap, |T| <= norm_bound and `predicate`.
// Exhaustive over the cap box up to four categories, local search beyond.
// Ties prefer the larger norm, then the lexicographically smaller vector.
std::optional<Vec> round_min_angle(const MarketView& view, const Vec& target, double norm_bound,
                                   const OfferPredicate& predicate = {});

// Nearest integer vector along `dir`, shrunk until feasible; nullopt if only zero fits.
std::optional<Vec> round_nearest_feasible(const MarketView& view, const Vec& t);

}  // namespace trade
