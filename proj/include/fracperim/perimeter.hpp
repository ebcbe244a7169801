#pragma once

#include <vector>

#include "kernel.hpp"
#include "lattice.hpp"

namespace fracperim {

struct PerimeterValue {
  double total = 0.0;
  /// Cell-cell sum between E and the rest of the window.
  double interior_part = 0.0;
  /// Sum over E of the interaction with the window complement.
  double exterior_part = 0.0;
};

namespace detail {

inline void require_kernel_lattice(const GridSet& e, const WindowKernel& k) {
  if (!(e.lattice() == k.lattice())) throw InvalidArgument("set and kernel were built for different lattices");
}

/// Sums per-row partial sums in row order, so the result does not depend on the
/// number of workers.
template <class Row>
double ordered_row_sum(const std::vector<std::size_t>& rows, Row&& row) {
  std::vector<double> partial(rows.size(), 0.0);
  parallel_for(rows.size(), [&](std::size_t r) { partial[r] = row(rows[r]); });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace detail

/// Sum over i in A, j in B of W(i - j). A and B must be disjoint.
inline double interaction(const GridSet& a, const GridSet& b, const WindowKernel& k) {
  detail::require_same_lattice(a, b);
  detail::require_kernel_lattice(a, k);
  if (!disjoint(a, b)) throw InvalidArgument("interaction needs disjoint sets");
  const auto& mb = b.mask();
  return detail::ordered_row_sum(a.members(), [&](std::size_t i) {
    double acc = 0.0;
    k.visit_row(i, [&](std::size_t j, double w) {
      if (mb[j]) acc += w;
    });
    return acc;
  });
}

inline PerimeterValue ps(const GridSet& e, const WindowKernel& k) {
  detail::require_kernel_lattice(e, k);
  const auto& m = e.mask();
  const auto members = e.members();
  PerimeterValue v;
  v.interior_part = detail::ordered_row_sum(members, [&](std::size_t i) {
    double acc = 0.0;
    k.visit_row(i, [&](std::size_t j, double w) {
      if (!m[j]) acc += w;
    });
    return acc;
  });
  for (std::size_t i : members) v.exterior_part += k.exterior(i);
  v.total = v.interior_part + v.exterior_part;
  return v;
}

/// Perimeter of E relative to a cell union Omega:
///   sum_{i in E cap Omega} [sum_{j notin E} W + T(i)] + sum_{i in E \ Omega} sum_{j in Omega \ E} W.
inline double ps_localized(const GridSet& e, const GridSet& omega, const WindowKernel& k) {
  detail::require_same_lattice(e, omega);
  detail::require_kernel_lattice(e, k);
  const auto& me = e.mask();
  const auto& mo = omega.mask();
  const auto members = e.members();
  return detail::ordered_row_sum(members, [&](std::size_t i) {
    double acc = 0.0;
    if (mo[i]) {
      k.visit_row(i, [&](std::size_t j, double w) {
        if (!me[j]) acc += w;
      });
      acc += k.exterior(i);
    } else {
      k.visit_row(i, [&](std::size_t j, double w) {
        if (mo[j] && !me[j]) acc += w;
      });
    }
    return acc;
  });
}

/// Cross term of the localization identity for disjoint cell unions:
///   P(E, O1) + P(E, O2) = P(E, O1 u O2) + I(E n O1, O2 \ E) + I(E n O2, O1 \ E).
/// It never exceeds 2 I(O1, O2).
inline double localization_cross_term(const GridSet& e, const GridSet& omega1, const GridSet& omega2,
                                      const WindowKernel& k) {
  if (!disjoint(omega1, omega2)) throw InvalidArgument("localization needs disjoint domains");
  return interaction(intersect(e, omega1), subtract(omega2, e), k) +
         interaction(intersect(e, omega2), subtract(omega1, e), k);
}

}  // namespace fracperim
