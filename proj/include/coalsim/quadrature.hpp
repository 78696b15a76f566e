#pragma once

#include <functional>
#include <vector>

namespace coalsim {

// Adaptive Gauss-Kronrod (G7,K15) integration of f over [a, b].
// Each subinterval is accepted when the Kronrod-Gauss discrepancy is below
// rel_tol relative to the subinterval value (plus a tiny absolute floor).
// Throws QuadratureFailure if refinement stalls at max_depth.
double gk_adaptive(const std::function<double(double)>& f, double a, double b,
                   double rel_tol, int max_depth = 60);

// Sum of gk_adaptive over consecutive panels [pts[0],pts[1]], [pts[1],pts[2]], ...
double gk_panels(const std::function<double(double)>& f, const std::vector<double>& pts,
                 double rel_tol, int max_depth = 60);

// Geometric panel breakpoints from a to b (a < b, both > 0), at most max_panels,
// each panel spanning at most one factor of `ratio`.
std::vector<double> geometric_panels(double a, double b, double ratio = 10.0,
                                     int max_panels = 400);

}  // namespace coalsim
