#pragma once

#include <cstddef>

namespace testsupport {

// High-resolution RK4 integration of the logistic ODE u' = rho u (1-u).
// Used as the independent truth for the closed-form reaction step.
inline double logistic_rk4(double u0, double rho, double dt, std::size_t steps = 4000) {
    auto f = [rho](double u) { return rho * u * (1.0 - u); };
    double h = dt / static_cast<double>(steps);
    double u = u0;
    for (std::size_t s = 0; s < steps; ++s) {
        double k1 = f(u);
        double k2 = f(u + 0.5 * h * k1);
        double k3 = f(u + 0.5 * h * k2);
        double k4 = f(u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return u;
}

}  // namespace testsupport
