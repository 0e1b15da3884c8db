#pragma once

#include <vector>

namespace flowlab::ode {

/// One classical RK4 step for x' = f(t, x).
template <typename Field>
std::vector<double> rk4_step(const Field& f, double t, const std::vector<double>& x, double h) {
    const std::vector<double> k1 = f(t, x);
    std::vector<double> tmp(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    const std::vector<double> k2 = f(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    const std::vector<double> k3 = f(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + h * k3[i];
    const std::vector<double> k4 = f(t + h, tmp);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

template <typename Field>
std::vector<double> euler_step(const Field& f, double t, const std::vector<double>& x, double h) {
    const std::vector<double> k = f(t, x);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + h * k[i];
    return out;
}

}  // namespace flowlab::ode
