#pragma once

#include <cmath>

namespace flowlab::models {

// First-order forward-mode dual number: value + single tangent component.
struct Dual {
    double value = 0.0;
    double deriv = 0.0;
};

inline Dual operator+(Dual a, Dual b) { return {a.value + b.value, a.deriv + b.deriv}; }
inline Dual operator-(Dual a, Dual b) { return {a.value - b.value, a.deriv - b.deriv}; }
inline Dual operator*(Dual a, Dual b) {
    return {a.value * b.value, a.value * b.deriv + a.deriv * b.value};
}
inline Dual operator+(Dual a, double b) { return {a.value + b, a.deriv}; }
inline Dual operator+(double a, Dual b) { return {a + b.value, b.deriv}; }
inline Dual operator-(Dual a, double b) { return {a.value - b, a.deriv}; }
inline Dual operator-(double a, Dual b) { return {a - b.value, -b.deriv}; }
inline Dual operator*(Dual a, double b) { return {a.value * b, a.deriv * b}; }
inline Dual operator*(double a, Dual b) { return {a * b.value, a * b.deriv}; }
inline Dual operator/(Dual a, double b) { return {a.value / b, a.deriv / b}; }
inline Dual operator-(Dual a) { return {-a.value, -a.deriv}; }

inline Dual tanh(Dual x) {
    const double t = std::tanh(x.value);
    return {t, x.deriv * (1.0 - t * t)};
}

inline double stable_softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double stable_sigmoid(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline Dual softplus(Dual x) { return {stable_softplus(x.value), x.deriv * stable_sigmoid(x.value)}; }

}  // namespace flowlab::models
