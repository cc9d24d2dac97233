#pragma once

#include <cmath>

namespace adlab {

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// ln(1 + e^z)
inline double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// l(z) = ln(1 + e^{-z})
inline double logistic_loss(double z) { return softplus(-z); }

}  // namespace adlab
