#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace fracbubble {

// Fractional-power parameters shared by every component.
//
// n is the ambient dimension (1 or 2 for anything that touches a grid; the
// closed-form kernels also accept n = 3 for cross-checks), s in (0,1) is the
// fractional order, and n > 2s so the critical exponent is finite.
struct FracParams {
    int n = 1;
    double s = 0.3;

    double q() const { return 0.5 * (n - 2.0 * s); }           // (n-2s)/2
    double p_star() const { return (n + 2.0 * s) / (n - 2.0 * s); }

    void validate() const {
        if (n < 1 || n > 3)
            throw std::invalid_argument("FracParams: n must be 1, 2 or 3");
        if (!(s > 0.0 && s < 1.0))
            throw std::invalid_argument("FracParams: s must lie in (0,1)");
        if (!(n > 2.0 * s))
            throw std::invalid_argument("FracParams: need n > 2s");
    }
};

// Sign of the perturbation p = p* +- eps. Supercritical grows the exponent.
enum class Criticality { supercritical, subcritical };

inline double crit_sign(Criticality c) {
    return c == Criticality::supercritical ? 1.0 : -1.0;
}

inline std::string to_string(Criticality c) {
    return c == Criticality::supercritical ? "supercritical" : "subcritical";
}

inline Criticality criticality_from_string(const std::string& v) {
    if (v == "supercritical" || v == "super" || v == "+") return Criticality::supercritical;
    if (v == "subcritical" || v == "sub" || v == "-") return Criticality::subcritical;
    throw std::invalid_argument("unknown criticality: " + v);
}

} // namespace fracbubble
