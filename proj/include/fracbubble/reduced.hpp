#pragma once

// The finite-dimensional landscape left after projecting the bubbles away:
//
//   Psi(xi, Lambda) = 1/2 { sum_i H(xi_i, xi_i) Lambda_i^2
//                           - 2 sum_{i<j} G(xi_i, xi_j) Lambda_i Lambda_j }
//                     +- log(Lambda_1 ... Lambda_m),
//
// (+ on the supercritical branch, - on the subcritical one), together with
// the two-point interaction varphi = sqrt(H_1 H_2) - G, the explicit critical
// rates Lambda(xi), the cutoff variant Psi_{M,rho}, critical-point search
// with empirical stability, the gated gradient-flow min-max estimate, and the
// half-space boundary function phi_+.

#include <functional>
#include <vector>

#include "fracbubble/constants.hpp"
#include "fracbubble/green.hpp"

namespace fracbubble {

// ---------------------------------------------------------------------------
// pair kernel
//
// Everything in this module reads G and H through this evaluable pair, so the
// same landscape code runs on closed-form kernels, tabulated solves, and
// synthetic test fixtures. Gradients are analytic per source (spline
// derivatives for tables, kernel partials for closed forms).

struct PairKernel {
    const DomainSpec* dom = nullptr;
    double delta = 0.0; // admissibility margin for separation and boundary

    std::function<double(const Point&)> H;
    std::function<double(const Point&, const Point&)> G;
    std::function<Point(const Point&)> gradH;
    std::function<Point(const Point&, const Point&)> gradG1; // in the 1st arg
    std::function<Point(const Point&, const Point&)> gradG2; // in the 2nd arg
};

// Closed-form kernel on a ball (any center/radius by translation + scaling
// of the unit-ball forms; n = 1 gives the interval). delta < 0 picks the
// default margin 0.1 diam; clustered configurations pass a smaller one.
PairKernel closed_ball_kernel(const ConstantSet& cs, const DomainSpec& ball,
                              double delta = -1.0);

// Spline-backed kernel over a tabulated Green solve (1-D domains). Rows are
// interpolated along x with natural cubics, then across the sample points;
// the Robin diagonal gets its own spline. Evaluation far from the diagonal
// only (the admissibility margin keeps points delta-separated, well outside
// the mollifier footprint).
PairKernel table_kernel(const GreenTable& table, const ConstantSet& cs,
                        double delta = -1.0);

PairKernel synthetic_kernel(const DomainSpec& dom, double delta,
                            std::function<double(const Point&)> H,
                            std::function<double(const Point&, const Point&)> G,
                            std::function<Point(const Point&)> gradH,
                            std::function<Point(const Point&, const Point&)> gradG1,
                            std::function<Point(const Point&, const Point&)> gradG2);

// ---------------------------------------------------------------------------
// landscape evaluation

// A landscape sample: value and gradient at an admissible configuration.
// Gradient layout: [xi_1 coords .. xi_m coords, Lambda_1 .. Lambda_m]
// (n coordinates per point, so m(n+1) entries; 2m in one dimension).
struct PsiPoint {
    std::vector<Point> xi;
    std::vector<double> Lambda;
    double value = 0.0;
    std::vector<double> gradient;
};

// Throws std::domain_error naming the violated bound when points come closer
// than delta to each other or to the boundary, or Lambda leaves
// (delta, 1/delta).
PsiPoint psi_eval(const PairKernel& k, const std::vector<Point>& xi,
                  const std::vector<double>& Lambda, Criticality sign);

// varphi(xi1, xi2) = sqrt(H(xi1,xi1) H(xi2,xi2)) - G(xi1, xi2); symmetric,
// negative exactly where a two-bubble configuration can balance.
double varphi(const PairKernel& k, const Point& xi1, const Point& xi2);

// The rates annihilating the Lambda-gradient when varphi < 0:
//   Lambda_1^2 = -sqrt(H_2) / (sqrt(H_1) varphi),  symmetrically for 2,
// plus the diagnostic quadratic Q = H_1 L_1^2 + H_2 L_2^2 - 2 G L_1 L_2
// (equal to -2 at the critical rates) and the level
// Psi(xi, Lambda(xi)) = -1 + log(1/|varphi|) on the supercritical branch.
struct CriticalLambda {
    double Lambda1 = 0.0;
    double Lambda2 = 0.0;
    double Q = 0.0;
};
CriticalLambda lambda_critical(const PairKernel& k, const Point& xi1,
                               const Point& xi2);

// ---------------------------------------------------------------------------
// truncation

struct TruncationParams {
    double M = 10.0;     // Green cutoff G_M = min(G, M)
    double rho = 0.05;   // boundary margin of the flow region
    double rho0 = 0.05;  // varphi level margin required of seed sets
    double sigma0 = 0.1; // dilation window edge, sigma in [sigma0, 1/sigma0]

    void validate() const {
        if (M <= 0.0 || rho <= 0.0 || rho0 <= 0.0 || sigma0 <= 0.0 ||
            sigma0 >= 1.0)
            throw std::invalid_argument(
                "TruncationParams: M, rho, rho0 positive and sigma0 in (0,1)");
    }
};

// Psi with the interaction Green function cut off at M:
// Psi + (G - G_M) Lambda_1 Lambda_2 for m = 2 (pairwise sum in general),
// which agrees with Psi wherever G <= M and stays finite as xi_1 -> xi_2.
double psi_truncated(const PairKernel& k, const TruncationParams& tp,
                     const std::vector<Point>& xi,
                     const std::vector<double>& Lambda, Criticality sign);

// ---------------------------------------------------------------------------
// critical points

struct CriticalPoint {
    std::vector<Point> xi;
    std::vector<double> Lambda;
    double grad_norm = 0.0;
    bool converged = false;
    // Hessian signature from central differences (step 1e-4 x coordinate
    // scale); eigenvalues below 1e-6 x the spectral radius count as zero
    int n_pos = 0, n_neg = 0, n_zero = 0;
    std::vector<double> hess_eigs;
};

// Damped Newton on (xi, Lambda) from each seed; steps that leave the
// admissible set are halved. Converged points are deduplicated within
// 10 x tol; non-convergence flags the seed's entry instead of throwing.
std::vector<CriticalPoint> find_critical(const PairKernel& k,
                                         const std::vector<PsiPoint>& seeds,
                                         double tol, Criticality sign);

// Empirical stability at a converged critical point: re-run the search on
// Psi plus `runs` random smooth C^1 perturbations of magnitude mu, measured
// in the dimensionless chart (xi/diam, log Lambda) where the desk landscape
// has unit-order curvature; stable iff every perturbed run lands within mu
// of cp in that chart. A nondegenerate Hessian signature is reported
// separately (it implies stability by the implicit function theorem).
struct StabilityReport {
    bool stable = false;
    bool nondegenerate = false;
    int runs = 0;
    double max_displacement = 0.0; // chart norm, worst perturbed run
};
StabilityReport classify_stability(const PairKernel& k, const CriticalPoint& cp,
                                   double mu, Criticality sign, int runs = 50,
                                   unsigned rng_seed = 7);

// ---------------------------------------------------------------------------
// min-max estimate
//
// The deformation class is seeded by zeta_0(xi, sigma) = (xi, sigma Lambda(xi))
// over a finite product set M1 x M2 (both components varphi-negative below
// -rho0) and a sigma grid containing 1; it evolves by explicit Euler on
// -h(Psi) grad Psi_{M,rho}, where the gate h ramps from 0 below c - 2 alpha
// to 1 above c - alpha with c the running sup. Steps leaving the admissible
// region D (boundary margin rho, separation rho, Lambda window spanned by the
// seeds with a sigma0 margin) are halved and ultimately rejected.

struct MinmaxOptions {
    int sigma_count = 7;  // odd, so the grid contains sigma = 1 exactly
    int max_steps = 3000;
    double dt = 0.02;
    double alpha = 0.0; // gate width; 0 = auto (0.2 x initial sup-inf spread)
    double K = 50.0;    // monitored lower bound on the running sup
};

struct MinmaxResult {
    double value = 0.0; // inf over flow time of the running sup
    std::vector<Point> xi_star;      // member attaining the final sup
    std::vector<double> Lambda_star;
    bool stayed_in_D = true;
    bool sup_dipped_below_minus_K = false;
    int steps_taken = 0;
};

MinmaxResult minmax_estimate(const PairKernel& k, const TruncationParams& tp,
                             const std::vector<Point>& M1,
                             const std::vector<Point>& M2,
                             Criticality sign = Criticality::supercritical,
                             const MinmaxOptions& opt = {});

// ---------------------------------------------------------------------------
// half-space boundary function
//
// Two aligned points at heights 1 and theta > 1. Spectral kind uses the
// image-kernel form
//   phi_+(theta) = 2^{2s-n} theta^{-(n-2s)/2} - (theta-1)^{2s-n}
//                  + (theta+1)^{2s-n},
// the zero-exterior kind the varphi of the half-space closed forms,
//   phi_+(theta) = a d iota 2^{2s-n} theta^{-(n-2s)/2}
//                  - a (theta-1)^{2s-n} [1 - d K((theta-1)^2, 4 theta)].
// Both vanish exactly once on (1, infinity), with positive slope at the root.

struct PhiPlusValue {
    double value = 0.0;
    double derivative = 0.0;
};

PhiPlusValue halfspace_phi_plus(const ConstantSet& cs, double theta,
                                OpKind kind);

// Root by bisection on (lo, hi); throws if no sign change brackets it.
double phi_plus_root(const ConstantSet& cs, OpKind kind, double lo = 1.0 + 1e-9,
                     double hi = 100.0);

} // namespace fracbubble
