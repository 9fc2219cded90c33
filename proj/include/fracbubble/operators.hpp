#pragma once

// Discrete fractional Laplacians:
//   spectral    Dirichlet eigen-series (lambda_k^s on the eigenbasis)
//   restricted  hypersingular quadrature with zero exterior condition
//   whole-space same kernel with an algebraic far-field model instead of a wall
//
// All operators are symmetric positive definite on interior nodes. Assembly
// and transforms run OpenMP-parallel with serial reference paths kept for
// testing and benchmarks.

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>

#include "fracbubble/domain.hpp"
#include "fracbubble/params.hpp"

namespace fracbubble {

enum class OpKind { spectral, restricted, whole_space };

struct MaxPrincipleReport {
    double ratio = 0.0;       // sup |U| / sup |g|
    double sup_g = 0.0;
    double sup_u = 0.0;
    bool passed = false;
};

class DiscreteOperator {
  public:
    OpKind kind;
    DomainSpec domain;
    Grid grid;
    double s;
    double c_ns = 0.0;         // kernel normalization (restricted/whole-space)
    double tail_decay = 0.0;   // whole-space far-field exponent |u| ~ |x|^{-p}

    // spectral representation
    int spectral_count = 0;                 // truncation K (modes kept)
    Eigen::VectorXd eigenvalues_base;       // lambda_k of -Lap (not yet ^s)
    Eigen::MatrixXd eigenvectors;           // grid-orthonormal columns (ball)
    std::vector<int> mode_kx, mode_ky;      // rectangle tensor mode indices

    // restricted/whole-space representation
    Eigen::MatrixXd A;                      // dense quadrature matrix
    Eigen::VectorXd ws_tail_left, ws_tail_right; // whole-space far-field relief
    mutable std::optional<Eigen::LLT<Eigen::MatrixXd>> llt; // lazy factor

    Field apply(const Field& u) const;
    Field solve(const Field& f) const;

    // lambda_k^s spectrum (spectral kind only)
    Eigen::VectorXd fractional_spectrum() const;

    // value of the k-th grid-orthonormal eigenfield at node j (spectral kind)
    double eigenfunction(int k, int j) const;

    // <u, v> in the grid inner product (cell volume weighted)
    double inner(const Field& u, const Field& v) const;

    bool is_spectral() const { return kind == OpKind::spectral; }
};

// Build an operator; throws std::invalid_argument for unsupported
// (domain, kind) pairs (capability errors).
DiscreteOperator build_operator(const DomainSpec& dom, const FracParams& p,
                                const Grid& grid, OpKind kind);

// Exterior/boundary-data problem: restricted kind solves with exterior data g
// (a bounded function of the exterior point); spectral kind uses the discrete
// harmonic lift of g sampled on the boundary. Reports sup|U|/sup|g|.
MaxPrincipleReport max_principle_check(const DiscreteOperator& op,
                                       const std::function<double(const Point&)>& g);

// Serial reference of the restricted-matrix assembly (same values, no OpenMP);
// used by tests to pin determinism and by the benchmark target.
Eigen::MatrixXd assemble_restricted_serial(const DomainSpec& dom,
                                           const FracParams& p, const Grid& grid);

// Forward/backward sine transforms used by the interval spectral operator;
// *_serial are single-thread references.
void dst2_forward(const std::vector<double>& u, std::vector<double>& coef);
void dst2_backward(const std::vector<double>& coef, std::vector<double>& u);
void dst2_forward_serial(const std::vector<double>& u, std::vector<double>& coef);

} // namespace fracbubble
