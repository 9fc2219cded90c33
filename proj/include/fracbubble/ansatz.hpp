#pragma once

// Multi-bubble ansatz on the expanded domain, the linearization around it
// projected off the bubble tangent space, and the diagnostics tying its
// energy back to the reduced functional.
//
// The expanded picture: for exponent p* +/- eps the domain is blown up by
// scale = eps^{-1/(n-2s)}, each prescribed point xi_i moves to xi_i' =
// scale * xi_i, and the bubble at xi_i' carries concentration parameter
// lambda_i = (beta Lambda_i)^{1/(n-2s)} which stays O(1) as eps -> 0. All
// solves here are 1-D: the graded mesh and the nonuniform collocation
// assembly below have no 2-D counterpart.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "fracbubble/constants.hpp"
#include "fracbubble/domain.hpp"
#include "fracbubble/params.hpp"
#include "fracbubble/profiles.hpp"

namespace fracbubble {

struct AnsatzConfig {
    FracParams p;
    Criticality crit = Criticality::subcritical;
    double eps = 0.02;
    DomainSpec dom;               // original domain (interval or 1-D ball)
    std::vector<Point> xi;        // concentration points, original coordinates
    std::vector<double> Lambda;   // dilation parameters of the reduced energy
    ConstantSet cs;               // resolved constants (b, beta, omega, ...)

    // mesh controls: finest cell h0_factor * lambda_i at each center, cell
    // widths growing geometrically away from the centers
    double h0_factor = 1.0 / 64.0;
    double growth = 1.12;

    int m() const { return static_cast<int>(xi.size()); }
    double exponent() const;      // p* + eps (supercritical) or p* - eps
    double scale() const;         // eps^{-1/(n-2s)}
    double lambda(int i) const;   // (beta Lambda_i)^{1/(n-2s)}
    Point xi_scaled(int i) const;
    void validate() const;        // throws std::invalid_argument
};

// Cells of a graded 1-D mesh; unknowns are collocated at cell centers so the
// principal value of the kernel against the own-cell constant drops by
// symmetry, exactly as in the uniform assembly.
struct ScaledMesh {
    std::vector<double> edge;     // size() + 1 ascending cell edges
    std::vector<double> node;     // cell centers
    std::vector<double> cellw;    // cell widths
    double left = 0.0, right = 0.0;

    int size() const { return static_cast<int>(node.size()); }
    // midpoint-rule inner product sum_j f_j g_j |cell_j|
    double inner(const Field& f, const Field& g) const;
    double integral(const Field& f) const;
    int nearest(double x) const;  // index of the node closest to x
};

// Union of per-center geometric edge families, clipped to the expanded
// domain and deduplicated against a local target width.
ScaledMesh build_scaled_mesh(const AnsatzConfig& cfg);

// Same construction around explicit centers on (-T, T) with a width cap;
// used for linearization spectra where no eps enters.
ScaledMesh build_graded_mesh(const std::vector<double>& centers, double h0,
                             double growth, double hmax, double left,
                             double right);

// Fractional Laplacian on a graded mesh, zero exterior condition: exact
// per-cell kernel moments off the diagonal, exact exterior tails on it.
class ScaledOperator {
  public:
    ScaledMesh mesh;
    double s = 0.0;
    double cns = 0.0;             // kernel normalization
    Eigen::MatrixXd A;

    Field apply(const Field& u) const;
    Field solve(const Field& f) const;   // LU with iterative refinement

  private:
    mutable bool factored_ = false;
    mutable Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    void factor() const;
};

ScaledOperator build_scaled_operator(const AnsatzConfig& cfg,
                                     const ScaledMesh& mesh);
Eigen::MatrixXd assemble_graded_matrix(const ScaledMesh& mesh, double s,
                                       double cns);

// Nodal samples of the bubble w_i, its source w_i^{p*}, and the tangent
// kernels z_ij (j = 0 dilation, j >= 1 translations).
Field bubble_field(const AnsatzConfig& cfg, const ScaledMesh& mesh, int i);
Field bubble_source(const AnsatzConfig& cfg, const ScaledMesh& mesh, int i);
Field tangent_field(const AnsatzConfig& cfg, const ScaledMesh& mesh, int i,
                    int j);

struct BubbleProjection {
    Field v;                  // solves A_s v = w_i^{p*}, zero exterior
    double min_value = 0.0;   // min over nodes (comparison principle: >= 0)
    double max_excess = 0.0;  // max of v - w_i        (expected <= 0)
    double scheme_bias = 0.0; // sup |free solve - w_i|, the correction size
};

// Dirichlet projection of one bubble onto the expanded domain, defect
// corrected: the same mesh also solves the free-space problem (exterior data
// w_i instead of zero), whose exact solution is the bubble itself, and the
// difference w_i - v_free is the discretization bias shared by both solves.
// Subtracting it leaves the domain effect, which is O(eps) and would
// otherwise drown at desk resolutions. The free variant is the whole-space
// projection, which is the bubble itself.
BubbleProjection project_bubble(const AnsatzConfig& cfg,
                                const ScaledOperator& op, int i);
Field project_bubble_free(const AnsatzConfig& cfg, const ScaledMesh& mesh,
                          int i);

// v-bar = sum of the projected bubbles
Field build_ansatz(const std::vector<Field>& v);

// sup_x |f(x)| / sum_i (1 + |x - xi_i'|)^{-alpha}
double weighted_norm(const AnsatzConfig& cfg, const ScaledMesh& mesh,
                     const Field& f, double alpha);

// First error of the ansatz, R = vbar^{p*+-eps} - sum_i w_i^{p*}, and the
// quadratic remainder N(phi) = (vbar+phi)_+^{pe} - vbar^{pe} - pe
// vbar^{pe-1} phi. Negative bases take their positive part throughout.
Field first_error(const AnsatzConfig& cfg, const ScaledMesh& mesh,
                  const std::vector<Field>& v, const Field& vbar);
Field nonlinear_error(const AnsatzConfig& cfg, const Field& vbar,
                      const Field& phi);

struct ProjectedSolution {
    Field phi;
    Eigen::MatrixXd c;          // m x (n+1) multipliers
    double alpha = 0.0;         // decay rate of the source norm
    double norm_solution = 0.0; // ||phi|| at rate alpha - 2s
    double orth_residual = 0.0; // max |<phi, w^{p*-1} z_ij>| (scaled)
};

// Linearized operator at vbar with the tangent constraints appended:
//   A_s phi - pe vbar^{pe-1} phi = h + sum_ij c_ij w_i^{p*-1} z_ij,
//   <phi, w_i^{p*-1} z_ij> = 0.
// Factor once, solve many right-hand sides. solve() eliminates c through
// the Schur complement of the bordered system; solve_monolithic() solves
// the full (N + m(n+1)) system directly and exists as a cross-check.
class ProjectedLinearSolver {
  public:
    ProjectedLinearSolver(const AnsatzConfig& cfg, const ScaledOperator& op,
                          const Field& vbar, double alpha);

    ProjectedSolution solve(const Field& h) const;
    ProjectedSolution solve_monolithic(const Field& h) const;

    const Eigen::MatrixXd& constraint_columns() const { return B_; }

  private:
    const AnsatzConfig& cfg_;
    const ScaledOperator& op_;
    double alpha_;
    Eigen::MatrixXd K_;            // A - pe vbar^{pe-1}
    Eigen::MatrixXd B_;            // columns w_i^{p*-1} z_ij
    Eigen::MatrixXd C_;            // constraint rows (B scaled by cell width)
    Eigen::PartialPivLU<Eigen::MatrixXd> Klu_;
    Eigen::MatrixXd Yb_;           // K^{-1} B
    Eigen::PartialPivLU<Eigen::MatrixXd> Slu_;  // Schur complement C^T K^{-1} B
    ProjectedSolution package(const Eigen::VectorXd& phi,
                              const Eigen::VectorXd& c) const;
};

ProjectedSolution solve_projected_linear(const AnsatzConfig& cfg,
                                         const ScaledOperator& op,
                                         const Field& vbar, const Field& h,
                                         double alpha,
                                         bool monolithic = false);

struct NonlinearSolution {
    ProjectedSolution first;       // psi = L R, the linear-in-R part
    ProjectedSolution full;        // fixed point phi = L(R + N(phi))
    Field correction;              // phi - psi
    double correction_norm = 0.0;  // ||phi - psi|| at rate alpha - 2s
    std::vector<double> contraction; // per-iteration sup-norm ratios
    int iterations = 0;
    bool converged = false;
};

NonlinearSolution solve_nonlinear_projected(const AnsatzConfig& cfg,
                                            const ScaledOperator& op,
                                            const std::vector<Field>& v,
                                            double alpha,
                                            double fp_tol = 1e-10,
                                            int max_iter = 50);

struct EnergyBreakdown {
    double quadratic = 0.0;   // (1/2) <A_s vbar, vbar>, via sum_i <w_i^{p*}, vbar>
    double potential = 0.0;   // (pe+1)^{-1} int (vbar)_+^{pe+1}
    double total = 0.0;
};

EnergyBreakdown ansatz_energy(const AnsatzConfig& cfg, const ScaledMesh& mesh,
                              const std::vector<Field>& v);

// m copies of the free single-bubble energy (s/n) int w^{p*+1}, evaluated
// with this mesh's quadrature so its discretization error cancels against
// the ansatz energy in the expansion below.
double reference_energy(const AnsatzConfig& cfg, const ScaledMesh& mesh);

struct NehariSweep {
    double t_analytic = 0.0;  // (Q/P)^{1/(pe-1)} for J(t vbar)
    double t_sweep = 0.0;     // argmax over the sampled ray
    double J_max = 0.0;
};

NehariSweep nehari_sweep(const AnsatzConfig& cfg, const ScaledMesh& mesh,
                         const std::vector<Field>& v, double t_lo = 0.25,
                         double t_hi = 2.0, int steps = 351);

// (J_eps(vbar) - m C) / eps across an eps ladder, first-order Richardson
// extrapolation, against the prediction m gamma + omega Psi(xi, Lambda).
// xi and Lambda are the reduced functional's variables; the builder squares
// Lambda into the machine rate (see machine_rates in the implementation).
struct ExpansionCheck {
    std::vector<double> eps, J, D; // D_k = (J_k - m C_mesh) / eps_k
    std::vector<double> richardson;
    double psi = 0.0;
    double predicted = 0.0;
    double extrapolated = 0.0;
    double rel_error = 0.0;
};

ExpansionCheck energy_expansion_check(const FracParams& p, Criticality crit,
                                      const DomainSpec& dom,
                                      const std::vector<Point>& xi,
                                      const std::vector<double>& Lambda,
                                      const ConstantSet& cs,
                                      const std::vector<double>& eps_list,
                                      double h0_factor = 1.0 / 64.0,
                                      double growth = 1.12);

// Central differences of J_eps(vbar) in (xi, Lambda), divided by eps,
// against omega grad Psi. Components ordered as in the reduced module:
// m*n point coordinates, then m dilations.
struct GradientCheck {
    Eigen::VectorXd fd_over_eps;
    Eigen::VectorXd predicted;
    double worst_rel = 0.0;
};

GradientCheck energy_gradient_check(const FracParams& p, Criticality crit,
                                    const DomainSpec& dom,
                                    const std::vector<Point>& xi,
                                    const std::vector<double>& Lambda,
                                    const ConstantSet& cs, double eps,
                                    double step_xi, double step_lambda,
                                    double h0_factor = 1.0 / 64.0,
                                    double growth = 1.12);

// Back-transformed solution against the concentrating profile
// sum_i w_{mu_i, xi_i} with mu_i = (beta Lambda_i eps)^{1/(n-2s)}. The peak
// ratio carries the slowly vanishing exponent eps^{1/2 - kappa},
// kappa = 2s / (4s +- eps (n-2s)).
struct ProfileCheck {
    double kappa = 0.0;
    std::vector<double> mu;
    std::vector<double> peak_ratio;   // u / profile at each center
    double predicted_ratio = 0.0;     // eps^{1/2 - kappa}
    double sup_diff = 0.0;            // sup |u - profile| / peak of profile
};

ProfileCheck asymptotic_profile(const AnsatzConfig& cfg, const ScaledMesh& mesh,
                                const Field& u_scaled);

// Spectrum of the linearization at one free bubble on (-T, T), posed as the
// symmetric pencil A z = nu W z with W = w^{p*-1} quadrature weights; the
// tangent space sits at nu = p*, reported as mu = nu - p*.
struct SpectrumReport {
    Eigen::VectorXd mu;               // ascending
    int near_zero = 0;                // modes inside the zero cluster
    double cluster_radius = 0.0;      // largest |mu| inside the cluster
    double gap = 0.0;                 // smallest |mu| outside it
    double gap_factor = 0.0;          // gap / cluster_radius
    double negative = 0.0;            // the single mode below the cluster
    std::vector<double> angles;       // principal angles to span{z_j}, rad
    double span_residual = 0.0;       // worst relative W-norm residual
};

// The wall sits very far out (cells grow geometrically, so distance is
// cheap): the slow |x|^{2s-n} tails of the ground and dilation modes shift
// by O(T^{2s-n}) under a zero-exterior wall, and T around 1e6 starves that
// shift below the cluster radius.
SpectrumReport nondegeneracy_check(const FracParams& p, const ConstantSet& cs,
                                   double T = 1e6, double h0 = 1.0 / 32.0,
                                   double growth = 1.05, double hmax = 1e5);

// Random unit-norm sources pushed through the projected solver across an
// eps ladder: sup |phi| and max |c| should stay of one size, and the map
// must be exactly linear.
struct BoundProbe {
    std::vector<double> eps, sup_phi, max_c;
    double growth_sup = 0.0;       // worst consecutive ratio (either way)
    double growth_c = 0.0;
    double linearity_defect = 0.0; // ||L(10h) - 10 L(h)||_inf / ||L(10h)||_inf
};

BoundProbe a_priori_bound_probe(const FracParams& p, Criticality crit,
                                const DomainSpec& dom,
                                const std::vector<Point>& xi,
                                const std::vector<double>& Lambda,
                                const ConstantSet& cs,
                                const std::vector<double>& eps_list,
                                double alpha, unsigned seed);

// sup over sample points of int |x-y|^{2s-n} (1+|y|)^{-alpha} dy divided by
// (1+|x|)^{2s-alpha}; finite for alpha in (2s, n), the window the weighted
// norms live in.
double convolution_bound_ratio(const FracParams& p, double alpha);

} // namespace fracbubble
