#include "fracbubble/reduced.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "fracbubble/spline.hpp"

namespace fracbubble {

namespace {

double default_delta(const DomainSpec& dom, double requested) {
    return requested > 0.0 ? requested : 0.1 * dom.diam();
}

// ---------------------------------------------------------------------------
// admissibility

void check_admissible(const PairKernel& k, const std::vector<Point>& xi,
                      const std::vector<double>& Lambda) {
    const std::size_t m = xi.size();
    if (m == 0 || Lambda.size() != m)
        throw std::invalid_argument("psi_eval: xi and Lambda sizes differ");
    const int n = k.dom->n;
    const double delta = k.delta;
    for (std::size_t i = 0; i < m; ++i) {
        const double db = k.dom->dist_to_boundary(xi[i]);
        if (!(db >= delta)) {
            std::ostringstream os;
            os << "psi_eval: dist(xi_" << i + 1 << ", boundary) = " << db
               << " violates the margin delta = " << delta;
            throw std::domain_error(os.str());
        }
        if (!(Lambda[i] > delta && Lambda[i] < 1.0 / delta)) {
            std::ostringstream os;
            os << "psi_eval: Lambda_" << i + 1 << " = " << Lambda[i]
               << " outside (delta, 1/delta) = (" << delta << ", "
               << 1.0 / delta << ")";
            throw std::domain_error(os.str());
        }
        for (std::size_t j = i + 1; j < m; ++j) {
            const double sep = std::sqrt(dist2(xi[i], xi[j], n));
            if (!(sep >= delta)) {
                std::ostringstream os;
                os << "psi_eval: |xi_" << i + 1 << " - xi_" << j + 1
                   << "| = " << sep << " violates the separation delta = "
                   << delta;
                throw std::domain_error(os.str());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// value and analytic gradient, with optional interaction cutoff
//
// Gradient layout matches PsiPoint: n coordinates per point, then the
// Lambda block. When the cutoff is active (G >= M) the interaction term is
// frozen in xi (d G_M = 0 there) and contributes G_M to the Lambda part.

struct PsiParts {
    double value = 0.0;
    Eigen::VectorXd grad;
};

PsiParts psi_parts(const PairKernel& k, const std::vector<Point>& xi,
                   const std::vector<double>& Lambda, Criticality sign,
                   const TruncationParams* tp) {
    const int m = static_cast<int>(xi.size());
    const int n = k.dom->n;
    const double sgn = crit_sign(sign);

    PsiParts out;
    out.grad = Eigen::VectorXd::Zero(m * n + m);
    auto gxi = [&](int i, int c) -> double& { return out.grad[i * n + c]; };
    auto gL = [&](int i) -> double& { return out.grad[m * n + i]; };

    for (int i = 0; i < m; ++i) {
        const double Hi = k.H(xi[i]);
        out.value += 0.5 * Hi * Lambda[i] * Lambda[i];
        out.value += sgn * std::log(Lambda[i]);
        gL(i) += Hi * Lambda[i] + sgn / Lambda[i];
        const Point dH = k.gradH(xi[i]);
        for (int c = 0; c < n; ++c)
            gxi(i, c) += 0.5 * dH[c] * Lambda[i] * Lambda[i];
    }

    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            const double Gij = k.G(xi[i], xi[j]);
            const bool cut = tp != nullptr && Gij >= tp->M;
            const double Geff = cut ? tp->M : Gij;
            out.value -= Geff * Lambda[i] * Lambda[j];
            gL(i) -= Geff * Lambda[j];
            gL(j) -= Geff * Lambda[i];
            if (!cut) {
                const Point d1 = k.gradG1(xi[i], xi[j]);
                const Point d2 = k.gradG2(xi[i], xi[j]);
                for (int c = 0; c < n; ++c) {
                    gxi(i, c) -= d1[c] * Lambda[i] * Lambda[j];
                    gxi(j, c) -= d2[c] * Lambda[i] * Lambda[j];
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// state packing for the search and the flow

int state_dim(int m, int n) { return m * n + m; }

Eigen::VectorXd pack(const std::vector<Point>& xi,
                     const std::vector<double>& Lambda, int n) {
    const int m = static_cast<int>(xi.size());
    Eigen::VectorXd z(state_dim(m, n));
    for (int i = 0; i < m; ++i)
        for (int c = 0; c < n; ++c) z[i * n + c] = xi[i][c];
    for (int i = 0; i < m; ++i) z[m * n + i] = Lambda[i];
    return z;
}

void unpack(const Eigen::VectorXd& z, int m, int n, std::vector<Point>& xi,
            std::vector<double>& Lambda) {
    xi.assign(m, Point{0.0, 0.0, 0.0});
    Lambda.assign(m, 0.0);
    for (int i = 0; i < m; ++i)
        for (int c = 0; c < n; ++c) xi[i][c] = z[i * n + c];
    for (int i = 0; i < m; ++i) Lambda[i] = z[m * n + i];
}

// landscape functor: base Psi plus an optional smooth perturbation
struct Landscape {
    const PairKernel* k = nullptr;
    Criticality sign = Criticality::subcritical;
    // perturbation value/gradient in state coordinates; may be empty
    std::function<double(const Eigen::VectorXd&)> pval;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> pgrad;

    bool eval(const Eigen::VectorXd& z, int m, double& value,
              Eigen::VectorXd* grad) const {
        std::vector<Point> xi;
        std::vector<double> Lambda;
        unpack(z, m, k->dom->n, xi, Lambda);
        try {
            check_admissible(*k, xi, Lambda);
            PsiParts p = psi_parts(*k, xi, Lambda, sign, nullptr);
            value = p.value;
            if (grad != nullptr) *grad = p.grad;
        } catch (const std::domain_error&) {
            return false;
        } catch (const std::invalid_argument&) {
            return false;
        }
        if (pval) value += pval(z);
        if (grad != nullptr && pgrad) *grad += pgrad(z);
        return true;
    }
};

// central-difference Hessian of the analytic gradient; steps shrink when a
// probe leaves the admissible set
bool fd_hessian(const Landscape& L, const Eigen::VectorXd& z, int m,
                const Eigen::VectorXd& steps, Eigen::MatrixXd& Hout) {
    const int D = static_cast<int>(z.size());
    Hout.resize(D, D);
    double v;
    for (int c = 0; c < D; ++c) {
        double step = steps[c];
        Eigen::VectorXd gp(D), gm(D);
        bool ok = false;
        for (int attempt = 0; attempt < 8 && !ok; ++attempt, step *= 0.5) {
            Eigen::VectorXd zp = z, zm = z;
            zp[c] += step;
            zm[c] -= step;
            ok = L.eval(zp, m, v, &gp) && L.eval(zm, m, v, &gm);
            if (ok) Hout.col(c) = (gp - gm) / (2.0 * step);
        }
        if (!ok) return false;
    }
    Hout = 0.5 * (Hout + Hout.transpose()).eval();
    return true;
}

Eigen::VectorXd hessian_steps(const Eigen::VectorXd& z, int m, int n,
                              double diam) {
    Eigen::VectorXd steps(z.size());
    for (int c = 0; c < m * n; ++c) steps[c] = 1e-4 * diam;
    for (int i = 0; i < m; ++i)
        steps[m * n + i] = 1e-4 * std::max(std::abs(z[m * n + i]), 0.1);
    return steps;
}

// damped Newton toward grad = 0 (critical points of any signature); the
// Levenberg shift grows until the gradient norm decreases
bool newton_search(const Landscape& L, int m, Eigen::VectorXd& z, double tol,
                   double diam, int max_iter, double* grad_norm_out) {
    const int n = L.k->dom->n;
    double value;
    Eigen::VectorXd g;
    if (!L.eval(z, m, value, &g)) return false;

    for (int iter = 0; iter < max_iter; ++iter) {
        const double gn = g.norm();
        if (grad_norm_out != nullptr) *grad_norm_out = gn;
        if (gn <= tol) return true;

        Eigen::MatrixXd H;
        if (!fd_hessian(L, z, m, hessian_steps(z, m, n, diam), H)) return false;

        double mu = 0.0;
        bool stepped = false;
        for (int attempt = 0; attempt < 25 && !stepped; ++attempt) {
            Eigen::MatrixXd Hmu = H;
            for (int c = 0; c < Hmu.rows(); ++c) Hmu(c, c) += mu;
            Eigen::VectorXd dz = Hmu.fullPivLu().solve(-g);
            if (dz.allFinite()) {
                // cap the move at a tenth of the domain scale per iteration
                const double cap = 0.1 * diam;
                if (dz.norm() > cap) dz *= cap / dz.norm();
                Eigen::VectorXd zc = z + dz;
                double vc;
                Eigen::VectorXd gc;
                // halve into the admissible set if the full step left it
                for (int h = 0; h < 8; ++h) {
                    if (L.eval(zc, m, vc, &gc)) {
                        if (gc.norm() < gn * (1.0 - 1e-12) || gc.norm() <= tol) {
                            z = zc;
                            g = gc;
                            stepped = true;
                        }
                        break;
                    }
                    dz *= 0.5;
                    zc = z + dz;
                }
            }
            if (!stepped) mu = (mu == 0.0 ? 1e-6 : mu * 10.0);
            if (mu > 1e12) break;
        }
        if (!stepped) {
            if (grad_norm_out != nullptr) *grad_norm_out = g.norm();
            return g.norm() <= tol;
        }
    }
    if (grad_norm_out != nullptr) *grad_norm_out = g.norm();
    return g.norm() <= tol;
}

void fill_signature(const Landscape& L, int m, const Eigen::VectorXd& z,
                    double diam, CriticalPoint& cp) {
    Eigen::MatrixXd H;
    if (!fd_hessian(L, z, m, hessian_steps(z, m, L.k->dom->n, diam), H)) return;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    cp.hess_eigs.assign(ev.data(), ev.data() + ev.size());
    cp.n_pos = cp.n_neg = cp.n_zero = 0;
    for (int c = 0; c < ev.size(); ++c) {
        if (std::abs(ev[c]) < 1e-6 * scale)
            ++cp.n_zero;
        else if (ev[c] > 0.0)
            ++cp.n_pos;
        else
            ++cp.n_neg;
    }
}

} // namespace

// ---------------------------------------------------------------------------
// kernels

PairKernel closed_ball_kernel(const ConstantSet& cs, const DomainSpec& ball,
                              double delta) {
    if (ball.kind != DomainKind::ball)
        throw std::invalid_argument("closed_ball_kernel: domain is not a ball");
    cs.require_resolved();
    const int n = cs.n;
    const double s = cs.s;
    const double R = ball.radius;
    const Point c0 = ball.center;
    const double q2 = 0.5 * (n - 2.0 * s); // (n-2s)/2
    const double scale = std::pow(R, 2.0 * s - n);

    // unit-ball coordinates u = (x - c0)/R; G and H scale by R^{2s-n}
    auto to_unit = [n, R, c0](const Point& x) {
        Point u{0.0, 0.0, 0.0};
        for (int c = 0; c < n; ++c) u[c] = (x[c] - c0[c]) / R;
        return u;
    };

    FracParams fp;
    fp.n = n;
    fp.s = s;

    PairKernel k;
    k.dom = &ball; // caller keeps the DomainSpec alive
    k.delta = default_delta(ball, delta);

    k.H = [cs, to_unit, scale](const Point& x) {
        return scale * ball_robin(cs, to_unit(x));
    };
    k.gradH = [cs, to_unit, scale, n, s, R](const Point& x) {
        const Point u = to_unit(x);
        double u2 = 0.0;
        for (int c = 0; c < n; ++c) u2 += u[c] * u[c];
        const double base = cs.a * cs.d_half * cs.iota;
        const double f = base * (n - 2.0 * s) *
                         std::pow(1.0 - u2, 2.0 * s - n - 1.0) * 2.0;
        Point g{0.0, 0.0, 0.0};
        for (int c = 0; c < n; ++c) g[c] = scale / R * f * u[c];
        return g;
    };
    k.G = [cs, to_unit, scale](const Point& x, const Point& y) {
        return scale * ball_green(cs, to_unit(x), to_unit(y));
    };

    // dG in the first argument via the kernel partials:
    // G = a r^{-q2} (1 - d K(r,t)), r = |u-v|^2, t = (1-|u|^2)(1-|v|^2)
    auto grad_first = [cs, to_unit, scale, n, q2, R, fp](const Point& x,
                                                         const Point& y) {
        const Point u = to_unit(x), v = to_unit(y);
        double r = 0.0, u2 = 0.0, v2 = 0.0;
        for (int c = 0; c < n; ++c) {
            const double d = u[c] - v[c];
            r += d * d;
            u2 += u[c] * u[c];
            v2 += v[c] * v[c];
        }
        if (r <= 0.0)
            throw std::domain_error("pair kernel gradient: coincident points");
        const double t = (1.0 - u2) * (1.0 - v2);
        const KernelDerivatives kd = kernel_K_and_partials(r, t, fp);
        const double rp = std::pow(r, -q2);
        const double Gr = cs.a * (-q2 * rp / r * (1.0 - cs.d_half * kd.K) -
                                  rp * cs.d_half * kd.dK_dr);
        const double Gt = -cs.a * rp * cs.d_half * kd.dK_dt;
        Point g{0.0, 0.0, 0.0};
        for (int c = 0; c < n; ++c) {
            const double dr_du = 2.0 * (u[c] - v[c]);
            const double dt_du = -2.0 * u[c] * (1.0 - v2);
            g[c] = scale / R * (Gr * dr_du + Gt * dt_du);
        }
        return g;
    };
    k.gradG1 = grad_first;
    k.gradG2 = [grad_first](const Point& x, const Point& y) {
        return grad_first(y, x); // closed form is symmetric
    };
    return k;
}

PairKernel table_kernel(const GreenTable& table, const ConstantSet& cs,
                        double delta) {
    (void)cs;
    if (table.op == nullptr || table.samples.size() < 4)
        throw std::invalid_argument("table_kernel: need >= 4 tabulated samples");
    const DomainSpec& dom = table.op->grid.dom;
    if (dom.n != 1)
        throw std::invalid_argument("table_kernel: tabulated kernels are 1-D");

    struct Splines {
        std::vector<double> sx;          // sample coordinates, ascending
        CubicSpline robin;               // diagonal H
        std::vector<CubicSpline> rows;   // G(xi_k, .) along the grid
    };
    auto sp = std::make_shared<Splines>();

    // sort samples by coordinate
    const std::size_t ns = table.samples.size();
    std::vector<std::size_t> order(ns);
    for (std::size_t i = 0; i < ns; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return table.samples[a][0] < table.samples[b][0];
    });

    std::vector<double> nodes(table.op->grid.size());
    for (int j = 0; j < table.op->grid.size(); ++j)
        nodes[j] = table.op->grid.nodes[j][0];

    std::vector<double> rv(ns);
    sp->sx.resize(ns);
    sp->rows.reserve(ns);
    for (std::size_t i = 0; i < ns; ++i) {
        sp->sx[i] = table.samples[order[i]][0];
        rv[i] = table.robin_values[order[i]];
        sp->rows.emplace_back(nodes, table.G[order[i]]);
    }
    sp->robin = CubicSpline(sp->sx, rv);

    PairKernel k;
    k.dom = &table.op->grid.dom;
    k.delta = default_delta(dom, delta);

    k.H = [sp](const Point& x) { return sp->robin(x[0]); };
    k.gradH = [sp](const Point& x) {
        return Point{sp->robin.derivative(x[0]), 0.0, 0.0};
    };
    // cross-sample spline of the row values at the second coordinate
    k.G = [sp](const Point& x, const Point& y) {
        std::vector<double> g(sp->sx.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = sp->rows[i](y[0]);
        return CubicSpline(sp->sx, g)(x[0]);
    };
    k.gradG1 = [sp](const Point& x, const Point& y) {
        std::vector<double> g(sp->sx.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = sp->rows[i](y[0]);
        return Point{CubicSpline(sp->sx, g).derivative(x[0]), 0.0, 0.0};
    };
    k.gradG2 = [sp](const Point& x, const Point& y) {
        std::vector<double> g(sp->sx.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = sp->rows[i].derivative(y[0]);
        return Point{CubicSpline(sp->sx, g)(x[0]), 0.0, 0.0};
    };
    return k;
}

PairKernel synthetic_kernel(const DomainSpec& dom, double delta,
                            std::function<double(const Point&)> H,
                            std::function<double(const Point&, const Point&)> G,
                            std::function<Point(const Point&)> gradH,
                            std::function<Point(const Point&, const Point&)> gradG1,
                            std::function<Point(const Point&, const Point&)> gradG2) {
    PairKernel k;
    k.dom = &dom;
    k.delta = default_delta(dom, delta);
    k.H = std::move(H);
    k.G = std::move(G);
    k.gradH = std::move(gradH);
    k.gradG1 = std::move(gradG1);
    k.gradG2 = std::move(gradG2);
    return k;
}

// ---------------------------------------------------------------------------
// landscape evaluation

PsiPoint psi_eval(const PairKernel& k, const std::vector<Point>& xi,
                  const std::vector<double>& Lambda, Criticality sign) {
    check_admissible(k, xi, Lambda);
    const PsiParts p = psi_parts(k, xi, Lambda, sign, nullptr);
    PsiPoint out;
    out.xi = xi;
    out.Lambda = Lambda;
    out.value = p.value;
    out.gradient.assign(p.grad.data(), p.grad.data() + p.grad.size());
    return out;
}

double varphi(const PairKernel& k, const Point& xi1, const Point& xi2) {
    if (dist2(xi1, xi2, k.dom->n) <= 0.0)
        throw std::domain_error("varphi: coincident points");
    if (!k.dom->contains(xi1) || !k.dom->contains(xi2))
        throw std::domain_error("varphi: points must be interior");
    return std::sqrt(k.H(xi1) * k.H(xi2)) - k.G(xi1, xi2);
}

CriticalLambda lambda_critical(const PairKernel& k, const Point& xi1,
                               const Point& xi2) {
    const double H1 = k.H(xi1);
    const double H2 = k.H(xi2);
    const double G12 = k.G(xi1, xi2);
    const double vph = std::sqrt(H1 * H2) - G12;
    if (!(vph < 0.0))
        throw std::domain_error(
            "lambda_critical: varphi >= 0, no negative direction");
    CriticalLambda out;
    out.Lambda1 = std::sqrt(-std::sqrt(H2) / (std::sqrt(H1) * vph));
    out.Lambda2 = std::sqrt(-std::sqrt(H1) / (std::sqrt(H2) * vph));
    out.Q = H1 * out.Lambda1 * out.Lambda1 + H2 * out.Lambda2 * out.Lambda2 -
            2.0 * G12 * out.Lambda1 * out.Lambda2;
    return out;
}

double psi_truncated(const PairKernel& k, const TruncationParams& tp,
                     const std::vector<Point>& xi,
                     const std::vector<double>& Lambda, Criticality sign) {
    tp.validate();
    check_admissible(k, xi, Lambda);
    return psi_parts(k, xi, Lambda, sign, &tp).value;
}

// ---------------------------------------------------------------------------
// critical points

std::vector<CriticalPoint> find_critical(const PairKernel& k,
                                         const std::vector<PsiPoint>& seeds,
                                         double tol, Criticality sign) {
    Landscape L;
    L.k = &k;
    L.sign = sign;
    const int n = k.dom->n;
    const double diam = k.dom->diam();

    std::vector<CriticalPoint> found;
    for (const PsiPoint& seed : seeds) {
        const int m = static_cast<int>(seed.xi.size());
        Eigen::VectorXd z = pack(seed.xi, seed.Lambda, n);
        double gn = 0.0;
        const bool ok = newton_search(L, m, z, tol, diam, 200, &gn);

        CriticalPoint cp;
        unpack(z, m, n, cp.xi, cp.Lambda);
        cp.grad_norm = gn;
        cp.converged = ok;
        if (ok) fill_signature(L, m, z, diam, cp);

        if (ok) {
            // deduplicate within 10x the convergence tolerance
            bool dup = false;
            for (const CriticalPoint& prev : found) {
                if (!prev.converged ||
                    prev.xi.size() != cp.xi.size())
                    continue;
                double d2 = 0.0;
                for (std::size_t i = 0; i < cp.xi.size(); ++i) {
                    d2 += dist2(prev.xi[i], cp.xi[i], n);
                    const double dL = prev.Lambda[i] - cp.Lambda[i];
                    d2 += dL * dL;
                }
                if (std::sqrt(d2) <= 10.0 * tol) {
                    dup = true;
                    break;
                }
            }
            if (dup) continue;
        }
        found.push_back(std::move(cp));
    }
    return found;
}

StabilityReport classify_stability(const PairKernel& k, const CriticalPoint& cp,
                                   double mu, Criticality sign, int runs,
                                   unsigned rng_seed) {
    if (!cp.converged)
        throw std::invalid_argument("classify_stability: critical point did not converge");
    const int n = k.dom->n;
    const int m = static_cast<int>(cp.xi.size());
    const int D = state_dim(m, n);
    const double diam = k.dom->diam();

    StabilityReport rep;
    rep.nondegenerate = cp.n_zero == 0 && !cp.hess_eigs.empty();
    rep.runs = runs;

    const Eigen::VectorXd z0 = pack(cp.xi, cp.Lambda, n);

    // dimensionless chart u: xi scaled by the domain diameter, Lambda in log;
    // the perturbation and the persistence radius both live here
    auto to_chart = [m, n, diam](const Eigen::VectorXd& z) {
        Eigen::VectorXd u(z.size());
        for (int c = 0; c < m * n; ++c) u[c] = z[c] / diam;
        for (int i = 0; i < m; ++i) u[m * n + i] = std::log(z[m * n + i]);
        return u;
    };

    std::mt19937 rng(rng_seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);

    rep.stable = true;
    for (int run = 0; run < runs; ++run) {
        // random trig field with C1 norm exactly mu in the chart:
        // p(u) = mu/Z sum_k a_k cos(<w_k, u> + t_k), Z = sum |a_k| (1 + |w_k|)
        const int waves = 6;
        Eigen::MatrixXd w(waves, D);
        Eigen::VectorXd amp(waves), th(waves);
        double Z = 0.0;
        for (int kk = 0; kk < waves; ++kk) {
            for (int c = 0; c < D; ++c) w(kk, c) = 3.0 * unif(rng);
            amp[kk] = unif(rng);
            th[kk] = phase(rng);
            Z += std::abs(amp[kk]) * (1.0 + w.row(kk).norm());
        }
        if (Z <= 0.0) Z = 1.0;

        Landscape L;
        L.k = &k;
        L.sign = sign;
        L.pval = [=](const Eigen::VectorXd& z) {
            const Eigen::VectorXd u = to_chart(z);
            double v = 0.0;
            for (int kk = 0; kk < waves; ++kk)
                v += amp[kk] * std::cos(w.row(kk).dot(u) + th[kk]);
            return mu / Z * v;
        };
        L.pgrad = [=](const Eigen::VectorXd& z) {
            const Eigen::VectorXd u = to_chart(z);
            Eigen::VectorXd du = Eigen::VectorXd::Zero(D);
            for (int kk = 0; kk < waves; ++kk) {
                const double sn = std::sin(w.row(kk).dot(u) + th[kk]);
                du -= amp[kk] * sn * w.row(kk).transpose();
            }
            du *= mu / Z;
            // chain rule back to state coordinates
            Eigen::VectorXd dz(D);
            for (int c = 0; c < m * n; ++c) dz[c] = du[c] / diam;
            for (int i = 0; i < m; ++i)
                dz[m * n + i] = du[m * n + i] / z[m * n + i];
            return dz;
        };

        Eigen::VectorXd z = z0;
        double gn = 0.0;
        const bool ok = newton_search(L, m, z, std::max(1e-12, 1e-4 * mu),
                                      diam, 200, &gn);
        const double disp = ok ? (to_chart(z) - to_chart(z0)).norm()
                               : std::numeric_limits<double>::infinity();
        rep.max_displacement = std::max(rep.max_displacement, disp);
        if (!ok || disp > mu) rep.stable = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// min-max estimate

MinmaxResult minmax_estimate(const PairKernel& k, const TruncationParams& tp,
                             const std::vector<Point>& M1,
                             const std::vector<Point>& M2, Criticality sign,
                             const MinmaxOptions& opt) {
    tp.validate();
    if (M1.empty() || M2.empty())
        throw std::invalid_argument("minmax_estimate: empty seed component");
    if (opt.sigma_count < 1 || opt.sigma_count % 2 == 0)
        throw std::invalid_argument("minmax_estimate: sigma_count must be odd");
    const int n = k.dom->n;

    // seed the class: zeta_0(xi, sigma) = (xi, sigma Lambda(xi)); the level
    // condition varphi <= -rho0 is a precondition on the sampled product
    std::vector<Eigen::VectorXd> states;
    for (const Point& p : M1) {
        for (const Point& q : M2) {
            const double vph = varphi(k, p, q);
            if (!(vph <= -tp.rho0)) {
                std::ostringstream os;
                os << "minmax_estimate: varphi = " << vph
                   << " above the level margin -rho0 = " << -tp.rho0;
                throw std::invalid_argument(os.str());
            }
            const CriticalLambda lc = lambda_critical(k, p, q);
            for (int t = 0; t < opt.sigma_count; ++t) {
                // geometric grid over [sigma0, 1/sigma0] containing 1
                const double e = opt.sigma_count == 1
                                     ? 0.0
                                     : -1.0 + 2.0 * t / (opt.sigma_count - 1.0);
                const double sigma = std::pow(tp.sigma0, -e);
                states.push_back(
                    pack({p, q}, {sigma * lc.Lambda1, sigma * lc.Lambda2}, n));
            }
        }
    }
    const int m = 2;

    // Lambda window of the admissible region D, spanned by the seeds with a
    // sigma0 margin
    double Lmin = std::numeric_limits<double>::infinity(), Lmax = 0.0;
    for (const Eigen::VectorXd& z : states)
        for (int i = 0; i < m; ++i) {
            Lmin = std::min(Lmin, z[m * n + i]);
            Lmax = std::max(Lmax, z[m * n + i]);
        }
    const double Llo = Lmin * tp.sigma0;
    const double Lhi = Lmax / tp.sigma0;

    auto in_D = [&](const Eigen::VectorXd& z) {
        std::vector<Point> xi;
        std::vector<double> Lambda;
        unpack(z, m, n, xi, Lambda);
        for (int i = 0; i < m; ++i) {
            if (!k.dom->contains(xi[i])) return false;
            if (k.dom->dist_to_boundary(xi[i]) < tp.rho) return false;
            if (Lambda[i] < Llo || Lambda[i] > Lhi) return false;
        }
        return std::sqrt(dist2(xi[0], xi[1], n)) >= tp.rho;
    };

    auto eval_value = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
        std::vector<Point> xi;
        std::vector<double> Lambda;
        unpack(z, m, n, xi, Lambda);
        PsiParts p = psi_parts(k, xi, Lambda, sign, &tp);
        if (grad != nullptr) *grad = p.grad;
        return p.value;
    };

    const int N = static_cast<int>(states.size());
    std::vector<double> vals(N);
    for (int i = 0; i < N; ++i) vals[i] = eval_value(states[i], nullptr);

    double sup0 = -std::numeric_limits<double>::infinity();
    double inf0 = std::numeric_limits<double>::infinity();
    for (double v : vals) {
        sup0 = std::max(sup0, v);
        inf0 = std::min(inf0, v);
    }
    const double alpha =
        opt.alpha > 0.0 ? opt.alpha : std::max(0.2 * (sup0 - inf0), 1e-3);

    MinmaxResult res;
    res.value = sup0;
    int best_member = static_cast<int>(
        std::max_element(vals.begin(), vals.end()) - vals.begin());

    double last_improvement = sup0;
    int stall = 0;
    for (int step = 0; step < opt.max_steps; ++step) {
        const double c = *std::max_element(vals.begin(), vals.end());

#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < N; ++i) {
            // level gate: frozen far below the running sup, full near it
            const double gate =
                std::clamp((vals[i] - (c - 2.0 * alpha)) / alpha, 0.0, 1.0);
            if (gate <= 0.0) continue;
            Eigen::VectorXd g;
            eval_value(states[i], &g);
            if (g.norm() < 1e-9) continue; // stationary member
            Eigen::VectorXd dz = -opt.dt * gate * g;
            // cap the move so the two points can neither swap past each
            // other (an Euler step across the merging singularity passes
            // the separation test on the far side) nor cross the domain
            std::vector<Point> xi_c;
            std::vector<double> L_c;
            unpack(states[i], m, n, xi_c, L_c);
            const double sep = std::sqrt(dist2(xi_c[0], xi_c[1], n));
            const double cap = std::min(0.45 * sep, 0.05 * k.dom->diam());
            if (dz.head(m * n).norm() > cap)
                dz *= cap / dz.head(m * n).norm();
            for (int attempt = 0; attempt < 7; ++attempt, dz *= 0.5) {
                Eigen::VectorXd cand = states[i] + dz;
                if (in_D(cand)) {
                    states[i] = std::move(cand);
                    break;
                }
            }
        }

        for (int i = 0; i < N; ++i) vals[i] = eval_value(states[i], nullptr);
        const auto it = std::max_element(vals.begin(), vals.end());
        const double sup_t = *it;
        res.steps_taken = step + 1;
        if (sup_t < res.value) {
            res.value = sup_t;
            best_member = static_cast<int>(it - vals.begin());
        }
        if (res.value < -opt.K) res.sup_dipped_below_minus_K = true;

        // plateau detection: the top of the family has pinned
        if (last_improvement - sup_t < 1e-10) {
            if (++stall > 60) break;
        } else {
            stall = 0;
            last_improvement = sup_t;
        }
    }

    unpack(states[best_member], m, n, res.xi_star, res.Lambda_star);
    res.stayed_in_D = true;
    for (const Eigen::VectorXd& z : states)
        if (!in_D(z)) res.stayed_in_D = false;
    return res;
}

// ---------------------------------------------------------------------------
// half-space boundary function

PhiPlusValue halfspace_phi_plus(const ConstantSet& cs, double theta,
                                OpKind kind) {
    if (!(theta > 1.0))
        throw std::domain_error("halfspace_phi_plus: need theta > 1");
    const int n = cs.n;
    const double s = cs.s;
    const double nm = n - 2.0 * s;

    PhiPlusValue out;
    if (kind == OpKind::spectral) {
        const double c2 = std::pow(2.0, -nm);
        out.value = c2 * std::pow(theta, -0.5 * nm) -
                    std::pow(theta - 1.0, -nm) + std::pow(theta + 1.0, -nm);
        out.derivative = -0.5 * nm * c2 * std::pow(theta, -0.5 * nm - 1.0) +
                         nm * std::pow(theta - 1.0, -nm - 1.0) -
                         nm * std::pow(theta + 1.0, -nm - 1.0);
        return out;
    }
    if (kind != OpKind::restricted)
        throw std::invalid_argument(
            "halfspace_phi_plus: kind must be spectral or restricted");

    cs.require_resolved();
    FracParams fp;
    fp.n = n;
    fp.s = s;
    const double r = (theta - 1.0) * (theta - 1.0);
    const double t = 4.0 * theta;
    const double K = kernel_K(r, t, fp);
    const double Kp = kernel_K_theta_derivative(theta, fp);
    const double c2 = std::pow(2.0, -nm);

    out.value = cs.a * cs.d_half * cs.iota * c2 * std::pow(theta, -0.5 * nm) -
                cs.a * std::pow(theta - 1.0, -nm) * (1.0 - cs.d_half * K);
    out.derivative =
        -0.5 * nm * cs.a * cs.d_half * cs.iota * c2 *
            std::pow(theta, -0.5 * nm - 1.0) +
        nm * cs.a * std::pow(theta - 1.0, -nm - 1.0) * (1.0 - cs.d_half * K) +
        cs.a * std::pow(theta - 1.0, -nm) * cs.d_half * Kp;
    return out;
}

double phi_plus_root(const ConstantSet& cs, OpKind kind, double lo, double hi) {
    double flo = halfspace_phi_plus(cs, lo, kind).value;
    double fhi = halfspace_phi_plus(cs, hi, kind).value;
    if (!(flo < 0.0 && fhi > 0.0))
        throw std::runtime_error(
            "phi_plus_root: no sign change on the bracket (lo, hi)");
    for (int iter = 0; iter < 200 && hi - lo > 1e-14 * hi; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double fm = halfspace_phi_plus(cs, mid, kind).value;
        (fm < 0.0 ? lo : hi) = mid;
        (fm < 0.0 ? flo : fhi) = fm;
    }
    return 0.5 * (lo + hi);
}

} // namespace fracbubble
