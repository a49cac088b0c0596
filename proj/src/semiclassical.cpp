#include "qosc/semiclassical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qosc/reference.hpp"

namespace qosc {

namespace {

constexpr double kPi = std::numbers::pi;

double potential(const ModelParams& p, double x, double tau) {
    const double x2 = x * x;
    return 0.5 * p.m * p.omega_sq(tau) * x2 + 0.25 * p.lambda_at(tau) * x2 * x2;
}

double force_over_m(const ModelParams& p, double x, double tau) {
    return -p.omega_sq(tau) * x - p.lambda_at(tau) * x * x * x / p.m;
}

// One RK4 step of (x, v) and optionally two linearized pairs riding the
// same stage values of x.
struct FlowState {
    double x, v;
    double fj = 0.0, fjd = 1.0;  // second-variation pair
    double fs = 0.0, fsd = 1.0;  // stationary-frequency pair
};

struct FlowDeriv {
    double x, v, fj, fjd, fs, fsd;
};

FlowDeriv deriv(const ModelParams& p, const FlowState& s, double tau, bool linearized) {
    FlowDeriv d{s.v, force_over_m(p, s.x, tau), 0.0, 0.0, 0.0, 0.0};
    if (linearized) {
        const double om2 = p.omega_sq(tau);
        const double lam_x2 = p.lambda_at(tau) * s.x * s.x / p.m;
        d.fj = s.fjd;
        d.fjd = -(om2 + 3.0 * lam_x2) * s.fj;
        d.fs = s.fsd;
        d.fsd = -(om2 + lam_x2) * s.fs;
    }
    return d;
}

FlowState rk4_step(const ModelParams& p, const FlowState& s, double tau, double h,
                   bool linearized) {
    auto advance = [&](const FlowState& base, const FlowDeriv& k, double fac) {
        FlowState out = base;
        out.x += fac * k.x;
        out.v += fac * k.v;
        out.fj += fac * k.fj;
        out.fjd += fac * k.fjd;
        out.fs += fac * k.fs;
        out.fsd += fac * k.fsd;
        return out;
    };
    const FlowDeriv k1 = deriv(p, s, tau, linearized);
    const FlowDeriv k2 = deriv(p, advance(s, k1, h / 2.0), tau + h / 2.0, linearized);
    const FlowDeriv k3 = deriv(p, advance(s, k2, h / 2.0), tau + h / 2.0, linearized);
    const FlowDeriv k4 = deriv(p, advance(s, k3, h), tau + h, linearized);
    FlowState out = s;
    out.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    out.v += h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    out.fj += h / 6.0 * (k1.fj + 2.0 * k2.fj + 2.0 * k3.fj + k4.fj);
    out.fjd += h / 6.0 * (k1.fjd + 2.0 * k2.fjd + 2.0 * k3.fjd + k4.fjd);
    out.fs += h / 6.0 * (k1.fs + 2.0 * k2.fs + 2.0 * k3.fs + k4.fs);
    out.fsd += h / 6.0 * (k1.fsd + 2.0 * k2.fsd + 2.0 * k3.fsd + k4.fsd);
    return out;
}

double shoot_endpoint(const ModelParams& p, double x_i, double v0, double t, int n) {
    FlowState s{x_i, v0};
    const double h = t / static_cast<double>(n);
    for (int i = 0; i < n; ++i) s = rk4_step(p, s, h * static_cast<double>(i), h, false);
    return s.x;
}

void check_grid(double t, int n_grid) {
    if (!(t > 0.0)) throw std::invalid_argument("semiclassical: t must be positive");
    if (n_grid < 16 || n_grid % 2 != 0)
        throw std::invalid_argument("semiclassical: n_grid must be even and >= 16");
}

std::vector<double> branch_velocities(const ModelParams& p, double x_i, double x_f, double t,
                                      int n_grid) {
    // Scan window: linear transit speed plus the escape speed from the
    // potential at the larger endpoint.
    const double span = std::max({std::abs(x_i), std::abs(x_f), 1.0});
    const double v_max =
        6.0 * (span / t + std::sqrt(2.0 * potential(p, span, 0.0) / p.m) + 1.0);
    const int n_scan = 480;
    const double tol = 1e-10 * std::max(1.0, std::abs(x_f));

    auto miss = [&](double v0) { return shoot_endpoint(p, x_i, v0, t, n_grid) - x_f; };

    std::vector<double> roots;
    double prev_v = -v_max;
    double prev_m = miss(prev_v);
    for (int i = 1; i <= n_scan; ++i) {
        const double cur_v = -v_max + 2.0 * v_max * static_cast<double>(i) / n_scan;
        const double cur_m = miss(cur_v);
        if (prev_m == 0.0 || prev_m * cur_m < 0.0) {
            // Secant over the bracket with the Illinois damping so a stuck
            // endpoint cannot stall convergence.
            double lo = prev_v, flo = prev_m;
            double hi = cur_v, fhi = cur_m;
            double root = std::abs(flo) < std::abs(fhi) ? lo : hi;
            double froot = std::min(std::abs(flo), std::abs(fhi));
            int side = 0;
            for (int it = 0; it < 200 && froot > tol; ++it) {
                double c = (lo * fhi - hi * flo) / (fhi - flo);
                if (!std::isfinite(c) || c <= std::min(lo, hi) || c >= std::max(lo, hi))
                    c = 0.5 * (lo + hi);
                const double fc = miss(c);
                if (std::abs(fc) < froot) {
                    root = c;
                    froot = std::abs(fc);
                }
                if (flo * fc < 0.0) {
                    hi = c;
                    fhi = fc;
                    if (side == -1) flo *= 0.5;
                    side = -1;
                } else {
                    lo = c;
                    flo = fc;
                    if (side == 1) fhi *= 0.5;
                    side = 1;
                }
            }
            if (froot <= tol &&
                (roots.empty() ||
                 std::abs(root - roots.back()) > 1e-7 * std::max(1.0, std::abs(root))))
                roots.push_back(root);
        }
        prev_v = cur_v;
        prev_m = cur_m;
    }
    // Branch index orders by increasing speed: the direct (slowest) path
    // comes first, bounce orbits after.
    std::sort(roots.begin(), roots.end(), [](double a, double b) {
        return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : a < b;
    });
    return roots;
}

ClassicalPath build_path(const ModelParams& params, double x_i, double x_f, double t,
                         int n_grid, double v0) {
    ClassicalPath path;
    path.x_i = x_i;
    path.x_f = x_f;
    path.t = t;
    path.v0 = v0;
    path.x.resize(static_cast<std::size_t>(n_grid) + 1);
    path.v.resize(static_cast<std::size_t>(n_grid) + 1);

    FlowState s{x_i, v0};
    const double h = t / static_cast<double>(n_grid);
    path.x[0] = s.x;
    path.v[0] = s.v;
    for (int i = 0; i < n_grid; ++i) {
        s = rk4_step(params, s, h * static_cast<double>(i), h, false);
        path.x[static_cast<std::size_t>(i) + 1] = s.x;
        path.v[static_cast<std::size_t>(i) + 1] = s.v;
    }
    path.energy = 0.5 * params.m * v0 * v0 + potential(params, x_i, 0.0);
    path.action = classical_action(path, params);
    return path;
}

}  // namespace

ClassicalPath classical_trajectory(const ModelParams& params, double x_i, double x_f,
                                   double t, int n_grid, int branch) {
    params.validate();
    check_grid(t, n_grid);
    if (branch < 0) throw std::invalid_argument("classical_trajectory: branch must be >= 0");

    const auto roots = branch_velocities(params, x_i, x_f, t, n_grid);
    if (static_cast<std::size_t>(branch) >= roots.size())
        throw std::runtime_error("classical_trajectory: no solution for the requested branch");

    return build_path(params, x_i, x_f, t, n_grid, roots[static_cast<std::size_t>(branch)]);
}

double classical_action(const ClassicalPath& path, const ModelParams& params) {
    const std::size_t n = path.x.size();
    if (n < 3 || path.v.size() != n || n % 2 == 0)
        throw std::invalid_argument("classical_action: need an even-panel path");
    const double h = path.t / static_cast<double>(n - 1);
    auto lagrangian = [&](std::size_t i) {
        const double tau = h * static_cast<double>(i);
        return 0.5 * params.m * path.v[i] * path.v[i] - potential(params, path.x[i], tau);
    };
    double acc = lagrangian(0) + lagrangian(n - 1);
    for (std::size_t i = 1; i + 1 < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * lagrangian(i);
    return acc * h / 3.0;
}

FluctuationDet gelfand_yaglom(const ClassicalPath& path, const ModelParams& params) {
    const std::size_t n = path.x.size();
    if (n < 3) throw std::invalid_argument("gelfand_yaglom: empty path");
    const int n_grid = static_cast<int>(n) - 1;
    const double h = path.t / static_cast<double>(n_grid);

    FlowState s{path.x_i, path.v0};
    FluctuationDet det;
    double prev = 0.0;
    for (int i = 0; i < n_grid; ++i) {
        s = rk4_step(params, s, h * static_cast<double>(i), h, true);
        if (prev != 0.0 && prev * s.fj < 0.0) ++det.conjugate_points;
        prev = s.fj;
    }
    det.jacobi = s.fj;
    det.stationary = s.fs;
    if (std::abs(det.jacobi) < 1e-12 * std::max(1.0, path.t))
        throw std::domain_error("gelfand_yaglom: endpoint lies on a caustic");
    return det;
}

complex semiclassical_propagator(const ModelParams& params, double x_i, double x_f,
                                 double t, int branches, int n_grid) {
    params.validate();
    check_grid(t, n_grid);
    if (branches < 1)
        throw std::invalid_argument("semiclassical_propagator: need at least one branch");

    const auto roots = branch_velocities(params, x_i, x_f, t, n_grid);
    if (roots.empty())
        throw std::runtime_error("semiclassical_propagator: no classical path found");

    std::vector<ClassicalPath> paths;
    paths.reserve(roots.size());
    for (double v0 : roots) paths.push_back(build_path(params, x_i, x_f, t, n_grid, v0));
    // Dominant saddle first: truncating at `branches` keeps the paths of
    // least action magnitude.
    std::sort(paths.begin(), paths.end(), [](const ClassicalPath& a, const ClassicalPath& b) {
        return std::abs(a.action) < std::abs(b.action);
    });

    complex acc(0.0, 0.0);
    const std::size_t used = std::min(paths.size(), static_cast<std::size_t>(branches));
    for (std::size_t k = 0; k < used; ++k) {
        const auto det = gelfand_yaglom(paths[k], params);
        if (std::abs(det.jacobi) < 1e-10 * std::max(1.0, t))
            throw std::domain_error("semiclassical_propagator: endpoint on a caustic");
        const double amp = std::sqrt(params.m / (2.0 * kPi * params.hbar * std::abs(det.jacobi)));
        const double phase = paths[k].action / params.hbar - kPi / 4.0 -
                             kPi / 2.0 * static_cast<double>(det.conjugate_points);
        acc += amp * complex(std::cos(phase), std::sin(phase));
    }
    return acc;
}

namespace {

double partition_quadrature(const ModelParams& params, double beta, double x_cutoff,
                            long n_quad, bool corrected) {
    params.validate();
    if (!(beta > 0.0)) throw std::invalid_argument("partition: beta must be positive");
    if (!(x_cutoff > 0.0)) throw std::invalid_argument("partition: x_cutoff must be positive");
    if (n_quad < 8 || n_quad % 2 != 0)
        throw std::invalid_argument("partition: n_quad must be even and >= 8");
    if (!params.omega_sq.is_constant() || !params.lambda.is_constant())
        throw std::invalid_argument("partition: schedules must be constant");

    const double om2 = params.omega_sq(0.0);
    const double lam = params.lambda_at(0.0);
    const double m = params.m;
    const double hbar = params.hbar;

    auto integrand = [&](double x) {
        const double x2 = x * x;
        const double v = 0.5 * m * om2 * x2 + 0.25 * lam * x2 * x2;
        double f = std::exp(-beta * v);
        if (corrected) {
            const double vp = m * om2 * x + lam * x2 * x;
            const double vpp = m * om2 + 3.0 * lam * x2;
            f *= 1.0 + hbar * hbar * beta * beta / (12.0 * m) *
                           (0.5 * beta * vp * vp - vpp);
        }
        return f;
    };

    if (std::exp(-beta * potential(params, x_cutoff, 0.0)) > 1e-12)
        throw std::domain_error("partition: x_cutoff too small for the requested accuracy");

    const double h = 2.0 * x_cutoff / static_cast<double>(n_quad);
    double acc = integrand(-x_cutoff) + integrand(x_cutoff);
    for (long i = 1; i < n_quad; ++i)
        acc += (i % 2 ? 4.0 : 2.0) * integrand(-x_cutoff + h * static_cast<double>(i));
    return acc * h / 3.0 * std::sqrt(m / (2.0 * kPi * beta)) / hbar;
}

}  // namespace

double partition_classical(const ModelParams& params, double beta, double x_cutoff,
                           long n_quad) {
    return partition_quadrature(params, beta, x_cutoff, n_quad, false);
}

double partition_semiclassical(const ModelParams& params, double beta, double x_cutoff,
                               long n_quad) {
    return partition_quadrature(params, beta, x_cutoff, n_quad, true);
}

double partition_spectral(const ModelParams& params, double beta, int dim) {
    if (!(beta > 0.0)) throw std::invalid_argument("partition_spectral: beta must be positive");
    const auto levels = spectrum(params, dim);
    double acc = 0.0;
    for (double e : levels) acc += std::exp(-beta * e);
    if (std::exp(-beta * levels.back()) > 1e-10 * acc)
        throw std::domain_error("partition_spectral: truncated tail is not negligible");
    return acc;
}

ImaginaryTimeCoefficients imaginary_time_coefficients(const ModelParams& params, double beta,
                                                      double w_int) {
    params.validate();
    if (!(beta > 0.0))
        throw std::invalid_argument("imaginary_time_coefficients: beta must be positive");
    if (!params.omega_sq.is_constant())
        throw std::invalid_argument("imaginary_time_coefficients: omega^2 must be constant");

    const double m = params.m;
    const double c = -(m * params.omega_sq(0.0) + 2.0 * w_int / beta);
    ImaginaryTimeCoefficients out;
    out.f1 = c * beta;
    out.f3 = c * c * beta * beta * beta / (3.0 * m);
    out.g2 = c * beta * beta / m;
    out.l1 = -beta / m;
    out.l3 = -c * beta * beta * beta / (3.0 * m * m);
    return out;
}

}  // namespace qosc
