#include "qosc/perturbation.hpp"

#include <cmath>
#include <stdexcept>

namespace qosc {

namespace {

struct LadderSetup {
    double w = 1.0;
    double lam = 0.0;
    Eigen::MatrixXd x4;
    Eigen::VectorXd energies;
};

LadderSetup make_setup(const ModelParams& params, int dim) {
    params.validate();
    if (dim < 4) throw std::invalid_argument("perturbation: dim must be >= 4");
    if (!params.omega_sq.is_constant() || !params.lambda.is_constant())
        throw std::invalid_argument("perturbation: schedules must be constant");
    const double om2 = params.omega_sq(0.0);
    if (!(om2 > 0.0)) throw std::invalid_argument("perturbation: omega^2 must be positive");

    LadderSetup s;
    s.w = std::sqrt(om2);
    s.lam = params.lambda_at(0.0);
    const auto ops = build_operators(dim, params, s.w);
    s.x4 = (ops.x * ops.x * ops.x * ops.x).real();
    s.energies.resize(dim);
    for (int j = 0; j < dim; ++j)
        s.energies[j] = params.hbar * s.w * (static_cast<double>(j) + 0.5);
    return s;
}

Eigen::MatrixXcd quadratic_propagator(const LadderSetup& s, double t, double hbar) {
    const int dim = static_cast<int>(s.energies.size());
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(dim, dim);
    for (int j = 0; j < dim; ++j) u(j, j) = std::polar(1.0, -s.energies[j] * t / hbar);
    return u;
}

// Quartic operator in the rotating frame of the quadratic part; the level
// spacing is uniform, so only the index difference enters the phase.
Eigen::MatrixXcd rotated_x4(const LadderSetup& s, double time) {
    const int dim = static_cast<int>(s.energies.size());
    Eigen::MatrixXcd out(dim, dim);
    for (int j = 0; j < dim; ++j)
        for (int k = 0; k < dim; ++k)
            out(j, k) = std::polar(s.x4(j, k), s.w * time * static_cast<double>(j - k));
    return out;
}

// Nested time-ordered integrals I1 = int_0^t A, I2 = int_0^t A(s) int_0^s A,
// both by trapezoid on a uniform grid with the later time on the left.
struct NestedIntegrals {
    Eigen::MatrixXcd i1, i2;
};

NestedIntegrals nested_integrals(const LadderSetup& s, double t, int n_time) {
    if (n_time < 8) throw std::invalid_argument("perturbation: n_time must be >= 8");
    const int dim = static_cast<int>(s.energies.size());
    const double h = t / static_cast<double>(n_time);

    NestedIntegrals out;
    out.i1 = Eigen::MatrixXcd::Zero(dim, dim);
    out.i2 = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::MatrixXcd inner = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::MatrixXcd prev_cur = Eigen::MatrixXcd::Zero(dim, dim);

    Eigen::MatrixXcd x_prev = rotated_x4(s, 0.0);
    out.i1 = (h / 2.0) * x_prev;
    for (int i = 1; i <= n_time; ++i) {
        const Eigen::MatrixXcd x_cur = rotated_x4(s, h * static_cast<double>(i));
        out.i1 += (i == n_time ? h / 2.0 : h) * x_cur;
        inner += (h / 2.0) * (x_prev + x_cur);
        const Eigen::MatrixXcd cur = x_cur * inner;
        out.i2 += (h / 2.0) * (prev_cur + cur);
        prev_cur = cur;
        x_prev = x_cur;
    }
    return out;
}

std::vector<Eigen::MatrixXcd> expansion_terms(const LadderSetup& s, double t, double hbar,
                                              int max_order, int n_time) {
    if (max_order < 0 || max_order > 2)
        throw std::invalid_argument("perturbation: orders 0 through 2 are implemented");
    if (!(t >= 0.0)) throw std::invalid_argument("perturbation: t must be non-negative");

    const Eigen::MatrixXcd u0 = quadratic_propagator(s, t, hbar);
    std::vector<Eigen::MatrixXcd> terms;
    terms.push_back(u0);
    if (max_order >= 1) {
        const auto nested = nested_integrals(s, t, n_time);
        const complex c(0.0, -s.lam / (4.0 * hbar));
        terms.push_back(u0 * (c * nested.i1));
        if (max_order >= 2) terms.push_back(u0 * ((c * c) * nested.i2));
    }
    return terms;
}

double column_rms(const Eigen::MatrixXcd& diff, int lead_cols) {
    const int cols = lead_cols > 0 ? lead_cols : static_cast<int>(diff.cols());
    return diff.leftCols(cols).norm() / std::sqrt(static_cast<double>(cols));
}

}  // namespace

Eigen::MatrixXcd u_exact(const ModelParams& params, int dim, double t) {
    const auto s = make_setup(params, dim);
    Eigen::MatrixXd h = (s.lam / 4.0) * s.x4;
    h += s.energies.asDiagonal();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("u_exact: eigensolver failed");
    const Eigen::MatrixXd& v = eig.eigenvectors();
    Eigen::VectorXcd phases(dim);
    for (int j = 0; j < dim; ++j)
        phases[j] = std::polar(1.0, -eig.eigenvalues()[j] * t / params.hbar);
    return v * phases.asDiagonal() * v.transpose();
}

Eigen::MatrixXcd dyson_term(const ModelParams& params, int dim, double t, int order,
                            int n_time) {
    const auto s = make_setup(params, dim);
    return expansion_terms(s, t, params.hbar, order, n_time).back();
}

Eigen::MatrixXcd dyson_sum(const ModelParams& params, int dim, double t, int max_order,
                           int n_time) {
    const auto s = make_setup(params, dim);
    const auto terms = expansion_terms(s, t, params.hbar, max_order, n_time);
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(dim, dim);
    for (const auto& term : terms) acc += term;
    return acc;
}

ResidualScaling residual_scaling(const ModelParams& params, int dim, double t,
                                 const std::vector<double>& lambdas, int max_order,
                                 int lead_cols, int n_time) {
    if (lambdas.size() < 2)
        throw std::invalid_argument("residual_scaling: need at least two couplings");
    for (double lam : lambdas)
        if (!(lam > 0.0))
            throw std::invalid_argument("residual_scaling: couplings must be positive");
    if (lead_cols < 0 || lead_cols > dim)
        throw std::invalid_argument("residual_scaling: lead_cols out of range");

    // The nested integrals do not depend on the coupling; only the exact
    // propagator and the term prefactors do.
    ModelParams base = params;
    base.lambda = Schedule::constant(lambdas.front());
    const auto s = make_setup(base, dim);
    const Eigen::MatrixXcd u0 = quadratic_propagator(s, t, base.hbar);
    const auto nested = nested_integrals(s, t, n_time);

    ResidualScaling out;
    out.lambdas = lambdas;
    out.residuals.assign(static_cast<std::size_t>(max_order) + 1, {});

    for (double lam : lambdas) {
        ModelParams cur = params;
        cur.lambda = Schedule::constant(lam);
        const Eigen::MatrixXcd ue = u_exact(cur, dim, t);
        const complex c(0.0, -lam / (4.0 * base.hbar));
        Eigen::MatrixXcd acc = u0;
        for (int order = 0; order <= max_order; ++order) {
            if (order == 1) acc += u0 * (c * nested.i1);
            if (order == 2) acc += u0 * ((c * c) * nested.i2);
            out.residuals[static_cast<std::size_t>(order)].push_back(
                column_rms(ue - acc, lead_cols));
        }
    }

    // Least-squares slope of log residual against log coupling.
    const std::size_t n = lambdas.size();
    double mean_x = 0.0;
    std::vector<double> lx(n);
    for (std::size_t i = 0; i < n; ++i) {
        lx[i] = std::log(lambdas[i]);
        mean_x += lx[i];
    }
    mean_x /= static_cast<double>(n);
    for (int order = 0; order <= max_order; ++order) {
        const auto& res = out.residuals[static_cast<std::size_t>(order)];
        double mean_y = 0.0;
        for (double r : res) mean_y += std::log(r);
        mean_y /= static_cast<double>(n);
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sxy += (lx[i] - mean_x) * (std::log(res[i]) - mean_y);
            sxx += (lx[i] - mean_x) * (lx[i] - mean_x);
        }
        out.slopes.push_back(sxy / sxx);
    }
    return out;
}

}  // namespace qosc
