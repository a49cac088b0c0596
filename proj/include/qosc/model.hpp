#pragma once

#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qosc {

using complex = std::complex<double>;

// Observable axis selector shared by the grid and Monte Carlo estimators.
enum class Which { position, momentum };

// Time-dependent real coefficient: constant, amplitude*sin^2(t), or a
// strictly increasing table with linear interpolation (evaluation outside
// the table is a domain error).
class Schedule {
  public:
    static Schedule constant(double c);
    static Schedule sin_squared(double amplitude);
    static Schedule tabulated(std::vector<double> times, std::vector<double> values);

    double operator()(double t) const;
    bool is_constant() const { return kind_ == Kind::Constant; }

  private:
    enum class Kind { Constant, SinSquared, Tabulated };
    Schedule(Kind k, double c) : kind_(k), c_(c) {}
    Kind kind_;
    double c_ = 0.0;
    std::vector<double> times_, values_;
};

inline double eval_schedule(const Schedule& s, double t) { return s(t); }

struct ModelParams {
    double m = 1.0;
    double hbar = 1.0;
    Schedule omega_sq = Schedule::constant(1.0);
    Schedule lambda = Schedule::constant(0.0);

    void validate() const {
        if (!(m > 0.0)) throw std::invalid_argument("ModelParams: m must be positive");
        if (!(hbar > 0.0)) throw std::invalid_argument("ModelParams: hbar must be positive");
    }

    // The quartic coupling must stay non-negative wherever it is sampled.
    double lambda_at(double t) const {
        double v = lambda(t);
        if (v < 0.0) throw std::domain_error("ModelParams: lambda(t) < 0");
        return v;
    }
};

// Initial Gaussian wavepacket: width sigma, mean position a, mean momentum k.
struct GaussianPacket {
    double sigma = 1.0;
    double a = 0.0;
    double k = 0.0;

    void validate() const {
        if (!(sigma > 0.0)) throw std::invalid_argument("GaussianPacket: sigma must be positive");
    }
    // Generalized initial momentum entering the moment formulas.
    complex mu() const { return {k, -a / (sigma * sigma)}; }
};

// Dense operator matrices in a truncated harmonic-oscillator eigenbasis.
// Truncation corrupts only the last two rows/columns of commutators.
struct OperatorSet {
    int dim = 0;
    Eigen::MatrixXcd x, p, s_plus, s_z, s_minus, h;
};

// basis_frequency fixes the oscillator length of the expansion basis;
// H is assembled with the schedules evaluated at t=0.
OperatorSet build_operators(int dim, const ModelParams& params, double basis_frequency);

// Scalar check of the quartic-to-quadratic Gaussian-integral identity:
// lhs = exp(-i tau lam x^4 / 4 hbar), rhs = the auxiliary-field integral
// evaluated by damped trapezoid quadrature, extrapolated to zero damping.
// Throws std::runtime_error when doubling n_quad still moves the result.
std::pair<complex, complex> hst_scalar_identity(double x, double tau, double lam,
                                                double cutoff, long n_quad,
                                                double hbar = 1.0);

// Same damped-quadrature estimate without the self-consistency gate;
// exposed for convergence studies.
complex hst_quadrature_estimate(double x, double tau, double lam, double cutoff,
                                long n_quad, double hbar = 1.0);

}  // namespace qosc
