#include "qosc/observables.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include "qosc/kernels.hpp"
#include "qosc/rng.hpp"

namespace qosc {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
// Censoring resolution of the closed-form wide-mass sampler.
constexpr double kCommutingStep = 5e-3;

const complex kIPow[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};

// Streaming mean/variance accumulator with order-independent merge.
struct Accum {
    long n = 0;
    double mre = 0.0, mim = 0.0;
    double m2re = 0.0, m2im = 0.0;

    void add(complex x) {
        ++n;
        const double dre = x.real() - mre;
        const double dim = x.imag() - mim;
        mre += dre / static_cast<double>(n);
        mim += dim / static_cast<double>(n);
        m2re += dre * (x.real() - mre);
        m2im += dim * (x.imag() - mim);
    }

    void merge(const Accum& o) {
        if (o.n == 0) return;
        if (n == 0) { *this = o; return; }
        const double nn = static_cast<double>(n) * o.n / static_cast<double>(n + o.n);
        const double dre = o.mre - mre;
        const double dim = o.mim - mim;
        m2re += o.m2re + dre * dre * nn;
        m2im += o.m2im + dim * dim * nn;
        mre += dre * static_cast<double>(o.n) / static_cast<double>(n + o.n);
        mim += dim * static_cast<double>(o.n) / static_cast<double>(n + o.n);
        n += o.n;
    }

    MomentEstimate finalize(long n_excluded) const {
        MomentEstimate e;
        e.value = complex(mre, mim);
        if (n > 1) {
            const double denom = static_cast<double>(n) * static_cast<double>(n - 1);
            e.std_error = std::sqrt(m2re / denom);
            e.std_error_imag = std::sqrt(m2im / denom);
        }
        e.n_used = n;
        e.n_excluded = n_excluded;
        return e;
    }
};

complex sample_core(complex alpha_f, complex beta_f, complex gamma_f, complex alpha_b,
                    complex beta_b, complex gamma_b, const GaussianPacket& packet,
                    int order, complex root_product) {
    const double s2 = packet.sigma * packet.sigma;
    const complex mu = packet.mu();
    const complex muc = std::conj(mu);
    const complex big_gamma = gamma_f + gamma_b;
    const complex delta = mu * beta_f - muc * beta_b;
    const complex quad = mu * mu * alpha_f + muc * muc * alpha_b;
    const complex rg = std::sqrt(2.0 * big_gamma);
    complex rg_pow = rg;
    for (int i = 0; i < order; ++i) rg_pow *= rg;
    const complex h = hermite(order, s2 * delta / rg);
    const complex expo =
        std::exp(-s2 * packet.k * packet.k +
                 0.5 * s2 * s2 * (quad - delta * delta / big_gamma));
    return 2.0 * packet.sigma * kIPow[order & 3] * root_product / rg_pow * h * expo;
}

// Momentum moments go through the Fourier-side triple.
void momentum_variables(const AbgState& st, bool backward, complex& alpha, complex& beta,
                        complex& gamma) {
    const complex i_unit = backward ? complex(0.0, 1.0) : complex(0.0, -1.0);
    gamma = 1.0 / st.gamma;
    beta = i_unit * st.beta / st.gamma;
    alpha = st.alpha - st.beta * st.beta / st.gamma;
}

complex sample_which(const AbgState& fwd, const AbgState& bwd, const GaussianPacket& packet,
                     int order, Which which, complex root_product) {
    if (which == Which::position)
        return sample_core(fwd.alpha, fwd.beta, fwd.gamma, bwd.alpha, bwd.beta, bwd.gamma,
                           packet, order, root_product);
    complex af, bf, gf, ab, bb, gb;
    momentum_variables(fwd, false, af, bf, gf);
    momentum_variables(bwd, true, ab, bb, gb);
    return sample_core(af, bf, gf, ab, bb, gb, packet, order, root_product);
}

void validate_requests(const std::vector<MomentRequest>& requests) {
    for (const auto& r : requests)
        if (r.order < 0 || r.order > 16)
            throw std::invalid_argument("estimate_moments: order must be in [0, 16]");
}

std::vector<long> snap_times(const std::vector<double>& t_grid, double dt) {
    std::vector<long> steps;
    steps.reserve(t_grid.size());
    double prev = 0.0;
    for (double t : t_grid) {
        if (t < 0.0 || t < prev)
            throw std::invalid_argument("sample times must be sorted and non-negative");
        prev = t;
        const long k = std::llround(t / dt);
        if (std::abs(static_cast<double>(k) * dt - t) > 1e-9 * std::max(1.0, t))
            throw std::invalid_argument("sample time is not a multiple of dt");
        steps.push_back(k);
    }
    return steps;
}

void for_each_block(long n_blocks, int n_threads, const std::function<void(long)>& work) {
    if (n_threads <= 1) {
        for (long b = 0; b < n_blocks; ++b) work(b);
        return;
    }
    std::atomic<long> next{0};
    auto drain = [&] {
        for (;;) {
            const long b = next.fetch_add(1);
            if (b >= n_blocks) return;
            work(b);
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(drain);
    for (auto& th : pool) th.join();
}

constexpr long kBlock = 1024;

struct EnginePartials {
    std::vector<std::vector<std::vector<Accum>>> acc;  // [block][request][time]
    std::vector<std::vector<long>> excl;               // [block][time]

    EnginePartials(long n_blocks, std::size_t n_req, std::size_t n_t)
        : acc(n_blocks, std::vector<std::vector<Accum>>(n_req, std::vector<Accum>(n_t))),
          excl(n_blocks, std::vector<long>(n_t, 0)) {}

    std::vector<std::vector<MomentEstimate>> reduce() const {
        const std::size_t n_req = acc.empty() ? 0 : acc[0].size();
        const std::size_t n_t = acc.empty() ? 0 : (n_req ? acc[0][0].size() : 0);
        std::vector<long> ex(n_t, 0);
        for (const auto& e : excl)
            for (std::size_t i = 0; i < n_t; ++i) ex[i] += e[i];
        std::vector<std::vector<MomentEstimate>> out(n_req,
                                                     std::vector<MomentEstimate>(n_t));
        for (std::size_t r = 0; r < n_req; ++r)
            for (std::size_t i = 0; i < n_t; ++i) {
                Accum g;
                for (const auto& blk : acc) g.merge(blk[r][i]);
                out[r][i] = g.finalize(ex[i]);
            }
        return out;
    }
};

std::vector<double> hbar_powers(double hbar, const std::vector<MomentRequest>& requests) {
    int top = 0;
    for (const auto& r : requests) top = std::max(top, r.order);
    std::vector<double> pw(top + 1, 1.0);
    for (int i = 1; i <= top; ++i) pw[i] = pw[i - 1] * hbar;
    return pw;
}

std::vector<std::vector<MomentEstimate>> kernel_engine(
    const ModelParams& params, const GaussianPacket& packet,
    const std::vector<MomentRequest>& requests, const std::vector<double>& t_grid,
    const MCConfig& cfg) {
    const std::vector<long> steps = snap_times(t_grid, cfg.dt);
    const long n_steps = steps.empty() ? 0 : steps.back();
    const kern::StepTable table = kern::build_step_table(params, cfg.dt, n_steps);
    const long n_blocks = (cfg.n_traj + kBlock - 1) / kBlock;
    EnginePartials partials(n_blocks, requests.size(), t_grid.size());
    const std::vector<double> hpow = hbar_powers(params.hbar, requests);
    const double inv_s2 = 1.0 / (packet.sigma * packet.sigma);
    const kern::PairKernelFn kernel = kern::pair_kernel();

    for_each_block(n_blocks, cfg.n_threads, [&](long bidx) {
        const long lo = bidx * kBlock;
        const long bn = std::min(kBlock, cfg.n_traj - lo);
        kern::PairBatch batch;
        batch.init(bn, inv_s2);
        kern::PairRoots roots;
        roots.init(bn, packet.sigma);
        kern::PairRunConfig kcfg;
        kcfg.table = &table;
        kcfg.m = params.m;
        kcfg.seed = cfg.seed;
        kcfg.first_pair = lo;
        kcfg.sample_steps = &steps;
        kernel(batch, roots, kcfg, [&](long lane, long ordinal) {
            if (!batch.alive[lane]) {
                ++partials.excl[bidx][ordinal];
                return;
            }
            AbgState fwd, bwd;
            fwd.alpha = complex(batch.afr[lane], batch.afi[lane]);
            fwd.beta = complex(batch.bfr[lane], batch.bfi[lane]);
            fwd.gamma = complex(batch.gfr[lane], batch.gfi[lane]);
            bwd.alpha = complex(batch.abr[lane], batch.abi[lane]);
            bwd.beta = complex(batch.bbr[lane], batch.bbi[lane]);
            bwd.gamma = complex(batch.gbr[lane], batch.gbi[lane]);
            const complex rx = roots.rxf[lane] * roots.rxb[lane];
            const complex rp = roots.rpf[lane] * roots.rpb[lane];
            for (std::size_t r = 0; r < requests.size(); ++r) {
                const MomentRequest& rq = requests[r];
                complex s = sample_which(fwd, bwd, packet, rq.order, rq.which,
                                         rq.which == Which::position ? rx : rp);
                if (rq.which == Which::momentum) s *= hpow[rq.order];
                partials.acc[bidx][r][ordinal].add(s);
            }
        });
    });
    return partials.reduce();
}

struct CommutingPlan {
    std::vector<double> w_sd;   // std dev of the W increment per substep
    std::vector<double> drive;  // m * integral of omega^2 up to substep end
    std::vector<std::size_t> sample_sub;
};

CommutingPlan build_commuting_plan(const ModelParams& params,
                                   const std::vector<double>& t_grid) {
    CommutingPlan plan;
    double t_cur = 0.0, drive_acc = 0.0, prev = 0.0;
    for (double t : t_grid) {
        if (t < 0.0 || t < prev)
            throw std::invalid_argument("sample times must be sorted and non-negative");
        prev = t;
        const double seg = t - t_cur;
        if (seg > 0.0) {
            const long ns = static_cast<long>(std::ceil(seg / kCommutingStep - 1e-12));
            for (long s = 0; s < ns; ++s) {
                const double a = t_cur + seg * static_cast<double>(s) / ns;
                const double b = t_cur + seg * static_cast<double>(s + 1) / ns;
                const double mid = 0.5 * (a + b);
                const double h = b - a;
                const double lam =
                    (h / 6.0) * (params.lambda_at(a) + 4.0 * params.lambda_at(mid) +
                                 params.lambda_at(b));
                plan.w_sd.push_back(std::sqrt(0.5 * params.hbar * lam));
                drive_acc += params.m * (h / 6.0) *
                             (params.omega_sq(a) + 4.0 * params.omega_sq(mid) +
                              params.omega_sq(b));
                plan.drive.push_back(drive_acc);
            }
            t_cur = t;
        }
        plan.sample_sub.push_back(plan.w_sd.size());
    }
    return plan;
}

std::vector<std::vector<MomentEstimate>> commuting_engine(
    const ModelParams& params, const GaussianPacket& packet,
    const std::vector<MomentRequest>& requests, const std::vector<double>& t_grid,
    const MCConfig& cfg) {
    const CommutingPlan plan = build_commuting_plan(params, t_grid);
    const long n_blocks = (cfg.n_traj + kBlock - 1) / kBlock;
    EnginePartials partials(n_blocks, requests.size(), t_grid.size());
    const std::vector<double> hpow = hbar_powers(params.hbar, requests);
    const double inv_s2 = 1.0 / (packet.sigma * packet.sigma);
    const std::size_t n_t = t_grid.size();

    for_each_block(n_blocks, cfg.n_threads, [&](long bidx) {
        const long lo = bidx * kBlock;
        const long bn = std::min(kBlock, cfg.n_traj - lo);
        for (long l = 0; l < bn; ++l) {
            const std::uint64_t pair_id = static_cast<std::uint64_t>(lo + l);
            rng::Xoshiro256pp gf(cfg.seed, 2 * pair_id);
            rng::Xoshiro256pp gb(cfg.seed, 2 * pair_id + 1);
            double wf = 0.0, wb = 0.0;
            bool alive = true;
            std::size_t sub = 0;
            for (std::size_t i = 0; i < n_t; ++i) {
                while (sub < plan.sample_sub[i] && alive) {
                    wf += plan.w_sd[sub] * rng::normal(gf);
                    wb += plan.w_sd[sub] * rng::normal(gb);
                    // Pair censoring mirrors the stepping kernel: both real
                    // parts of gamma must stay positive.
                    if (!(inv_s2 - kSqrt2 * wf > 0.0) || !(inv_s2 - kSqrt2 * wb > 0.0))
                        alive = false;
                    ++sub;
                }
                if (!alive) {
                    for (std::size_t ii = i; ii < n_t; ++ii) ++partials.excl[bidx][ii];
                    break;
                }
                const double drive = sub > 0 ? plan.drive[sub - 1] : 0.0;
                AbgState fwd, bwd;
                fwd.alpha = fwd.beta = complex(inv_s2, 0.0);
                bwd.alpha = bwd.beta = complex(inv_s2, 0.0);
                fwd.gamma = complex(inv_s2 - kSqrt2 * wf, kSqrt2 * wf + drive);
                bwd.gamma = complex(inv_s2 - kSqrt2 * wb, -(kSqrt2 * wb + drive));
                // With Re gamma kept positive the momentum-root argument
                // never reaches the principal cut, so no tracking is needed.
                const complex rx(inv_s2, 0.0);
                const complex rp = std::sqrt(complex(0.0, -inv_s2) / fwd.gamma) *
                                   std::sqrt(complex(0.0, inv_s2) / bwd.gamma);
                for (std::size_t r = 0; r < requests.size(); ++r) {
                    const MomentRequest& rq = requests[r];
                    complex s = sample_which(fwd, bwd, packet, rq.order, rq.which,
                                             rq.which == Which::position ? rx : rp);
                    if (rq.which == Which::momentum) s *= hpow[rq.order];
                    partials.acc[bidx][r][i].add(s);
                }
            }
        }
    });
    return partials.reduce();
}

}  // namespace

complex hermite(int n, complex x) {
    if (n < 0) throw std::invalid_argument("hermite: order must be non-negative");
    if (n == 0) return {1.0, 0.0};
    complex h0(1.0, 0.0), h1 = 2.0 * x;
    for (int k = 1; k < n; ++k) {
        const complex h2 = 2.0 * x * h1 - 2.0 * static_cast<double>(k) * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

complex moment_sample(const AbgState& fwd, const AbgState& bwd, const GaussianPacket& packet,
                      int order, Which which, complex root_product) {
    packet.validate();
    if (order < 0) throw std::invalid_argument("moment_sample: order must be non-negative");
    return sample_which(fwd, bwd, packet, order, which, root_product);
}

complex moment_sample(const AbgState& fwd, const AbgState& bwd, const GaussianPacket& packet,
                      int order, Which which) {
    complex root;
    if (which == Which::position) {
        root = std::sqrt(fwd.beta) * std::sqrt(bwd.beta);
    } else {
        root = std::sqrt(complex(0.0, -1.0) * fwd.beta / fwd.gamma) *
               std::sqrt(complex(0.0, 1.0) * bwd.beta / bwd.gamma);
    }
    return moment_sample(fwd, bwd, packet, order, which, root);
}

std::vector<std::vector<MomentEstimate>> estimate_moments(
    const ModelParams& params, const GaussianPacket& packet,
    const std::vector<MomentRequest>& requests, const std::vector<double>& t_grid,
    const MCConfig& cfg) {
    params.validate();
    packet.validate();
    validate_requests(requests);
    if (cfg.n_traj < 1)
        throw std::invalid_argument("estimate_moments: n_traj must be positive");
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("estimate_moments: dt must be positive");
    if (requests.empty() || t_grid.empty())
        return std::vector<std::vector<MomentEstimate>>(
            requests.size(), std::vector<MomentEstimate>(t_grid.size()));
    return cfg.commuting ? commuting_engine(params, packet, requests, t_grid, cfg)
                         : kernel_engine(params, packet, requests, t_grid, cfg);
}

double harmonic_moment(const ModelParams& params, const GaussianPacket& packet, double t,
                       int order, Which which) {
    params.validate();
    packet.validate();
    if (order < 0) throw std::invalid_argument("harmonic_moment: order must be non-negative");
    if (!params.lambda.is_constant() || params.lambda(0.0) != 0.0)
        throw std::invalid_argument("harmonic_moment: requires lambda identically zero");
    if (!params.omega_sq.is_constant())
        throw std::invalid_argument("harmonic_moment: requires constant omega^2");
    const double w2 = params.omega_sq(0.0);
    if (!(w2 > 0.0)) throw std::domain_error("harmonic_moment: requires omega^2 > 0");
    const double w = std::sqrt(w2);
    const double c = std::cos(w * t), s = std::sin(w * t);
    const double hb = params.hbar, m = params.m;
    const double s2 = packet.sigma * packet.sigma;
    double mean, var;
    if (which == Which::position) {
        mean = packet.a * c + hb * packet.k / (m * w) * s;
        var = 0.5 * s2 * c * c + 0.5 * hb * hb / (s2 * m * m * w2) * s * s;
    } else {
        mean = hb * packet.k * c - m * w * packet.a * s;
        var = 0.5 * hb * hb / s2 * c * c + 0.5 * m * m * w2 * s2 * s * s;
    }
    if (order == 0) return 1.0;
    const complex arg = complex(0.0, 1.0) * mean / std::sqrt(2.0 * var);
    const complex val = std::pow(std::sqrt(0.5 * var), order) *
                        kIPow[(4 - (order & 3)) & 3] * hermite(order, arg);
    return val.real();
}

complex propagator_sample(const XiState& xi, complex minus_xi_minus_root, double x,
                          double x0, double hbar) {
    const complex pref =
        std::exp(xi.xi_z / 4.0) / (std::sqrt(2.0 * M_PI * hbar) * minus_xi_minus_root);
    const complex shifted = std::exp(0.5 * xi.xi_z) * x - x0;
    const complex expo =
        xi.xi_plus * x * x / (2.0 * hbar) + shifted * shifted / (2.0 * hbar * xi.xi_minus);
    return pref * std::exp(expo);
}

complex propagator_sample(const XiState& xi, double x, double x0, double hbar) {
    return propagator_sample(xi, std::sqrt(-xi.xi_minus), x, x0, hbar);
}

MomentEstimate estimate_propagator(const ModelParams& params, double x, double x0, double t,
                                   const MCConfig& cfg) {
    params.validate();
    if (cfg.n_traj < 1)
        throw std::invalid_argument("estimate_propagator: n_traj must be positive");
    if (!(cfg.dt > 0.0))
        throw std::invalid_argument("estimate_propagator: dt must be positive");
    const long n_steps = std::llround(t / cfg.dt);
    if (n_steps < 1 || std::abs(static_cast<double>(n_steps) * cfg.dt - t) >
                           1e-9 * std::max(1.0, t))
        throw std::invalid_argument("estimate_propagator: t must be a positive multiple of dt");
    const kern::StepTable table = kern::build_step_table(params, cfg.dt, n_steps);
    const std::vector<long> steps{n_steps};
    const long n_blocks = (cfg.n_traj + kBlock - 1) / kBlock;
    EnginePartials partials(n_blocks, 1, 1);

    for_each_block(n_blocks, cfg.n_threads, [&](long bidx) {
        const long lo = bidx * kBlock;
        const long bn = std::min(kBlock, cfg.n_traj - lo);
        kern::XiBatch batch;
        batch.init(bn);
        kern::XiRoots roots;
        roots.init(bn);
        kern::XiRunConfig kcfg;
        kcfg.table = &table;
        kcfg.m = params.m;
        kcfg.seed = cfg.seed;
        kcfg.first_traj = lo;
        kcfg.sample_steps = &steps;
        kern::run_xi_scalar(batch, roots, kcfg, [&](long lane, long) {
            if (!batch.alive[lane]) {
                ++partials.excl[bidx][0];
                return;
            }
            XiState xi;
            xi.xi_plus = complex(batch.pr[lane], batch.pi[lane]);
            xi.xi_z = complex(batch.zr[lane], batch.zi[lane]);
            xi.xi_minus = complex(batch.mr[lane], batch.mi[lane]);
            xi.t = t;
            partials.acc[bidx][0][0].add(
                propagator_sample(xi, roots.rm[lane], x, x0, params.hbar));
        });
    });
    return partials.reduce()[0][0];
}

complex harmonic_propagator(const ModelParams& params, double x, double x0, double t) {
    params.validate();
    if (!params.lambda.is_constant() || params.lambda(0.0) != 0.0)
        throw std::invalid_argument("harmonic_propagator: requires lambda identically zero");
    if (!params.omega_sq.is_constant())
        throw std::invalid_argument("harmonic_propagator: requires constant omega^2");
    const double w2 = params.omega_sq(0.0);
    if (!(w2 > 0.0)) throw std::domain_error("harmonic_propagator: requires omega^2 > 0");
    const double w = std::sqrt(w2);
    if (!(t > 0.0) || !(w * t < M_PI))
        throw std::domain_error("harmonic_propagator: t must lie in (0, pi/omega)");
    const double s = std::sin(w * t), c = std::cos(w * t);
    const double hb = params.hbar, m = params.m;
    const double amp = std::sqrt(m * w / (2.0 * M_PI * hb * s));
    const complex phase = std::exp(complex(0.0, -M_PI / 4.0));
    const complex expo(0.0, m * w * ((x * x + x0 * x0) * c - 2.0 * x * x0) / (2.0 * hb * s));
    return amp * phase * std::exp(expo);
}

}  // namespace qosc
