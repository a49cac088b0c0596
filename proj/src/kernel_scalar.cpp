#include "kernel_common.hpp"

#include "qosc/rng.hpp"

namespace qosc::kern {

StepTable build_step_table(const ModelParams& params, double dt, long n_steps) {
    params.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("build_step_table: dt must be positive");
    if (n_steps < 0) throw std::invalid_argument("build_step_table: n_steps must be >= 0");
    StepTable table;
    table.dt = dt;
    table.om2.resize(n_steps);
    table.kick.resize(n_steps);
    for (long k = 0; k < n_steps; ++k) {
        const double t = dt * static_cast<double>(k);
        table.om2[k] = params.omega_sq(t);
        table.kick[k] = std::sqrt(params.lambda_at(t) * params.hbar * dt);
    }
    return table;
}

void PairBatch::init(long n_lanes, double inv_sigma_sq) {
    n = n_lanes;
    auto fill = [n_lanes](std::vector<double>& v, double value) {
        v.assign(n_lanes, value);
    };
    fill(afr, inv_sigma_sq); fill(afi, 0.0);
    fill(bfr, inv_sigma_sq); fill(bfi, 0.0);
    fill(gfr, inv_sigma_sq); fill(gfi, 0.0);
    fill(abr, inv_sigma_sq); fill(abi, 0.0);
    fill(bbr, inv_sigma_sq); fill(bbi, 0.0);
    fill(gbr, inv_sigma_sq); fill(gbi, 0.0);
    alive.assign(n_lanes, 1);
    t_gamma.assign(n_lanes, 0.0);
    blow_step.assign(n_lanes, -1);
}

void PairRoots::init(long n_lanes, double sigma) {
    const double inv_sigma = 1.0 / sigma;
    const double h = std::sqrt(0.5);
    rxf.assign(n_lanes, complex(inv_sigma, 0.0));
    rxb.assign(n_lanes, complex(inv_sigma, 0.0));
    rpf.assign(n_lanes, complex(h, -h));  // sqrt(-i beta/gamma) at t=0
    rpb.assign(n_lanes, complex(h, h));
}

void run_pairs_scalar(PairBatch& b, PairRoots& roots, const PairRunConfig& cfg,
                      const PairSink& sink) {
    const StepTable& table = *cfg.table;
    const double dt = table.dt;
    const double m = cfg.m;
    const double inv_m = 1.0 / m;
    std::vector<rng::Xoshiro256pp> gen_f, gen_b;
    gen_f.reserve(b.n);
    gen_b.reserve(b.n);
    for (long l = 0; l < b.n; ++l) {
        const std::uint64_t pair_id = static_cast<std::uint64_t>(cfg.first_pair + l);
        gen_f.emplace_back(cfg.seed, 2 * pair_id);
        gen_b.emplace_back(cfg.seed, 2 * pair_id + 1);
    }

    drive_pairs(b, roots, cfg, sink, [&](long k) {
        const double om2 = table.om2[k];
        const double kick = table.kick[k];
        for (long l = 0; l < b.n; ++l) {
            if (!b.alive[l]) continue;
            const double z = rng::normal(gen_f[l]);
            const double zb = rng::normal(gen_b[l]);
            step_forward(b.afr[l], b.afi[l], b.bfr[l], b.bfi[l], b.gfr[l], b.gfi[l],
                         om2, kick, z, dt, m, inv_m);
            step_backward(b.abr[l], b.abi[l], b.bbr[l], b.bbi[l], b.gbr[l], b.gbi[l],
                          om2, kick, zb, dt, m, inv_m);
            if (!gamma_healthy(b.gfr[l], b.gfi[l], b.gbr[l], b.gbi[l])) {
                b.alive[l] = 0;
                b.blow_step[l] = k + 1;
                b.t_gamma[l] = dt * static_cast<double>(k + 1);
            }
        }
    });
}

FirstPassage run_first_passage(const StepTable& table, double m, std::uint64_t seed,
                               long first_index, long n_traj, double inv_sigma_sq) {
    const long n_steps = table.n_steps();
    const double dt = table.dt;
    const double inv_m = 1.0 / m;
    FirstPassage out;
    out.t_exit.assign(n_traj, dt * static_cast<double>(n_steps));
    out.crossed.assign(n_traj, 0);
    for (long j = 0; j < n_traj; ++j) {
        rng::Xoshiro256pp gen(seed, static_cast<std::uint64_t>(first_index + j));
        double gr = inv_sigma_sq, gi = 0.0;
        for (long k = 0; k < n_steps; ++k) {
            const double z = rng::normal(gen);
            step_gamma_forward(gr, gi, table.om2[k], table.kick[k], z, dt, m, inv_m);
            if (!(gr > 0.0) || !std::isfinite(gr) || !std::isfinite(gi)) {
                out.crossed[j] = 1;
                out.t_exit[j] = dt * static_cast<double>(k + 1);
                break;
            }
        }
    }
    return out;
}

void XiBatch::init(long n_lanes) {
    n = n_lanes;
    pr.assign(n_lanes, 0.0); pi.assign(n_lanes, 0.0);
    zr.assign(n_lanes, 0.0); zi.assign(n_lanes, 0.0);
    er.assign(n_lanes, 1.0); ei.assign(n_lanes, 0.0);
    mr.assign(n_lanes, 0.0); mi.assign(n_lanes, 0.0);
    alive.assign(n_lanes, 1);
}

void XiRoots::init(long n_lanes) {
    rm.assign(n_lanes, complex(0.0, 0.0));
    seeded.assign(n_lanes, 0);
}

void run_xi_scalar(XiBatch& b, XiRoots& roots, const XiRunConfig& cfg, const XiSink& sink) {
    const StepTable& table = *cfg.table;
    const long n_steps = table.n_steps();
    const double dt = table.dt;
    const double m = cfg.m;
    const double inv_m = 1.0 / m;
    std::vector<rng::Xoshiro256pp> gen;
    gen.reserve(b.n);
    for (long l = 0; l < b.n; ++l)
        gen.emplace_back(cfg.seed, static_cast<std::uint64_t>(cfg.first_traj + l));

    static const std::vector<long> no_samples;
    const std::vector<long>& samples = cfg.sample_steps ? *cfg.sample_steps : no_samples;
    std::size_t si = 0;
    while (si < samples.size() && samples[si] == 0) {
        for (long l = 0; l < b.n; ++l) sink(l, static_cast<long>(si));
        ++si;
    }
    auto refresh = [&](long l) {
        const complex target(-b.mr[l], -b.mi[l]);
        if (!roots.seeded[l]) {
            roots.rm[l] = std::sqrt(target);
            roots.seeded[l] = 1;
        } else {
            roots.rm[l] = tracked_sqrt(target, roots.rm[l]);
        }
    };
    for (long k = 0; k < n_steps; ++k) {
        const double om2 = table.om2[k];
        const double kick = table.kick[k];
        for (long l = 0; l < b.n; ++l) {
            if (!b.alive[l]) continue;
            const double z = rng::normal(gen[l]);
            step_xi_lane(b.pr[l], b.pi[l], b.zr[l], b.zi[l], b.er[l], b.ei[l], b.mr[l],
                         b.mi[l], om2, kick, z, dt, m, inv_m);
            if (!std::isfinite(b.pr[l]) || !std::isfinite(b.er[l]) || !std::isfinite(b.mr[l]))
                b.alive[l] = 0;
        }
        const long s = k + 1;
        const bool sampling = si < samples.size() && samples[si] == s;
        if (sampling || s % cfg.cadence == 0)
            for (long l = 0; l < b.n; ++l)
                if (b.alive[l]) refresh(l);
        while (si < samples.size() && samples[si] == s) {
            for (long l = 0; l < b.n; ++l) sink(l, static_cast<long>(si));
            ++si;
        }
    }
}

}  // namespace qosc::kern
