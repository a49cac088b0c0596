#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "qosc/kernels.hpp"
#include "qosc/rng.hpp"

#include "kernel_common.hpp"

using namespace qosc;
using namespace qosc::kern;

namespace {

struct Trace {
    std::vector<long> meta;
    std::vector<double> values;

    void record(const PairBatch& b, const PairRoots& r, long lane, long ordinal) {
        meta.push_back(lane);
        meta.push_back(ordinal);
        for (const auto* v : {&b.afr, &b.afi, &b.bfr, &b.bfi, &b.gfr, &b.gfi,
                              &b.abr, &b.abi, &b.bbr, &b.bbi, &b.gbr, &b.gbi})
            values.push_back((*v)[lane]);
        for (const auto* v : {&r.rxf, &r.rxb, &r.rpf, &r.rpb}) {
            values.push_back((*v)[lane].real());
            values.push_back((*v)[lane].imag());
        }
    }
};

struct RunResult {
    PairBatch batch;
    PairRoots roots;
    Trace trace;
};

RunResult run_with(PairKernelFn kernel, const StepTable& table, double m, long n_lanes,
                   std::uint64_t seed, const std::vector<long>& samples) {
    RunResult r;
    r.batch.init(n_lanes, 1.0);
    r.roots.init(n_lanes, 1.0);
    PairRunConfig cfg;
    cfg.table = &table;
    cfg.m = m;
    cfg.seed = seed;
    cfg.first_pair = 0;
    cfg.sample_steps = &samples;
    kernel(r.batch, r.roots, cfg, [&](long lane, long ordinal) {
        r.trace.record(r.batch, r.roots, lane, ordinal);
    });
    return r;
}

long compare_runs(const RunResult& a, const RunResult& c) {
    CHECK(a.batch.afr == c.batch.afr);
    CHECK(a.batch.afi == c.batch.afi);
    CHECK(a.batch.bfr == c.batch.bfr);
    CHECK(a.batch.bfi == c.batch.bfi);
    CHECK(a.batch.gfr == c.batch.gfr);
    CHECK(a.batch.gfi == c.batch.gfi);
    CHECK(a.batch.abr == c.batch.abr);
    CHECK(a.batch.abi == c.batch.abi);
    CHECK(a.batch.bbr == c.batch.bbr);
    CHECK(a.batch.bbi == c.batch.bbi);
    CHECK(a.batch.gbr == c.batch.gbr);
    CHECK(a.batch.gbi == c.batch.gbi);
    CHECK(a.batch.alive == c.batch.alive);
    CHECK(a.batch.blow_step == c.batch.blow_step);
    CHECK(a.batch.t_gamma == c.batch.t_gamma);
    CHECK(a.roots.rxf == c.roots.rxf);
    CHECK(a.roots.rxb == c.roots.rxb);
    CHECK(a.roots.rpf == c.roots.rpf);
    CHECK(a.roots.rpb == c.roots.rpb);
    CHECK(a.trace.meta == c.trace.meta);
    CHECK(a.trace.values == c.trace.values);
    long dead = 0;
    for (auto flag : a.batch.alive) dead += flag ? 0 : 1;
    return dead;
}

ModelParams quartic_params(double m, double om2, double lam) {
    ModelParams p;
    p.m = m;
    p.omega_sq = Schedule::constant(om2);
    p.lambda = Schedule::constant(lam);
    return p;
}

}  // namespace

TEST_CASE("vector kernel is bit-identical to the scalar kernel") {
    if (!avx2_kernel_available()) {
        MESSAGE("no AVX2 on this host, skipping");
        return;
    }
    // Strong coupling so a good fraction of lanes blows up mid-run: dead
    // lanes force the vector kernel through its mixed-group fallback.
    auto params = quartic_params(10.0, 1.0, 0.8);
    StepTable table = build_step_table(params, 2e-3, 10000);
    std::vector<long> samples{0, 1, 777, 4096, 10000};
    auto scalar = run_with(&run_pairs_scalar, table, 10.0, 10, 99, samples);
    auto vec = run_with(&run_pairs_avx2, table, 10.0, 10, 99, samples);
    const long dead = compare_runs(scalar, vec);
    CHECK(dead >= 1);
    CHECK(dead <= 9);
}

TEST_CASE("vector kernel matches on tail lanes and pulsed schedules") {
    if (!avx2_kernel_available()) {
        MESSAGE("no AVX2 on this host, skipping");
        return;
    }
    ModelParams params;
    params.m = 2.0;
    params.omega_sq = Schedule::sin_squared(1.5);
    params.lambda = Schedule::sin_squared(0.3);
    StepTable table = build_step_table(params, 1e-3, 1500);
    std::vector<long> samples{500, 1500};
    for (long n_lanes : {1, 3, 5, 8}) {
        auto scalar = run_with(&run_pairs_scalar, table, 2.0, n_lanes, 7, samples);
        auto vec = run_with(&run_pairs_avx2, table, 2.0, n_lanes, 7, samples);
        compare_runs(scalar, vec);
    }
}

TEST_CASE("backward step is the exact conjugate of the forward step") {
    rng::Xoshiro256pp gen(3, 0);
    double afr = 4, afi = 0, bfr = 4, bfi = 0, gfr = 4, gfi = 0;
    double abr = 4, abi = 0, bbr = 4, bbi = 0, gbr = 4, gbi = 0;
    const double dt = 5e-4, m = 10.0, inv_m = 0.1;
    for (long k = 0; k < 2000; ++k) {
        const double om2 = 1.0 + 0.3 * std::sin(0.01 * static_cast<double>(k));
        const double kick = std::sqrt(0.2 * dt);
        const double z = rng::normal(gen);
        step_forward(afr, afi, bfr, bfi, gfr, gfi, om2, kick, z, dt, m, inv_m);
        step_backward(abr, abi, bbr, bbi, gbr, gbi, om2, kick, z, dt, m, inv_m);
        CHECK(abr == afr);
        CHECK(abi == -afi);
        CHECK(bbr == bfr);
        CHECK(bbi == -bfi);
        CHECK(gbr == gfr);
        CHECK(gbi == -gfi);
    }
}

TEST_CASE("continuity-tracked square root follows the moving branch") {
    const complex prev(0.0, 1.0);
    const complex near_i = tracked_sqrt(complex(-1.0, 0.02), prev);
    CHECK(near_i.imag() > 0.9);
    const complex other = tracked_sqrt(complex(-1.0, 0.02), -prev);
    CHECK(other.imag() < -0.9);
    CHECK(std::abs(other + near_i) < 1e-15);
    // Principal branch when starting fresh from a positive value.
    CHECK(std::abs(tracked_sqrt(complex(4.0, 0.0), complex(2.0, 0.0)) -
                   complex(2.0, 0.0)) < 1e-15);
}

TEST_CASE("kernel dispatch is consistent with the capability probe") {
    const bool has = avx2_kernel_available();
    CHECK((pair_kernel() == &run_pairs_avx2) == has);
    CHECK((pair_kernel() == &run_pairs_scalar) == !has);
    CHECK(std::string(pair_kernel_name()) == (has ? "avx2" : "scalar"));
}
