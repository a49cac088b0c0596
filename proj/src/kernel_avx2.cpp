#include <immintrin.h>

#include "kernel_common.hpp"
#include "qosc/rng.hpp"

// Four-lane mirror of the scalar pair kernel. Every arithmetic operation
// matches kernel_common.hpp one for one, in the same association order, so
// results are bit-identical. Groups with a dead lane fall back to the
// scalar step functions; normals are always drawn per lane from that
// lane's own stream, so interleaving across lanes cannot change draws.

namespace qosc::kern {

namespace {

inline void step4_forward(double* par, double* pai, double* pbr, double* pbi,
                          double* pgr, double* pgi, __m256d z, __m256d dt,
                          __m256d inv_m, __m256d kick, __m256d m_om2, __m256d two) {
    const __m256d ar = _mm256_loadu_pd(par);
    const __m256d ai = _mm256_loadu_pd(pai);
    const __m256d br = _mm256_loadu_pd(pbr);
    const __m256d bi = _mm256_loadu_pd(pbi);
    const __m256d gr = _mm256_loadu_pd(pgr);
    const __m256d gi = _mm256_loadu_pd(pgi);
    const __m256d g2r = _mm256_sub_pd(_mm256_mul_pd(gr, gr), _mm256_mul_pd(gi, gi));
    const __m256d g2i = _mm256_mul_pd(_mm256_mul_pd(two, gr), gi);
    const __m256d bgr = _mm256_sub_pd(_mm256_mul_pd(br, gr), _mm256_mul_pd(bi, gi));
    const __m256d bgi = _mm256_add_pd(_mm256_mul_pd(br, gi), _mm256_mul_pd(bi, gr));
    const __m256d b2r = _mm256_sub_pd(_mm256_mul_pd(br, br), _mm256_mul_pd(bi, bi));
    const __m256d b2i = _mm256_mul_pd(_mm256_mul_pd(two, br), bi);
    const __m256d kz = _mm256_mul_pd(kick, z);
    const __m256d ngr = _mm256_sub_pd(
        _mm256_add_pd(gr, _mm256_mul_pd(dt, _mm256_mul_pd(g2i, inv_m))), kz);
    const __m256d ngi = _mm256_add_pd(
        _mm256_add_pd(gi, _mm256_mul_pd(dt, _mm256_sub_pd(m_om2, _mm256_mul_pd(g2r, inv_m)))),
        kz);
    const __m256d nbr = _mm256_add_pd(br, _mm256_mul_pd(dt, _mm256_mul_pd(bgi, inv_m)));
    const __m256d nbi = _mm256_sub_pd(bi, _mm256_mul_pd(dt, _mm256_mul_pd(bgr, inv_m)));
    const __m256d nar = _mm256_add_pd(ar, _mm256_mul_pd(dt, _mm256_mul_pd(b2i, inv_m)));
    const __m256d nai = _mm256_sub_pd(ai, _mm256_mul_pd(dt, _mm256_mul_pd(b2r, inv_m)));
    _mm256_storeu_pd(pgr, ngr);
    _mm256_storeu_pd(pgi, ngi);
    _mm256_storeu_pd(pbr, nbr);
    _mm256_storeu_pd(pbi, nbi);
    _mm256_storeu_pd(par, nar);
    _mm256_storeu_pd(pai, nai);
}

inline void step4_backward(double* par, double* pai, double* pbr, double* pbi,
                           double* pgr, double* pgi, __m256d z, __m256d dt,
                           __m256d inv_m, __m256d kick, __m256d m_om2, __m256d two) {
    const __m256d ar = _mm256_loadu_pd(par);
    const __m256d ai = _mm256_loadu_pd(pai);
    const __m256d br = _mm256_loadu_pd(pbr);
    const __m256d bi = _mm256_loadu_pd(pbi);
    const __m256d gr = _mm256_loadu_pd(pgr);
    const __m256d gi = _mm256_loadu_pd(pgi);
    const __m256d g2r = _mm256_sub_pd(_mm256_mul_pd(gr, gr), _mm256_mul_pd(gi, gi));
    const __m256d g2i = _mm256_mul_pd(_mm256_mul_pd(two, gr), gi);
    const __m256d bgr = _mm256_sub_pd(_mm256_mul_pd(br, gr), _mm256_mul_pd(bi, gi));
    const __m256d bgi = _mm256_add_pd(_mm256_mul_pd(br, gi), _mm256_mul_pd(bi, gr));
    const __m256d b2r = _mm256_sub_pd(_mm256_mul_pd(br, br), _mm256_mul_pd(bi, bi));
    const __m256d b2i = _mm256_mul_pd(_mm256_mul_pd(two, br), bi);
    const __m256d kz = _mm256_mul_pd(kick, z);
    const __m256d ngr = _mm256_sub_pd(
        _mm256_sub_pd(gr, _mm256_mul_pd(dt, _mm256_mul_pd(g2i, inv_m))), kz);
    const __m256d ngi = _mm256_sub_pd(
        _mm256_add_pd(gi, _mm256_mul_pd(dt, _mm256_sub_pd(_mm256_mul_pd(g2r, inv_m), m_om2))),
        kz);
    const __m256d nbr = _mm256_sub_pd(br, _mm256_mul_pd(dt, _mm256_mul_pd(bgi, inv_m)));
    const __m256d nbi = _mm256_add_pd(bi, _mm256_mul_pd(dt, _mm256_mul_pd(bgr, inv_m)));
    const __m256d nar = _mm256_sub_pd(ar, _mm256_mul_pd(dt, _mm256_mul_pd(b2i, inv_m)));
    const __m256d nai = _mm256_add_pd(ai, _mm256_mul_pd(dt, _mm256_mul_pd(b2r, inv_m)));
    _mm256_storeu_pd(pgr, ngr);
    _mm256_storeu_pd(pgi, ngi);
    _mm256_storeu_pd(pbr, nbr);
    _mm256_storeu_pd(pbi, nbi);
    _mm256_storeu_pd(par, nar);
    _mm256_storeu_pd(pai, nai);
}

}  // namespace

void run_pairs_avx2(PairBatch& b, PairRoots& roots, const PairRunConfig& cfg,
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

    const __m256d vdt = _mm256_set1_pd(dt);
    const __m256d vinv_m = _mm256_set1_pd(inv_m);
    const __m256d vtwo = _mm256_set1_pd(2.0);

    auto scalar_lane = [&](long l, long k, double om2, double kick) {
        if (!b.alive[l]) return;
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
    };

    drive_pairs(b, roots, cfg, sink, [&](long k) {
        const double om2 = table.om2[k];
        const double kick = table.kick[k];
        const __m256d vkick = _mm256_set1_pd(kick);
        const __m256d vmom2 = _mm256_set1_pd(m * om2);
        long l0 = 0;
        for (; l0 + 4 <= b.n; l0 += 4) {
            if (b.alive[l0] && b.alive[l0 + 1] && b.alive[l0 + 2] && b.alive[l0 + 3]) {
                alignas(32) double zf[4], zb[4];
                for (int j = 0; j < 4; ++j) {
                    zf[j] = rng::normal(gen_f[l0 + j]);
                    zb[j] = rng::normal(gen_b[l0 + j]);
                }
                step4_forward(&b.afr[l0], &b.afi[l0], &b.bfr[l0], &b.bfi[l0],
                              &b.gfr[l0], &b.gfi[l0], _mm256_load_pd(zf), vdt,
                              vinv_m, vkick, vmom2, vtwo);
                step4_backward(&b.abr[l0], &b.abi[l0], &b.bbr[l0], &b.bbi[l0],
                               &b.gbr[l0], &b.gbi[l0], _mm256_load_pd(zb), vdt,
                               vinv_m, vkick, vmom2, vtwo);
                for (int j = 0; j < 4; ++j) {
                    const long l = l0 + j;
                    if (!gamma_healthy(b.gfr[l], b.gfi[l], b.gbr[l], b.gbi[l])) {
                        b.alive[l] = 0;
                        b.blow_step[l] = k + 1;
                        b.t_gamma[l] = dt * static_cast<double>(k + 1);
                    }
                }
            } else {
                for (int j = 0; j < 4; ++j) scalar_lane(l0 + j, k, om2, kick);
            }
        }
        for (; l0 < b.n; ++l0) scalar_lane(l0, k, om2, kick);
    });
}

}  // namespace qosc::kern
