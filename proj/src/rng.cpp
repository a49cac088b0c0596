#include "qosc/rng.hpp"

#include <cassert>
#include <cmath>

namespace qosc::rng {

namespace {
double gauss_unnorm(double x) { return std::exp(-0.5 * x * x); }
}  // namespace

ZigguratNormal::ZigguratNormal() {
    // Tail cut chosen so 256 equal-area layers exactly tile the density.
    r_ = 3.6541528853610088;
    const double tail_area = std::sqrt(3.14159265358979323846 / 2.0) *
                             std::erfc(r_ / std::sqrt(2.0));
    const double v = r_ * gauss_unnorm(r_) + tail_area;

    y_[0] = gauss_unnorm(r_);
    w_[0] = v / y_[0];
    w_[1] = r_;
    for (int k = 1; k <= 255; ++k) {
        y_[k] = y_[k - 1] + v / w_[k];
        if (y_[k] > 1.0) y_[k] = 1.0;
        w_[k + 1] = (y_[k] >= 1.0) ? 0.0 : std::sqrt(-2.0 * std::log(y_[k]));
    }
    assert(std::abs(y_[255] - 1.0) < 1e-7);
    y_[255] = 1.0;
}

const ZigguratNormal& ZigguratNormal::instance() {
    static const ZigguratNormal z;
    return z;
}

}  // namespace qosc::rng
