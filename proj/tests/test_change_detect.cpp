#include <doctest.h>

#include <cmath>

#include "psched/change_detect.hpp"
#include "support.hpp"

using namespace psched;

namespace {

PatchDiff one_pixel(double r, double g, double b)
{
    PatchDiff d;
    d.width = 1;
    d.height = 1;
    d.region = {0, 0, 1, 1};
    d.values = {r, g, b};
    return d;
}

Grid2D grid(int w, int h, std::vector<double> values)
{
    Grid2D out(w, h);
    out.values = std::move(values);
    return out;
}

Histogram3 single_channel(std::vector<double> counts)
{
    Histogram3 h(static_cast<int>(counts.size()));
    h.counts[0] = std::move(counts);
    return h;
}

Histogram3 random_histogram(test::Gen& g, int bins)
{
    Histogram3 h(bins);
    for (auto& ch : h.counts)
        for (auto& v : ch) v = g.coin(0.3) ? 0.0 : std::floor(g.uniform(0.0, 500.0));
    return h;
}

// Independent evaluation of the symmetric chi-square distance of one channel.
double chi_square_oracle(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double s = a[i] + b[i];
        if (s == 0.0) continue;
        d += (a[i] - b[i]) * (a[i] - b[i]) / s;
    }
    return d;
}

}  // namespace

TEST_SUITE("change_detect") {

TEST_CASE("grayscale_diff examples")
{
    ChangeDetectConfig cfg;
    CHECK(grayscale_diff(one_pixel(0, 0, 0), cfg).at(0, 0) == 0.0);
    CHECK(grayscale_diff(one_pixel(255, 255, 255), cfg).at(0, 0) == doctest::Approx(255.0).epsilon(1e-12));
    // 0.299 * 100
    CHECK(grayscale_diff(one_pixel(100, 0, 0), cfg).at(0, 0) == doctest::Approx(29.9).epsilon(1e-12));
}

TEST_CASE("grayscale_diff rejects inconsistent shapes")
{
    auto d = one_pixel(1, 2, 3);
    d.width = 2;
    CHECK_THROWS_AS(grayscale_diff(d, {}), StructuralError);
}

TEST_CASE("grayscale_diff is linear in the difference")
{
    test::Gen g(3);
    ChangeDetectConfig cfg;
    for (int trial = 0; trial < 100; ++trial) {
        PatchDiff d;
        d.width = g.integer(1, 6);
        d.height = g.integer(1, 6);
        for (int i = 0; i < 3 * d.width * d.height; ++i) d.values.push_back(g.uniform(0, 100));
        const double alpha = g.uniform(0, 2.5);
        PatchDiff scaled = d;
        for (auto& v : scaled.values) v *= alpha;
        const auto a = grayscale_diff(d, cfg);
        const auto b = grayscale_diff(scaled, cfg);
        for (int v = 0; v < d.height; ++v)
            for (int u = 0; u < d.width; ++u) {
                const double expect = 0.299 * d.at(0, u, v) + 0.587 * d.at(1, u, v) + 0.114 * d.at(2, u, v);
                CHECK(a.at(u, v) == doctest::Approx(expect).epsilon(1e-12));
                CHECK(b.at(u, v) == doctest::Approx(alpha * a.at(u, v)).epsilon(1e-12));
            }
    }
}

TEST_CASE("change_ratio examples")
{
    ChangeDetectConfig cfg;
    CHECK(change_ratio(grid(3, 3, std::vector<double>(9, 0.0)), {0, 0, 3, 3}, cfg) == 0.0);
    CHECK(change_ratio(grid(3, 3, std::vector<double>(9, 200.0)), {0, 0, 3, 3}, cfg) == 1.0);
    cfg.intensity_threshold = 50.0;
    CHECK(change_ratio(grid(2, 2, {10, 200, 0, 250}), {0, 0, 2, 2}, cfg) == 0.5);
    CHECK_THROWS_AS(change_ratio(grid(2, 2, {0, 0, 0, 0}), {0, 0, 0, 2}, cfg), StructuralError);
    CHECK_THROWS_AS(change_ratio(grid(2, 2, {0, 0, 0, 0}), {1, 1, 2, 2}, cfg), StructuralError);
}

TEST_CASE("change_ratio is monotone in each pixel")
{
    test::Gen g(8);
    ChangeDetectConfig cfg;
    for (int trial = 0; trial < 300; ++trial) {
        const int w = g.integer(1, 5), h = g.integer(1, 5);
        std::vector<double> vals;
        for (int i = 0; i < w * h; ++i) vals.push_back(g.uniform(0, 80));
        auto a = grid(w, h, vals);
        const double before = change_ratio(a, {0, 0, double(w), double(h)}, cfg);
        a.values[static_cast<std::size_t>(g.integer(0, w * h - 1))] += g.uniform(0, 60);
        CHECK(change_ratio(a, {0, 0, double(w), double(h)}, cfg) >= before);
    }
}

TEST_CASE("motion status uses a strict threshold")
{
    ChangeDetectConfig cfg;
    cfg.patch_change_threshold = 0.1;
    CHECK(motion_status(0.0, cfg) == MotionStatus::Stationary);
    CHECK(motion_status(0.1, cfg) == MotionStatus::Stationary);
    CHECK(motion_status(0.5, cfg) == MotionStatus::Moving);
    for (double eps : {0.01, 0.05, 0.3, 0.9}) {
        cfg.patch_change_threshold = eps;
        CHECK(motion_status(eps - 1e-9, cfg) == MotionStatus::Stationary);
        CHECK(motion_status(eps, cfg) == MotionStatus::Stationary);
        CHECK(motion_status(eps + 1e-9, cfg) == MotionStatus::Moving);
    }
}

TEST_CASE("chi-square examples")
{
    const auto a = single_channel({4, 0});
    const auto b = single_channel({0, 4});
    const auto s = chi_square_shift(a, b);
    CHECK(s.per_channel[0] == 8.0);
    CHECK(s.per_channel[1] == 0.0);
    CHECK(s.mean == doctest::Approx(8.0 / 3.0));
    CHECK(chi_square_shift(a, a).mean == 0.0);
    CHECK(chi_square_shift(b, a).per_channel[0] == 8.0);
    CHECK_THROWS_AS(chi_square_shift(Histogram3(4), Histogram3(5)), StructuralError);
}

TEST_CASE("chi-square matches an independent evaluation and is symmetric")
{
    test::Gen g(21);
    for (int trial = 0; trial < 1000; ++trial) {
        const int bins = g.integer(1, 64);
        const auto a = random_histogram(g, bins);
        const auto b = random_histogram(g, bins);
        const auto ab = chi_square_shift(a, b);
        const auto ba = chi_square_shift(b, a);
        for (int c = 0; c < 3; ++c) {
            CHECK(ab.per_channel[c] == doctest::Approx(chi_square_oracle(a.counts[c], b.counts[c])).epsilon(1e-12));
            CHECK(ab.per_channel[c] == ba.per_channel[c]);
        }
        CHECK(ab.mean == doctest::Approx((ab.per_channel[0] + ab.per_channel[1] + ab.per_channel[2]) / 3.0));
        CHECK(chi_square_shift(a, a).mean == 0.0);
    }
}

TEST_CASE("chi-square variants")
{
    ChangeDetectConfig cfg;
    cfg.chi_square_form = ChiSquareForm::Asymmetric;
    // (4-1)^2/4 + (0-3)^2/0 skipped
    CHECK(chi_square_shift(single_channel({4, 0}), single_channel({1, 3}), cfg).per_channel[0] == 2.25);
    cfg.chi_square_form = ChiSquareForm::Symmetric;
    cfg.normalize_histograms = true;
    const auto s = chi_square_shift(single_channel({2, 2}), single_channel({40, 40}), cfg);
    CHECK(s.per_channel[0] == 0.0);
}

TEST_CASE("composition trigger needs both thresholds")
{
    ChangeDetectConfig cfg;
    HistogramShift low, high;
    low.mean = 5.0;
    high.mean = 15.0;
    CHECK_FALSE(composition_change_trigger(0.01, low, cfg));
    CHECK_FALSE(composition_change_trigger(0.5, low, cfg));
    CHECK_FALSE(composition_change_trigger(0.01, high, cfg));
    CHECK(composition_change_trigger(0.5, high, cfg));
    CHECK_FALSE(composition_change_trigger(cfg.patch_change_threshold, high, cfg));
}

TEST_CASE("raster helpers")
{
    RgbImage prev(16, 16), curr(16, 16);
    // Brighten a 4x4 block in the second frame.
    for (int v = 4; v < 8; ++v)
        for (int u = 4; u < 8; ++u)
            for (int c = 0; c < 3; ++c) curr.channel(u, v, c) = 200;
    ChangeDetectConfig cfg;
    CHECK(patch_change_ratio(prev, curr, {4, 4, 4, 4}, cfg) == 1.0);
    CHECK(patch_change_ratio(prev, curr, {4, 4, 8, 8}, cfg) == 0.25);
    CHECK(patch_change_ratio(prev, curr, {40, 40, 4, 4}, cfg) == 0.0);

    // 8x8 tiles: the block fills a quarter of the top-left tile.
    PixelMask mask(16, 16, true);
    CHECK(background_change_ratio(prev, curr, mask, cfg) == 0.25);
    mask.exclude({4, 4, 4, 4});
    CHECK(background_change_ratio(prev, curr, mask, cfg) == 0.0);

    const auto h = channel_histograms(curr, PixelMask(16, 16, true), 32);
    CHECK(h.counts[0][0] == 240.0);
    CHECK(h.counts[0][200 * 32 / 256] == 16.0);
    CHECK_THROWS_AS(abs_diff(prev, RgbImage(8, 8), {0, 0, 1, 1}), StructuralError);
}

TEST_CASE("config validation")
{
    ChangeDetectConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.luminance_coeffs = {0.5, 0.5, 0.5};
    CHECK_THROWS_AS(cfg.validate(), StructuralError);
    cfg = {};
    cfg.patch_change_threshold = 1.0;
    CHECK_THROWS_AS(cfg.validate(), StructuralError);
}

}
