#include "psched/change_detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace psched {

namespace {

struct PixelWindow {
    int u0 = 0, v0 = 0, u1 = 0, v1 = 0;  // half-open

    int area() const { return std::max(0, u1 - u0) * std::max(0, v1 - v0); }
};

PixelWindow clip(const PatchRegion& region, int width, int height)
{
    PixelWindow win;
    win.u0 = std::clamp(static_cast<int>(std::floor(region.x)), 0, width);
    win.v0 = std::clamp(static_cast<int>(std::floor(region.y)), 0, height);
    win.u1 = std::clamp(static_cast<int>(std::ceil(region.x + region.w)), 0, width);
    win.v1 = std::clamp(static_cast<int>(std::ceil(region.y + region.h)), 0, height);
    return win;
}

double gray_abs_diff(const RgbImage& prev, const RgbImage& curr, int u, int v, const ChangeDetectConfig& cfg)
{
    double out = 0.0;
    for (int c = 0; c < 3; ++c)
        out += cfg.luminance_coeffs[c] * std::abs(double(curr.channel(u, v, c)) - double(prev.channel(u, v, c)));
    return out;
}

void require_same_shape(const RgbImage& a, const RgbImage& b)
{
    if (a.width != b.width || a.height != b.height || a.pixels.size() != b.pixels.size())
        throw StructuralError("raster shapes differ between frames");
}

}  // namespace

void ChangeDetectConfig::validate() const
{
    double sum = 0.0;
    for (double c : luminance_coeffs) {
        if (c < 0.0) throw StructuralError("luminance coefficients must be non-negative");
        sum += c;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw StructuralError("luminance coefficients must sum to 1");
    if (!(intensity_threshold >= 0.0 && intensity_threshold <= 255.0))
        throw StructuralError("intensity_threshold must lie in [0, 255]");
    if (!(patch_change_threshold > 0.0 && patch_change_threshold < 1.0))
        throw StructuralError("patch_change_threshold must lie in (0, 1)");
    if (histogram_bins <= 0 || histogram_bins > 256) throw StructuralError("histogram_bins must lie in [1, 256]");
    if (!(histogram_threshold >= 0.0)) throw StructuralError("histogram_threshold must be non-negative");
    if (background_tile <= 0) throw StructuralError("background_tile must be positive");
    if (!(min_tile_coverage > 0.0 && min_tile_coverage <= 1.0))
        throw StructuralError("min_tile_coverage must lie in (0, 1]");
}

Grid2D::Grid2D(int w, int h, double fill) : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill)
{
    if (w < 0 || h < 0) throw StructuralError("grid dimensions must be non-negative");
}

void PixelMask::exclude(const PatchRegion& raster_region)
{
    auto win = clip(raster_region, width, height);
    for (int v = win.v0; v < win.v1; ++v)
        for (int u = win.u0; u < win.u1; ++u) include[static_cast<std::size_t>(v) * width + u] = false;
}

Histogram3::Histogram3(int bin_count) : bins(bin_count)
{
    for (auto& ch : counts) ch.assign(static_cast<std::size_t>(std::max(bin_count, 0)), 0.0);
}

Grid2D grayscale_diff(const PatchDiff& diff, const ChangeDetectConfig& cfg)
{
    if (diff.width < 0 || diff.height < 0 ||
        diff.values.size() != static_cast<std::size_t>(3) * diff.width * diff.height)
        throw StructuralError("patch diff size does not match 3 x W x H");
    Grid2D out(diff.width, diff.height);
    for (int v = 0; v < diff.height; ++v)
        for (int u = 0; u < diff.width; ++u) {
            double acc = 0.0;
            for (int c = 0; c < 3; ++c) acc += cfg.luminance_coeffs[c] * diff.at(c, u, v);
            out.at(u, v) = acc;
        }
    return out;
}

double change_ratio(const Grid2D& gray_diff, const PatchRegion& region, const ChangeDetectConfig& cfg)
{
    const int u0 = static_cast<int>(std::lround(region.x));
    const int v0 = static_cast<int>(std::lround(region.y));
    const int w = static_cast<int>(std::lround(region.w));
    const int h = static_cast<int>(std::lround(region.h));
    if (w <= 0 || h <= 0) throw StructuralError("change_ratio: zero-area region");
    if (u0 < 0 || v0 < 0 || u0 + w > gray_diff.width || v0 + h > gray_diff.height)
        throw StructuralError("change_ratio: region not covered by the difference grid");

    std::size_t above = 0;
    for (int v = v0; v < v0 + h; ++v)
        for (int u = u0; u < u0 + w; ++u)
            if (gray_diff.at(u, v) > cfg.intensity_threshold) ++above;
    return static_cast<double>(above) / (static_cast<double>(w) * h);
}

MotionStatus motion_status(double cr, const ChangeDetectConfig& cfg)
{
    return cr > cfg.patch_change_threshold ? MotionStatus::Moving : MotionStatus::Stationary;
}

HistogramShift chi_square_shift(const Histogram3& prev, const Histogram3& curr, const ChangeDetectConfig& cfg)
{
    if (prev.bins != curr.bins) throw StructuralError("chi_square_shift: bin counts differ");
    HistogramShift shift;
    for (int c = 0; c < 3; ++c) {
        const auto& a = prev.counts[c];
        const auto& b = curr.counts[c];
        if (a.size() != b.size() || a.size() != static_cast<std::size_t>(prev.bins))
            throw StructuralError("chi_square_shift: channel length does not match bin count");
        double sa = 1.0, sb = 1.0;
        if (cfg.normalize_histograms) {
            sa = std::accumulate(a.begin(), a.end(), 0.0);
            sb = std::accumulate(b.begin(), b.end(), 0.0);
            if (sa <= 0.0) sa = 1.0;
            if (sb <= 0.0) sb = 1.0;
        }
        double d = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double x = a[i] / sa;
            const double y = b[i] / sb;
            if (x < 0.0 || y < 0.0) throw StructuralError("chi_square_shift: negative histogram count");
            const double denom = cfg.chi_square_form == ChiSquareForm::Symmetric ? x + y : x;
            if (denom > 0.0) d += (x - y) * (x - y) / denom;
        }
        shift.per_channel[c] = d;
    }
    shift.mean = (shift.per_channel[0] + shift.per_channel[1] + shift.per_channel[2]) / 3.0;
    return shift;
}

bool composition_change_trigger(double background_cr, const HistogramShift& shift, const ChangeDetectConfig& cfg)
{
    return background_cr > cfg.patch_change_threshold && shift.mean > cfg.histogram_threshold;
}

PatchDiff abs_diff(const RgbImage& prev, const RgbImage& curr, const PatchRegion& raster_region)
{
    require_same_shape(prev, curr);
    auto win = clip(raster_region, curr.width, curr.height);
    PatchDiff diff;
    diff.region = {double(win.u0), double(win.v0), double(win.u1 - win.u0), double(win.v1 - win.v0)};
    diff.width = std::max(0, win.u1 - win.u0);
    diff.height = std::max(0, win.v1 - win.v0);
    diff.values.resize(static_cast<std::size_t>(3) * diff.width * diff.height);
    for (int c = 0; c < 3; ++c)
        for (int v = 0; v < diff.height; ++v)
            for (int u = 0; u < diff.width; ++u) {
                const int su = win.u0 + u, sv = win.v0 + v;
                diff.values[(static_cast<std::size_t>(c) * diff.height + v) * diff.width + u] =
                    std::abs(double(curr.channel(su, sv, c)) - double(prev.channel(su, sv, c)));
            }
    return diff;
}

double patch_change_ratio(const RgbImage& prev, const RgbImage& curr, const PatchRegion& raster_region,
                          const ChangeDetectConfig& cfg)
{
    auto diff = abs_diff(prev, curr, raster_region);
    if (diff.width == 0 || diff.height == 0) return 0.0;
    auto gray = grayscale_diff(diff, cfg);
    return change_ratio(gray, {0.0, 0.0, double(diff.width), double(diff.height)}, cfg);
}

double background_change_ratio(const RgbImage& prev, const RgbImage& curr, const PixelMask& mask,
                               const ChangeDetectConfig& cfg)
{
    require_same_shape(prev, curr);
    if (mask.width != curr.width || mask.height != curr.height)
        throw StructuralError("background mask shape differs from raster");
    const int tile = cfg.background_tile;
    double best = 0.0;
    for (int tv = 0; tv < curr.height; tv += tile)
        for (int tu = 0; tu < curr.width; tu += tile) {
            const int u1 = std::min(tu + tile, curr.width), v1 = std::min(tv + tile, curr.height);
            int counted = 0, above = 0;
            for (int v = tv; v < v1; ++v)
                for (int u = tu; u < u1; ++u) {
                    if (!mask.at(u, v)) continue;
                    ++counted;
                    if (gray_abs_diff(prev, curr, u, v, cfg) > cfg.intensity_threshold) ++above;
                }
            const int tile_area = (u1 - tu) * (v1 - tv);
            if (counted == 0 || counted < cfg.min_tile_coverage * tile_area) continue;
            best = std::max(best, static_cast<double>(above) / counted);
        }
    return best;
}

Histogram3 channel_histograms(const RgbImage& image, const PixelMask& mask, int bins)
{
    if (bins <= 0 || bins > 256) throw StructuralError("histogram bins must lie in [1, 256]");
    if (mask.width != image.width || mask.height != image.height)
        throw StructuralError("histogram mask shape differs from raster");
    Histogram3 hist(bins);
    for (int v = 0; v < image.height; ++v)
        for (int u = 0; u < image.width; ++u) {
            if (!mask.at(u, v)) continue;
            for (int c = 0; c < 3; ++c) hist.counts[c][static_cast<std::size_t>(image.channel(u, v, c)) * bins / 256] += 1.0;
        }
    return hist;
}

}  // namespace psched
