#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "psched/scene.hpp"

namespace psched {

enum class ChiSquareForm {
    Symmetric,   // (a - b)^2 / (a + b)
    Asymmetric,  // (a - b)^2 / a
};

struct ChangeDetectConfig {
    std::array<double, 3> luminance_coeffs{0.299, 0.587, 0.114};
    double intensity_threshold = 30.0;
    double patch_change_threshold = 0.05;
    int histogram_bins = 32;
    double histogram_threshold = 10.0;
    ChiSquareForm chi_square_form = ChiSquareForm::Symmetric;
    bool normalize_histograms = false;
    /// Side length, in raster pixels, of the tiles the background change ratio is taken over.
    int background_tile = 8;
    /// Tiles whose unmasked fraction falls below this are skipped.
    double min_tile_coverage = 0.25;

    void validate() const;
};

/// Row-major W x H grid of reals.
struct Grid2D {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    Grid2D() = default;
    Grid2D(int w, int h, double fill = 0.0);

    double& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
    double at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
};

/// Absolute RGB difference of one patch between consecutive frames. Channel-major 3 x H x W.
struct PatchDiff {
    PatchRegion region;
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int channel, int u, int v) const
    {
        return values[(static_cast<std::size_t>(channel) * height + v) * width + u];
    }
};

/// Interleaved 8-bit RGB raster.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t channel(int u, int v, int c) const { return pixels[(static_cast<std::size_t>(v) * width + u) * 3 + c]; }
    std::uint8_t& channel(int u, int v, int c) { return pixels[(static_cast<std::size_t>(v) * width + u) * 3 + c]; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Per-pixel inclusion mask over a raster (true = counted).
struct PixelMask {
    int width = 0;
    int height = 0;
    std::vector<bool> include;

    PixelMask() = default;
    PixelMask(int w, int h, bool fill) : width(w), height(h), include(static_cast<std::size_t>(w) * h, fill) {}

    bool at(int u, int v) const { return include[static_cast<std::size_t>(v) * width + u]; }
    void exclude(const PatchRegion& raster_region);
};

struct Histogram3 {
    int bins = 0;
    std::array<std::vector<double>, 3> counts;

    explicit Histogram3(int bin_count = 0);
};

struct HistogramShift {
    std::array<double, 3> per_channel{0.0, 0.0, 0.0};
    double mean = 0.0;
};

/// Luminance-weighted collapse of an RGB difference: out[u,v] = sum_c Y[c] * dP[c,u,v].
Grid2D grayscale_diff(const PatchDiff& diff, const ChangeDetectConfig& cfg);

/// Fraction of pixels of `region` (grid coordinates) whose gray difference exceeds the intensity threshold.
double change_ratio(const Grid2D& gray_diff, const PatchRegion& region, const ChangeDetectConfig& cfg);

/// Moving iff cr is strictly above the patch change threshold.
MotionStatus motion_status(double cr, const ChangeDetectConfig& cfg);

HistogramShift chi_square_shift(const Histogram3& prev, const Histogram3& curr, const ChangeDetectConfig& cfg = {});

/// Composition change: both the background change ratio and the histogram shift exceed their thresholds.
bool composition_change_trigger(double background_cr, const HistogramShift& shift, const ChangeDetectConfig& cfg);

// Raster helpers used when traces embed pixel data.

/// Clips `region` to the raster and returns |curr - prev| over it. Throws if the images differ in shape.
PatchDiff abs_diff(const RgbImage& prev, const RgbImage& curr, const PatchRegion& raster_region);

/// Change ratio of one raster patch between two frames. Returns 0 for patches clipped to nothing.
double patch_change_ratio(const RgbImage& prev, const RgbImage& curr, const PatchRegion& raster_region,
                          const ChangeDetectConfig& cfg);

/// Largest change ratio over background tiles, counting only unmasked pixels.
double background_change_ratio(const RgbImage& prev, const RgbImage& curr, const PixelMask& mask,
                               const ChangeDetectConfig& cfg);

Histogram3 channel_histograms(const RgbImage& image, const PixelMask& mask, int bins);

}  // namespace psched
