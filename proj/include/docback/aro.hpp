#pragma once

#include <span>
#include <vector>

#include "docback/color.hpp"
#include "docback/geometry.hpp"
#include "docback/raster.hpp"

namespace docback::aro {

/// Readability-optimization parameters. The stock defaults are a 7.0:1
/// contrast target over 98% of sampled pixels, 24px padding and a corner
/// radius of 0.12x the smaller backing dimension.
struct AroParams {
    double target_contrast = 7.0;   // tau, >= 1
    double coverage = 0.98;         // rho_cov, in (0,1]
    double padding = 24.0;          // pixels added on each side
    double radius_fraction = 0.12;  // of min(backing width, height)
    double epsilon = 0.02;          // safety margin added to alpha*
    double alpha_min = 0.15;        // opacity floor
    double alpha_step = 0.001;      // search granularity, in (0, 0.05]
    std::size_t max_samples = 1'000'000;  // stride-subsample beyond this
};

/// Result of the minimal-opacity search.
struct AlphaSolution {
    double alpha_star = 0.0;
    double attained_coverage = 0.0;
    bool unattainable = false;
    int grid_index = 0;  // alpha_star = grid index * alpha_step (last index clamps to 1)
};

/// A semi-transparent rounded backing placed behind one text box.
struct BackingOverlay {
    BBox box;                   // expanded by padding and clamped to the image
    double corner_radius = 0.0;
    color::Srgb overlay_color;
    double alpha = 0.0;         // final opacity: min(1, max(alpha*+eps, alpha_min))
    double solved_alpha_star = 0.0;
    double attained_coverage = 0.0;
    bool unattainable = false;
};

/// Luminance of overlay blended over background at the given opacity.
double blend_luminance(double alpha, double l_overlay, double l_bg);

/// Neutral backing color on the opposite luminance side of the text:
/// light (0.98 gray) behind dark text, dark (0.06 gray) behind light
/// text; the tie at L = 0.5 goes dark.
color::Srgb choose_overlay_color(const color::Srgb& text_color);
color::Srgb choose_overlay_for_luminance(double text_luminance);

/// Smallest grid opacity whose blended contrast against the text meets
/// target_contrast on at least `coverage` of the samples. The grid is
/// {0, alpha_step, ..., 1}. When even alpha=1 falls short the result is
/// (1.0, coverage at 1) with the unattainable flag set.
AlphaSolution solve_alpha(std::span<const double> bg_luminances, double l_overlay,
                          double l_text, const AroParams& params);

double finalize_alpha(double alpha_star, const AroParams& params);

/// Full per-box pipeline: expand and clamp the box, sample the pixels
/// beneath it, pick the overlay color and solve the opacity.
BackingOverlay build_overlay(const BBox& text_box, const color::Srgb& text_color,
                             const raster::RasterImage& background, const AroParams& params);

/// Coverage of one pixel by the overlay's rounded rectangle, in [0,1].
/// Interior pixels report exactly 1; boundary pixels are supersampled.
double overlay_pixel_coverage(const BackingOverlay& overlay, int x, int y);

/// Source-over composite of all overlays onto a copy of the background.
/// Per pixel the effective opacity is alpha x rounded-rect coverage.
/// Color channels blend in linear light, so the luminance of a blended
/// pixel is exactly blend_luminance(alpha, overlay, background) and the
/// solved opacity carries over to the composited raster.
raster::RasterImage composite_overlays(const raster::RasterImage& background,
                                       const std::vector<BackingOverlay>& overlays);

/// Background luminances under an expanded-and-clamped box, at most
/// max_samples of them (uniform stride beyond that).
std::vector<double> sample_luminances(const raster::RasterImage& img, const BBox& box,
                                      std::size_t max_samples);

}  // namespace docback::aro
