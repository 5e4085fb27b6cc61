#include "docback/aro.hpp"

#include <cmath>

#include "docback/errors.hpp"

namespace docback::aro {

namespace {

constexpr color::Srgb kLightNeutral{0.98, 0.98, 0.98};
constexpr color::Srgb kDarkNeutral{0.06, 0.06, 0.06};

void validate(const AroParams& params) {
    if (params.target_contrast < 1.0) throw ValidationError("aro: target_contrast must be >= 1");
    if (!(params.coverage > 0.0 && params.coverage <= 1.0)) {
        throw ValidationError("aro: coverage must be in (0,1]");
    }
    if (!(params.alpha_step > 0.0 && params.alpha_step <= 0.05)) {
        throw ValidationError("aro: alpha_step must be in (0, 0.05]");
    }
    if (params.alpha_min < 0.0 || params.alpha_min > 1.0) {
        throw ValidationError("aro: alpha_min must be in [0,1]");
    }
    if (params.padding < 0.0) throw ValidationError("aro: padding must be >= 0");
}

int grid_last_index(double step) {
    return static_cast<int>(std::ceil(1.0 / step - 1e-9));
}

bool point_in_rounded_rect(const BBox& box, double r, double px, double py) {
    if (px < box.x0 || px > box.x1 || py < box.y0 || py > box.y1) return false;
    const double dx = std::max({0.0, (box.x0 + r) - px, px - (box.x1 - r)});
    const double dy = std::max({0.0, (box.y0 + r) - py, py - (box.y1 - r)});
    return dx * dx + dy * dy <= r * r;
}

}  // namespace

double blend_luminance(double alpha, double l_overlay, double l_bg) {
    return alpha * l_overlay + (1.0 - alpha) * l_bg;
}

color::Srgb choose_overlay_for_luminance(double text_luminance) {
    return text_luminance < 0.5 ? kLightNeutral : kDarkNeutral;
}

color::Srgb choose_overlay_color(const color::Srgb& text_color) {
    return choose_overlay_for_luminance(color::relative_luminance(text_color));
}

AlphaSolution solve_alpha(std::span<const double> bg_luminances, double l_overlay,
                          double l_text, const AroParams& params) {
    validate(params);
    if (bg_luminances.empty()) throw Error("solve_alpha: no pixels under box");
    for (double l : bg_luminances) {
        if (std::isnan(l)) throw Error("solve_alpha: invalid sample");
    }

    const std::size_t n = bg_luminances.size();
    const int last = grid_last_index(params.alpha_step);
    double coverage_at_one = 0.0;

    for (int i = 0; i <= last; ++i) {
        const double alpha = (i == last) ? 1.0 : i * params.alpha_step;
        std::size_t hits = 0;
        for (double l_bg : bg_luminances) {
            const double blended = alpha * l_overlay + (1.0 - alpha) * l_bg;
            const double hi = std::max(blended, l_text);
            const double lo = std::min(blended, l_text);
            if ((hi + 0.05) / (lo + 0.05) >= params.target_contrast) ++hits;
        }
        const double coverage = static_cast<double>(hits) / static_cast<double>(n);
        if (coverage >= params.coverage) {
            return {alpha, coverage, false, i};
        }
        if (i == last) coverage_at_one = coverage;
    }
    return {1.0, coverage_at_one, true, last};
}

double finalize_alpha(double alpha_star, const AroParams& params) {
    return std::min(1.0, std::max(alpha_star + params.epsilon, params.alpha_min));
}

std::vector<double> sample_luminances(const raster::RasterImage& img, const BBox& box,
                                      std::size_t max_samples) {
    const int xi0 = std::max(0, static_cast<int>(std::floor(box.x0)));
    const int yi0 = std::max(0, static_cast<int>(std::floor(box.y0)));
    const int xi1 = std::min(img.width, static_cast<int>(std::ceil(box.x1)));
    const int yi1 = std::min(img.height, static_cast<int>(std::ceil(box.y1)));
    if (xi1 <= xi0 || yi1 <= yi0) return {};

    const std::size_t total =
        static_cast<std::size_t>(xi1 - xi0) * static_cast<std::size_t>(yi1 - yi0);
    const std::size_t stride = total > max_samples ? (total + max_samples - 1) / max_samples : 1;

    std::vector<double> lums;
    lums.reserve(total / stride + 1);
    std::size_t index = 0;
    for (int y = yi0; y < yi1; ++y) {
        for (int x = xi0; x < xi1; ++x, ++index) {
            if (index % stride != 0) continue;
            lums.push_back(color::relative_luminance(img.rgb_at(x, y)));
        }
    }
    return lums;
}

BackingOverlay build_overlay(const BBox& text_box, const color::Srgb& text_color,
                             const raster::RasterImage& background, const AroParams& params) {
    validate(params);
    const BBox expanded = text_box.expanded(params.padding)
                              .clamped(static_cast<double>(background.width),
                                       static_cast<double>(background.height));
    if (!expanded.valid()) throw Error("build_overlay: zero-area backing after clamping");

    const auto lums = sample_luminances(background, expanded, params.max_samples);
    if (lums.empty()) throw Error("solve_alpha: no pixels under box");

    BackingOverlay overlay;
    overlay.box = expanded;
    overlay.overlay_color = choose_overlay_color(text_color);
    overlay.corner_radius =
        params.radius_fraction * std::min(expanded.width(), expanded.height());

    const double l_text = color::relative_luminance(text_color);
    const double l_overlay = color::relative_luminance(overlay.overlay_color);
    const AlphaSolution solution = solve_alpha(lums, l_overlay, l_text, params);

    overlay.solved_alpha_star = solution.alpha_star;
    overlay.attained_coverage = solution.attained_coverage;
    overlay.unattainable = solution.unattainable;
    overlay.alpha = finalize_alpha(solution.alpha_star, params);
    return overlay;
}

double overlay_pixel_coverage(const BackingOverlay& overlay, int x, int y) {
    const BBox& box = overlay.box;
    const double r =
        std::min(overlay.corner_radius, 0.5 * std::min(box.width(), box.height()));
    const double px0 = x;
    const double py0 = y;
    const double px1 = x + 1.0;
    const double py1 = y + 1.0;

    if (px1 <= box.x0 || px0 >= box.x1 || py1 <= box.y0 || py0 >= box.y1) return 0.0;

    // The rounded rectangle is convex, so a pixel whose four corners are
    // inside is fully covered.
    if (point_in_rounded_rect(box, r, px0, py0) && point_in_rounded_rect(box, r, px1, py0) &&
        point_in_rounded_rect(box, r, px0, py1) && point_in_rounded_rect(box, r, px1, py1)) {
        return 1.0;
    }

    // 4x supersampling along each axis on boundary pixels.
    int inside = 0;
    for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) {
            const double sample_x = px0 + (sx + 0.5) / 4.0;
            const double sample_y = py0 + (sy + 0.5) / 4.0;
            if (point_in_rounded_rect(box, r, sample_x, sample_y)) ++inside;
        }
    }
    return inside / 16.0;
}

raster::RasterImage composite_overlays(const raster::RasterImage& background,
                                       const std::vector<BackingOverlay>& overlays) {
    raster::RasterImage out = background;
    for (const auto& overlay : overlays) {
        const double o_lin[3] = {color::srgb_to_linear(overlay.overlay_color.r),
                                 color::srgb_to_linear(overlay.overlay_color.g),
                                 color::srgb_to_linear(overlay.overlay_color.b)};
        const int xi0 = std::max(0, static_cast<int>(std::floor(overlay.box.x0)));
        const int yi0 = std::max(0, static_cast<int>(std::floor(overlay.box.y0)));
        const int xi1 = std::min(out.width, static_cast<int>(std::ceil(overlay.box.x1)));
        const int yi1 = std::min(out.height, static_cast<int>(std::ceil(overlay.box.y1)));
        for (int y = yi0; y < yi1; ++y) {
            for (int x = xi0; x < xi1; ++x) {
                const double coverage = overlay_pixel_coverage(overlay, x, y);
                if (coverage <= 0.0) continue;
                const double a = overlay.alpha * coverage;
                double* p = out.at(x, y);
                if (a >= 1.0) {
                    p[0] = overlay.overlay_color.r;
                    p[1] = overlay.overlay_color.g;
                    p[2] = overlay.overlay_color.b;
                    p[3] = 1.0;
                    continue;
                }
                // Blend in linear light: the solved opacity then carries
                // over exactly to the luminance of the composited pixel.
                for (int c = 0; c < 3; ++c) {
                    const double blended = a * o_lin[c] + (1.0 - a) * color::srgb_to_linear(p[c]);
                    p[c] = color::linear_to_srgb(blended);
                }
                p[3] = a + (1.0 - a) * p[3];
            }
        }
    }
    return out;
}

}  // namespace docback::aro
