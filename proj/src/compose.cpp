#include "docback/compose.hpp"

#include <cmath>

#include "docback/errors.hpp"

namespace docback::compose {

raster::RasterImage compose_page(const PageLayers& layers) {
    if (layers.foreground && (layers.foreground->width != layers.background.width ||
                              layers.foreground->height != layers.background.height)) {
        throw Error("compose: foreground dimensions do not match the background");
    }

    raster::RasterImage out = aro::composite_overlays(layers.background, layers.backings);
    if (!layers.foreground) return out;

    const raster::RasterImage& fg = *layers.foreground;
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        const double* src = fg.px.data() + 4 * i;
        double* dst = out.px.data() + 4 * i;
        const double a = src[3];
        if (a <= 0.0) continue;
        if (a >= 1.0) {
            dst[0] = src[0];
            dst[1] = src[1];
            dst[2] = src[2];
            dst[3] = 1.0;
            continue;
        }
        for (int c = 0; c < 3; ++c) {
            const double blended = a * color::srgb_to_linear(src[c]) +
                                   (1.0 - a) * color::srgb_to_linear(dst[c]);
            dst[c] = color::linear_to_srgb(blended);
        }
        dst[3] = a + (1.0 - a) * dst[3];
    }
    return out;
}

ReadabilityReport evaluate_wcag(const raster::RasterImage& composited,
                                const std::vector<BBox>& text_boxes,
                                const color::Srgb& text_color, double threshold,
                                double coverage) {
    ReadabilityReport report;
    report.threshold = threshold;
    report.coverage = coverage;
    if (text_boxes.empty()) {
        report.empty_boxes_warning = true;
        return report;
    }

    const double l_text = color::relative_luminance(text_color);
    std::size_t total_pixels = 0;
    std::size_t total_passing = 0;
    std::size_t boxes_passing = 0;

    for (const BBox& box : text_boxes) {
        const int xi0 = std::max(0, static_cast<int>(std::floor(box.x0)));
        const int yi0 = std::max(0, static_cast<int>(std::floor(box.y0)));
        const int xi1 = std::min(composited.width, static_cast<int>(std::ceil(box.x1)));
        const int yi1 = std::min(composited.height, static_cast<int>(std::ceil(box.y1)));

        BoxReadability entry;
        entry.box = box;
        std::size_t pixels = 0;
        std::size_t passing = 0;
        double min_cr = 21.0;
        for (int y = yi0; y < yi1; ++y) {
            for (int x = xi0; x < xi1; ++x) {
                const double l = color::relative_luminance(composited.rgb_at(x, y));
                const double cr = color::contrast_ratio(l, l_text);
                min_cr = std::min(min_cr, cr);
                ++pixels;
                if (cr >= threshold) ++passing;
            }
        }
        if (pixels == 0) {
            // Box entirely outside the raster: nothing to measure, counts as failing.
            entry.min_contrast = 0.0;
            entry.coverage_at_threshold = 0.0;
            entry.pass = false;
        } else {
            entry.min_contrast = min_cr;
            entry.coverage_at_threshold = static_cast<double>(passing) / pixels;
            entry.pass = entry.coverage_at_threshold >= coverage;
        }
        if (entry.pass) ++boxes_passing;
        total_pixels += pixels;
        total_passing += passing;
        report.per_box.push_back(entry);
    }

    report.page_pass_rate = static_cast<double>(boxes_passing) / text_boxes.size();
    report.pixel_pass_rate =
        total_pixels ? static_cast<double>(total_passing) / total_pixels : 0.0;
    return report;
}

nlohmann::json ReadabilityReport::to_json() const {
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& entry : per_box) {
        boxes.push_back({{"box", {entry.box.x0, entry.box.y0, entry.box.x1, entry.box.y1}},
                         {"min_contrast", entry.min_contrast},
                         {"coverage_at_threshold", entry.coverage_at_threshold},
                         {"pass", entry.pass}});
    }
    return nlohmann::json{{"threshold", threshold},
                          {"coverage", coverage},
                          {"per_box", boxes},
                          {"page_pass_rate", page_pass_rate},
                          {"pixel_pass_rate", pixel_pass_rate},
                          {"empty_boxes_warning", empty_boxes_warning}};
}

}  // namespace docback::compose
