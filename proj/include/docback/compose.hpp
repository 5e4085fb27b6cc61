#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "docback/aro.hpp"
#include "docback/raster.hpp"

namespace docback::compose {

/// One page as separable layers: generated background, readability
/// backings, optional pre-rendered foreground (text + figures).
struct PageLayers {
    raster::RasterImage background;
    std::vector<aro::BackingOverlay> backings;
    std::optional<raster::RasterImage> foreground;
};

struct BoxReadability {
    BBox box;
    double min_contrast = 0.0;
    double coverage_at_threshold = 0.0;
    bool pass = false;
};

/// WCAG contrast coverage over the page. A box passes when at least
/// `coverage` of its pixels meet the threshold; the report carries both
/// the box-level pass rate and the raw pixel-level rate.
struct ReadabilityReport {
    std::vector<BoxReadability> per_box;
    double page_pass_rate = 1.0;
    double pixel_pass_rate = 1.0;
    double threshold = 4.5;
    double coverage = 0.98;
    bool empty_boxes_warning = false;

    nlohmann::json to_json() const;
};

/// Source-over the layers in order: background, backings, foreground.
raster::RasterImage compose_page(const PageLayers& layers);

/// Contrast-ratio coverage of each text box against the text luminance,
/// sampled from the composited raster.
ReadabilityReport evaluate_wcag(const raster::RasterImage& composited,
                                const std::vector<BBox>& text_boxes,
                                const color::Srgb& text_color, double threshold = 4.5,
                                double coverage = 0.98);

}  // namespace docback::compose
