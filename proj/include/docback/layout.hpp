#pragma once

#include <optional>
#include <string>
#include <vector>

#include "docback/geometry.hpp"

namespace docback::layout {

/// One detected text line: its box plus the extracted text.
struct TextLine {
    BBox bbox;
    std::string text;
};

struct ImageZone {
    BBox bbox;
};

/// Layout context for a single page. Boxes are in page points with the
/// origin at the top-left corner.
struct PageLayout {
    int page_index = 0;
    double width = 0.0;
    double height = 0.0;
    std::vector<TextLine> lines;
    std::vector<ImageZone> images;
};

/// A merged text block: the union box of its member lines plus their
/// concatenated text, in reading order.
struct Region {
    BBox bbox;
    std::string text;
    std::vector<int> member_line_ids;
};

/// Thresholds controlling grouping, column merging and suppression.
/// When max_vgap is unset it resolves to 1.5x the median line height of
/// the page being processed.
struct ExtractionParams {
    double eta_x = 0.5;                   // horizontal-overlap threshold
    std::optional<double> max_vgap;       // points; nullopt = adaptive
    double left_margin_tol = 4.0;         // points
    double tau_cont = 0.9;                // containment suppression
    double tau_iou = 0.5;                 // IoU suppression
    bool include_image_zones = true;      // image boxes join the protected set
};

/// Paragraphs split vertically around the image zones: above all images,
/// within their vertical extent, and below. With no images every
/// paragraph lands in `top`.
struct PartitionGroups {
    std::vector<Region> top;
    std::vector<Region> side;
    std::vector<Region> bottom;
};

struct PageExtract {
    std::vector<BBox> text_boxes;            // per-line, for backing overlays
    std::vector<BBox> representative_boxes;  // merged regions (+ image zones)
    std::string page_text;
    std::vector<Region> regions;             // surviving merged regions
};

/// Horizontal overlap of two boxes, normalized by the smaller width with
/// a 1-point floor on the denominator. Symmetric, in [0,1].
double overlap_x(const BBox& a, const BBox& b);

/// Resolved vertical-gap tolerance for a set of lines.
double effective_max_vgap(const std::vector<TextLine>& lines, const ExtractionParams& params);

/// Group lines into paragraphs: consecutive lines in reading order join
/// when their left margins agree within tolerance and the vertical gap
/// stays within max_vgap. Region boxes are exact unions of member boxes.
std::vector<Region> group_paragraphs(const std::vector<TextLine>& lines,
                                     const ExtractionParams& params);

PartitionGroups partition_by_images(const std::vector<Region>& paragraphs,
                                    const std::vector<ImageZone>& images,
                                    const PageLayout& page);

/// Merge regions of one vertical group into column-like blocks: the
/// transitive closure of {overlap_x >= eta_x and vertical gap <= max_vgap}.
/// max_vgap here must already be resolved (pass effective_max_vgap).
std::vector<Region> merge_columns(const std::vector<Region>& group,
                                  const ExtractionParams& params,
                                  double resolved_max_vgap);

/// NMS-like suppression: walking candidates by descending area, drop a
/// region that is largely contained in (or heavily overlaps) a larger
/// survivor. Survivors come back in reading order.
std::vector<Region> suppress(const std::vector<Region>& regions,
                             const ExtractionParams& params);

/// Full extraction for one page: raw line boxes, surviving representative
/// boxes and the page text. Input boxes are clamped to the page first.
PageExtract extract(const PageLayout& page, const ExtractionParams& params);

}  // namespace docback::layout
