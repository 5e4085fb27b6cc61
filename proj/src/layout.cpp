#include "docback/layout.hpp"

#include <algorithm>
#include <numeric>

namespace docback::layout {

namespace {

// Reading order: top-to-bottom, then left-to-right.
bool reading_less(const BBox& a, const BBox& b) {
    if (a.y0 != b.y0) return a.y0 < b.y0;
    if (a.x0 != b.x0) return a.x0 < b.x0;
    if (a.y1 != b.y1) return a.y1 < b.y1;
    return a.x1 < b.x1;
}

struct DisjointSet {
    std::vector<int> parent;

    explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    int find(int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }

    void unite(int a, int b) { parent[find(a)] = find(b); }
};

Region make_region(const std::vector<TextLine>& lines, std::vector<int> member_ids) {
    std::sort(member_ids.begin(), member_ids.end(), [&](int a, int b) {
        if (reading_less(lines[a].bbox, lines[b].bbox)) return true;
        if (reading_less(lines[b].bbox, lines[a].bbox)) return false;
        return a < b;  // duplicate boxes keep input order
    });
    Region region;
    region.bbox = lines[member_ids.front()].bbox;
    for (int id : member_ids) {
        region.bbox = box_union(region.bbox, lines[id].bbox);
        if (lines[id].text.empty()) continue;
        if (!region.text.empty()) region.text += ' ';
        region.text += lines[id].text;
    }
    region.member_line_ids = std::move(member_ids);
    return region;
}

Region merge_regions(std::vector<const Region*> members) {
    std::sort(members.begin(), members.end(), [](const Region* a, const Region* b) {
        if (reading_less(a->bbox, b->bbox)) return true;
        if (reading_less(b->bbox, a->bbox)) return false;
        return a->member_line_ids.front() < b->member_line_ids.front();
    });
    Region merged;
    merged.bbox = members.front()->bbox;
    for (const Region* r : members) {
        merged.bbox = box_union(merged.bbox, r->bbox);
        if (!r->text.empty()) {
            if (!merged.text.empty()) merged.text += ' ';
            merged.text += r->text;
        }
        merged.member_line_ids.insert(merged.member_line_ids.end(),
                                      r->member_line_ids.begin(), r->member_line_ids.end());
    }
    return merged;
}

}  // namespace

double overlap_x(const BBox& a, const BBox& b) {
    const double inter = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double denom = std::max(1.0, std::min(a.width(), b.width()));
    return std::max(0.0, inter) / denom;
}

double effective_max_vgap(const std::vector<TextLine>& lines, const ExtractionParams& params) {
    if (params.max_vgap) return *params.max_vgap;
    if (lines.empty()) return 0.0;
    std::vector<double> heights;
    heights.reserve(lines.size());
    for (const auto& line : lines) heights.push_back(line.bbox.height());
    auto mid = heights.begin() + static_cast<std::ptrdiff_t>(heights.size() / 2);
    std::nth_element(heights.begin(), mid, heights.end());
    double median = *mid;
    if (heights.size() % 2 == 0) {
        std::nth_element(heights.begin(), mid - 1, heights.end());
        median = 0.5 * (median + *(mid - 1));
    }
    return 1.5 * median;
}

std::vector<Region> group_paragraphs(const std::vector<TextLine>& lines,
                                     const ExtractionParams& params) {
    if (lines.empty()) return {};
    const double max_vgap = effective_max_vgap(lines, params);

    std::vector<int> order(lines.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (reading_less(lines[a].bbox, lines[b].bbox)) return true;
        if (reading_less(lines[b].bbox, lines[a].bbox)) return false;
        return a < b;
    });

    std::vector<std::vector<int>> paragraphs;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const int id = order[pos];
        bool joined = false;
        if (!paragraphs.empty()) {
            const BBox& prev = lines[paragraphs.back().back()].bbox;
            const BBox& cur = lines[id].bbox;
            const bool margins_agree = std::abs(cur.x0 - prev.x0) <= params.left_margin_tol;
            const bool gap_ok = (cur.y0 - prev.y1) <= max_vgap;
            if (margins_agree && gap_ok) {
                paragraphs.back().push_back(id);
                joined = true;
            }
        }
        if (!joined) paragraphs.push_back({id});
    }

    std::vector<Region> regions;
    regions.reserve(paragraphs.size());
    for (auto& member_ids : paragraphs) regions.push_back(make_region(lines, member_ids));
    return regions;
}

PartitionGroups partition_by_images(const std::vector<Region>& paragraphs,
                                    const std::vector<ImageZone>& images,
                                    const PageLayout&) {
    PartitionGroups groups;
    if (images.empty()) {
        groups.top = paragraphs;
        return groups;
    }
    double ext_y0 = images.front().bbox.y0;
    double ext_y1 = images.front().bbox.y1;
    for (const auto& img : images) {
        ext_y0 = std::min(ext_y0, img.bbox.y0);
        ext_y1 = std::max(ext_y1, img.bbox.y1);
    }
    for (const auto& region : paragraphs) {
        const double cy = 0.5 * (region.bbox.y0 + region.bbox.y1);
        if (cy < ext_y0) {
            groups.top.push_back(region);
        } else if (cy > ext_y1) {
            groups.bottom.push_back(region);
        } else {
            groups.side.push_back(region);
        }
    }
    return groups;
}

std::vector<Region> merge_columns(const std::vector<Region>& group,
                                  const ExtractionParams& params,
                                  double resolved_max_vgap) {
    if (group.empty()) return {};

    // Canonical order makes the closure independent of input permutation.
    std::vector<const Region*> sorted;
    sorted.reserve(group.size());
    for (const auto& r : group) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const Region* a, const Region* b) {
        return reading_less(a->bbox, b->bbox);
    });

    const int n = static_cast<int>(sorted.size());
    DisjointSet sets(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const BBox& a = sorted[i]->bbox;
            const BBox& b = sorted[j]->bbox;
            if (overlap_x(a, b) >= params.eta_x && vertical_gap(a, b) <= resolved_max_vgap) {
                sets.unite(i, j);
            }
        }
    }

    std::vector<std::vector<const Region*>> components(n);
    for (int i = 0; i < n; ++i) components[sets.find(i)].push_back(sorted[i]);

    std::vector<Region> merged;
    for (auto& members : components) {
        if (!members.empty()) merged.push_back(merge_regions(std::move(members)));
    }
    std::sort(merged.begin(), merged.end(),
              [](const Region& a, const Region& b) { return reading_less(a.bbox, b.bbox); });
    return merged;
}

std::vector<Region> suppress(const std::vector<Region>& regions,
                             const ExtractionParams& params) {
    std::vector<const Region*> by_area;
    by_area.reserve(regions.size());
    for (const auto& r : regions) by_area.push_back(&r);
    std::sort(by_area.begin(), by_area.end(), [](const Region* a, const Region* b) {
        const double aa = a->bbox.area();
        const double ab = b->bbox.area();
        if (aa != ab) return aa > ab;
        return reading_less(a->bbox, b->bbox);
    });

    std::vector<const Region*> kept;
    for (const Region* candidate : by_area) {
        bool drop = false;
        for (const Region* survivor : kept) {
            const double inter = intersection_area(candidate->bbox, survivor->bbox);
            const double min_area = std::min(candidate->bbox.area(), survivor->bbox.area());
            const double containment = min_area > 0.0 ? inter / min_area : 0.0;
            if (containment >= params.tau_cont || iou(candidate->bbox, survivor->bbox) >= params.tau_iou) {
                drop = true;
                break;
            }
        }
        if (!drop) kept.push_back(candidate);
    }

    std::sort(kept.begin(), kept.end(), [](const Region* a, const Region* b) {
        return reading_less(a->bbox, b->bbox);
    });
    std::vector<Region> result;
    result.reserve(kept.size());
    for (const Region* r : kept) result.push_back(*r);
    return result;
}

PageExtract extract(const PageLayout& page, const ExtractionParams& params) {
    PageExtract out;

    // Clamp everything to the page; lines fully outside degenerate and are dropped.
    std::vector<TextLine> lines;
    lines.reserve(page.lines.size());
    for (const auto& line : page.lines) {
        TextLine clamped{line.bbox.clamped(page.width, page.height), line.text};
        if (clamped.bbox.valid()) lines.push_back(std::move(clamped));
    }
    std::vector<ImageZone> images;
    images.reserve(page.images.size());
    for (const auto& img : page.images) {
        ImageZone clamped{img.bbox.clamped(page.width, page.height)};
        if (clamped.bbox.valid()) images.push_back(clamped);
    }

    std::vector<int> order(lines.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (reading_less(lines[a].bbox, lines[b].bbox)) return true;
        if (reading_less(lines[b].bbox, lines[a].bbox)) return false;
        return a < b;
    });
    for (int id : order) {
        out.text_boxes.push_back(lines[id].bbox);
        if (lines[id].text.empty()) continue;
        if (!out.page_text.empty()) out.page_text += ' ';
        out.page_text += lines[id].text;
    }

    const double max_vgap = effective_max_vgap(lines, params);
    const auto paragraphs = group_paragraphs(lines, params);
    const auto groups = partition_by_images(paragraphs, images, page);

    std::vector<Region> columns;
    for (const auto* group : {&groups.top, &groups.side, &groups.bottom}) {
        auto merged = merge_columns(*group, params, max_vgap);
        columns.insert(columns.end(), std::make_move_iterator(merged.begin()),
                       std::make_move_iterator(merged.end()));
    }
    out.regions = suppress(columns, params);

    for (const auto& region : out.regions) out.representative_boxes.push_back(region.bbox);
    if (params.include_image_zones) {
        for (const auto& img : images) out.representative_boxes.push_back(img.bbox);
    }
    return out;
}

}  // namespace docback::layout
