#include "docback/layout_io.hpp"

#include <fstream>

#include "docback/errors.hpp"

namespace docback::layout {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ValidationError("layout: " + path + ": " + what);
}

double require_finite_number(const json& node, const std::string& path) {
    if (!node.is_number()) fail(path, "expected a number");
    const double v = node.get<double>();
    if (!std::isfinite(v)) fail(path, "value is not finite");
    return v;
}

BBox parse_bbox(const json& node, const std::string& path) {
    if (!node.is_array() || node.size() != 4) fail(path, "expected [x0, y0, x1, y1]");
    BBox box{require_finite_number(node[0], path), require_finite_number(node[1], path),
             require_finite_number(node[2], path), require_finite_number(node[3], path)};
    if (!box.valid()) fail(path, "degenerate box (needs x1 > x0 and y1 > y0)");
    return box;
}

PageLayout parse_page(const json& node, const std::string& path) {
    if (!node.is_object()) fail(path, "expected an object");
    PageLayout page;

    if (!node.contains("index") || !node["index"].is_number_integer()) {
        fail(path + ".index", "missing integer page index");
    }
    page.page_index = node["index"].get<int>();
    if (page.page_index < 0) fail(path + ".index", "page index must be >= 0");

    page.width = require_finite_number(node.value("width", json()), path + ".width");
    page.height = require_finite_number(node.value("height", json()), path + ".height");
    if (page.width <= 0.0 || page.height <= 0.0) {
        fail(path, "page dimensions must be positive");
    }

    if (node.contains("lines")) {
        const json& lines = node["lines"];
        if (!lines.is_array()) fail(path + ".lines", "expected an array");
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const std::string lpath = path + ".lines[" + std::to_string(i) + "]";
            const json& line = lines[i];
            if (!line.is_object() || !line.contains("bbox")) fail(lpath, "missing bbox");
            TextLine text_line;
            text_line.bbox = parse_bbox(line["bbox"], lpath + ".bbox");
            if (line.contains("text")) {
                if (!line["text"].is_string()) fail(lpath + ".text", "expected a string");
                text_line.text = line["text"].get<std::string>();
            }
            page.lines.push_back(std::move(text_line));
        }
    }

    if (node.contains("images")) {
        const json& images = node["images"];
        if (!images.is_array()) fail(path + ".images", "expected an array");
        for (std::size_t i = 0; i < images.size(); ++i) {
            const std::string ipath = path + ".images[" + std::to_string(i) + "]";
            const json& image = images[i];
            if (!image.is_object() || !image.contains("bbox")) fail(ipath, "missing bbox");
            page.images.push_back(ImageZone{parse_bbox(image["bbox"], ipath + ".bbox")});
        }
    }
    return page;
}

}  // namespace

std::vector<PageLayout> parse_layout(const json& doc) {
    if (!doc.is_object() || !doc.contains("pages") || !doc["pages"].is_array()) {
        throw ValidationError("layout: missing \"pages\" array");
    }
    const json& pages = doc["pages"];
    if (pages.empty()) throw ValidationError("layout: no pages");

    std::vector<PageLayout> result;
    result.reserve(pages.size());
    for (std::size_t i = 0; i < pages.size(); ++i) {
        result.push_back(parse_page(pages[i], "pages[" + std::to_string(i) + "]"));
    }
    return result;
}

std::vector<PageLayout> load_layout_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("layout: cannot open '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("layout: '" + path + "': " + e.what());
    }
    return parse_layout(doc);
}

nlohmann::json layout_to_json(const std::vector<PageLayout>& pages) {
    json out;
    out["pages"] = json::array();
    for (const auto& page : pages) {
        json p;
        p["index"] = page.page_index;
        p["width"] = page.width;
        p["height"] = page.height;
        p["lines"] = json::array();
        for (const auto& line : page.lines) {
            p["lines"].push_back({{"bbox", {line.bbox.x0, line.bbox.y0, line.bbox.x1, line.bbox.y1}},
                                  {"text", line.text}});
        }
        p["images"] = json::array();
        for (const auto& img : page.images) {
            p["images"].push_back({{"bbox", {img.bbox.x0, img.bbox.y0, img.bbox.x1, img.bbox.y1}}});
        }
        out["pages"].push_back(std::move(p));
    }
    return out;
}

}  // namespace docback::layout
