#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "docback/layout.hpp"

namespace docback::layout {

/// Parse the page-layout interchange document:
///   { "pages": [ { "index", "width", "height",
///                  "lines":  [{"bbox":[x0,y0,x1,y1], "text"}],
///                  "images": [{"bbox":[...]}] } ] }
/// Validation failures raise ValidationError naming the offending path,
/// e.g. "pages[1].lines[3].bbox".
std::vector<PageLayout> parse_layout(const nlohmann::json& doc);

/// Load and parse a layout interchange file from disk.
std::vector<PageLayout> load_layout_file(const std::string& path);

nlohmann::json layout_to_json(const std::vector<PageLayout>& pages);

}  // namespace docback::layout
