#include "docback/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "docback/compose.hpp"
#include "docback/errors.hpp"
#include "docback/layout_io.hpp"
#include "docback/util.hpp"

namespace fs = std::filesystem;

namespace docback::pipeline {

namespace {

using nlohmann::json;

constexpr int kManifestFormatVersion = 1;
constexpr double kWcagThreshold = 4.5;

void write_json_file(const fs::path& path, const json& doc) {
    util::write_file(path.string(), doc.dump(2) + "\n");
}

json load_json_file(const fs::path& path) {
    if (!fs::exists(path)) throw ValidationError("missing file '" + path.string() + "'");
    try {
        return json::parse(util::read_file(path.string()));
    } catch (const json::parse_error& e) {
        throw ValidationError("'" + path.string() + "': " + e.what());
    }
}

std::string page_dir_name(int page_index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "page_%03d", page_index);
    return buf;
}

std::string background_file_name(int page_index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "page_%03d.png", page_index);
    return buf;
}

json box_to_json(const BBox& box) { return json::array({box.x0, box.y0, box.x1, box.y1}); }

json color_to_json(const color::Srgb& c) { return json::array({c.r, c.g, c.b}); }

color::Srgb color_from_json(const json& node) {
    return {node[0].get<double>(), node[1].get<double>(), node[2].get<double>()};
}

std::uint64_t raster_pixel_hash(const raster::RasterImage& img) {
    auto bytes = raster::to_rgba8(img);
    bytes.push_back(static_cast<std::uint8_t>(img.width & 0xFF));
    bytes.push_back(static_cast<std::uint8_t>((img.width >> 8) & 0xFF));
    bytes.push_back(static_cast<std::uint8_t>(img.height & 0xFF));
    bytes.push_back(static_cast<std::uint8_t>((img.height >> 8) & 0xFF));
    return util::fnv1a64(bytes);
}

json artifact_entry(const std::string& rel_path, std::uint64_t hash) {
    return json{{"path", rel_path}, {"hash", util::hex64(hash)}};
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    int pool_size = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
    pool_size = std::clamp(pool_size, 1, n);
    if (pool_size == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(pool_size);
    for (int t = 0; t < pool_size; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& thread : pool) thread.join();
    if (first_error) std::rethrow_exception(first_error);
}

double bilinear_at(const latent::LatentState& state, double row, double col, int channel) {
    const int h = state.shape.h;
    const int w = state.shape.w;
    const double r = std::clamp(row, 0.0, static_cast<double>(h - 1));
    const double c = std::clamp(col, 0.0, static_cast<double>(w - 1));
    const int r0 = static_cast<int>(std::floor(r));
    const int c0 = static_cast<int>(std::floor(c));
    const int r1 = std::min(r0 + 1, h - 1);
    const int c1 = std::min(c0 + 1, w - 1);
    const double fr = r - r0;
    const double fc = c - c0;
    const double top = (1.0 - fc) * state.value(r0, c0, channel) + fc * state.value(r0, c1, channel);
    const double bottom =
        (1.0 - fc) * state.value(r1, c0, channel) + fc * state.value(r1, c1, channel);
    return (1.0 - fr) * top + fr * bottom;
}

// ---------------------------------------------------------------------------
// Per-page rendering shared by run_pipeline and refine_page.

struct PageRecord {
    int page_index = 0;
    std::size_t text_boxes = 0;
    std::size_t representative_boxes = 0;
    std::string instruction;
    std::string summary;
    int unattainable_boxes = 0;
    double page_pass_rate = 1.0;
    double pixel_pass_rate = 1.0;
    json artifacts = json::object();
};

PageRecord render_page(const layout::PageLayout& page, const layout::PageExtract& extracted,
                       const std::string& instruction, const std::string& summary_joined,
                       const PipelineConfig& config,
                       const std::optional<std::string>& backgrounds_dir,
                       const fs::path& run_dir) {
    PageRecord record;
    record.page_index = page.page_index;
    record.text_boxes = extracted.text_boxes.size();
    record.representative_boxes = extracted.representative_boxes.size();
    record.instruction = instruction;
    record.summary = summary_joined;

    const fs::path page_dir = run_dir / "pages" / page_dir_name(page.page_index);
    fs::create_directories(page_dir);
    const std::string rel_dir = "pages/" + page_dir_name(page.page_index);

    raster::RasterImage background;
    double scale_x = config.render.pixels_per_point;
    double scale_y = config.render.pixels_per_point;
    if (backgrounds_dir) {
        const fs::path source = fs::path(*backgrounds_dir) / background_file_name(page.page_index);
        if (!fs::exists(source)) {
            throw ValidationError("background missing for page " +
                                  std::to_string(page.page_index) + ": " + source.string());
        }
        background = raster::read_png(source.string());
        scale_x = background.width / page.width;
        scale_y = background.height / page.height;
    } else {
        latent::AttenuationMask mask;
        std::vector<latent::StepTrace> trace;
        background = toy_background(page.width, page.height, extracted.representative_boxes,
                                    instruction, page.page_index, config.mask, config.render,
                                    &mask, &trace);

        const json mask_doc = latent::mask_to_json(mask);
        write_json_file(page_dir / "mask.json", mask_doc);
        record.artifacts["mask"] =
            artifact_entry(rel_dir + "/mask.json", util::fnv1a64(mask_doc.dump(2) + "\n"));
        raster::write_gray_png(mask.values, mask.shape.w, mask.shape.h,
                               (page_dir / "mask.png").string());

        const json trace_doc = latent::trace_to_json(trace);
        write_json_file(page_dir / "trace.json", trace_doc);
        record.artifacts["trace"] =
            artifact_entry(rel_dir + "/trace.json", util::fnv1a64(trace_doc.dump(2) + "\n"));
    }

    raster::write_png(background, (page_dir / "background.png").string());
    record.artifacts["background"] =
        artifact_entry(rel_dir + "/background.png", raster_pixel_hash(background));

    // Text boxes in raster pixels.
    std::vector<BBox> pixel_boxes;
    pixel_boxes.reserve(extracted.text_boxes.size());
    for (const BBox& box : extracted.text_boxes) {
        pixel_boxes.push_back(
            BBox{box.x0 * scale_x, box.y0 * scale_y, box.x1 * scale_x, box.y1 * scale_y});
    }

    std::vector<aro::BackingOverlay> overlays;
    overlays.reserve(pixel_boxes.size());
    json overlay_entries = json::array();
    for (const BBox& box : pixel_boxes) {
        const auto overlay =
            aro::build_overlay(box, config.render.text_color, background, config.aro);
        overlay_entries.push_back({{"text_box", box_to_json(box)},
                                   {"backing_box", box_to_json(overlay.box)},
                                   {"corner_radius", overlay.corner_radius},
                                   {"overlay_color", color_to_json(overlay.overlay_color)},
                                   {"alpha_star", overlay.solved_alpha_star},
                                   {"alpha", overlay.alpha},
                                   {"attained_coverage", overlay.attained_coverage},
                                   {"unattainable", overlay.unattainable}});
        if (overlay.unattainable) ++record.unattainable_boxes;
        overlays.push_back(overlay);
    }
    const json overlays_doc = {{"page_index", page.page_index},
                               {"text_color", color_to_json(config.render.text_color)},
                               {"target_contrast", config.aro.target_contrast},
                               {"coverage", config.aro.coverage},
                               {"overlays", overlay_entries}};
    write_json_file(page_dir / "overlays.json", overlays_doc);
    record.artifacts["overlays"] =
        artifact_entry(rel_dir + "/overlays.json", util::fnv1a64(overlays_doc.dump(2) + "\n"));

    compose::PageLayers layers;
    layers.background = background;
    layers.backings = overlays;
    const auto composed = compose::compose_page(layers);
    raster::write_png(composed, (page_dir / "composed.png").string());
    record.artifacts["composed"] =
        artifact_entry(rel_dir + "/composed.png", raster_pixel_hash(composed));

    const auto report = compose::evaluate_wcag(composed, pixel_boxes, config.render.text_color,
                                               kWcagThreshold, config.aro.coverage);
    const json report_doc = report.to_json();
    write_json_file(page_dir / "readability.json", report_doc);
    record.artifacts["readability"] =
        artifact_entry(rel_dir + "/readability.json", util::fnv1a64(report_doc.dump(2) + "\n"));
    record.page_pass_rate = report.page_pass_rate;
    record.pixel_pass_rate = report.pixel_pass_rate;
    return record;
}

json page_record_to_json(const PageRecord& record) {
    return json{{"index", record.page_index},
                {"dir", "pages/" + page_dir_name(record.page_index)},
                {"text_box_count", record.text_boxes},
                {"representative_box_count", record.representative_boxes},
                {"instruction", record.instruction},
                {"summary", record.summary},
                {"unattainable_boxes", record.unattainable_boxes},
                {"page_pass_rate", record.page_pass_rate},
                {"pixel_pass_rate", record.pixel_pass_rate},
                {"artifacts", record.artifacts}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration.

PipelineConfig PipelineConfig::from_json(const json& doc) {
    if (!doc.is_object()) throw ValidationError("config: expected an object");
    PipelineConfig config;

    if (doc.contains("extraction")) {
        const json& e = doc["extraction"];
        config.extraction.eta_x = e.value("eta_x", config.extraction.eta_x);
        if (e.contains("max_vgap") && !e["max_vgap"].is_null()) {
            config.extraction.max_vgap = e["max_vgap"].get<double>();
        }
        config.extraction.left_margin_tol =
            e.value("left_margin_tol", config.extraction.left_margin_tol);
        config.extraction.tau_cont = e.value("tau_cont", config.extraction.tau_cont);
        config.extraction.tau_iou = e.value("tau_iou", config.extraction.tau_iou);
        config.extraction.include_image_zones =
            e.value("include_image_zones", config.extraction.include_image_zones);
    }
    if (doc.contains("aro")) {
        const json& a = doc["aro"];
        config.aro.target_contrast = a.value("target_contrast", config.aro.target_contrast);
        config.aro.coverage = a.value("coverage", config.aro.coverage);
        config.aro.padding = a.value("padding", config.aro.padding);
        config.aro.radius_fraction = a.value("radius_fraction", config.aro.radius_fraction);
        config.aro.epsilon = a.value("epsilon", config.aro.epsilon);
        config.aro.alpha_min = a.value("alpha_min", config.aro.alpha_min);
        config.aro.alpha_step = a.value("alpha_step", config.aro.alpha_step);
    }
    if (doc.contains("mask")) {
        const json& m = doc["mask"];
        config.mask.lambda = m.value("lambda", config.mask.lambda);
        config.mask.start_fraction = m.value("start_fraction", config.mask.start_fraction);
        config.mask.mode = m.value("mode", config.mask.mode);
        config.mask.steps = m.value("steps", config.mask.steps);
        config.mask.source = m.value("source", config.mask.source);
        config.mask.rho_mask = m.value("rho_mask", config.mask.rho_mask);
        if (m.contains("lattice")) {
            config.mask.lattice.h = m["lattice"].value("h", config.mask.lattice.h);
            config.mask.lattice.w = m["lattice"].value("w", config.mask.lattice.w);
            config.mask.lattice.channels =
                m["lattice"].value("channels", config.mask.lattice.channels);
        }
    }
    if (doc.contains("narrative")) {
        const json& n = doc["narrative"];
        config.narrative.window_n = n.value("window_n", config.narrative.window_n);
        config.narrative.mode = n.value("mode", config.narrative.mode);
        config.narrative.provider = n.value("provider", config.narrative.provider);
        config.narrative.provider_config =
            n.value("provider_config", config.narrative.provider_config);
    }
    if (doc.contains("render")) {
        const json& r = doc["render"];
        config.render.pixels_per_point =
            r.value("pixels_per_point", config.render.pixels_per_point);
        if (r.contains("text_color")) config.render.text_color = color_from_json(r["text_color"]);
        config.render.seed = r.value("seed", config.render.seed);
        config.render.workers = r.value("workers", config.render.workers);
    }
    return config;
}

PipelineConfig PipelineConfig::load_file(const std::string& path) {
    return from_json(load_json_file(path));
}

json PipelineConfig::to_json() const {
    json doc;
    doc["extraction"] = {
        {"eta_x", this->extraction.eta_x},
        {"max_vgap", this->extraction.max_vgap ? json(*this->extraction.max_vgap) : json()},
        {"left_margin_tol", this->extraction.left_margin_tol},
        {"tau_cont", this->extraction.tau_cont},
        {"tau_iou", this->extraction.tau_iou},
        {"include_image_zones", this->extraction.include_image_zones}};
    doc["aro"] = {{"target_contrast", aro.target_contrast},
                  {"coverage", aro.coverage},
                  {"padding", aro.padding},
                  {"radius_fraction", aro.radius_fraction},
                  {"epsilon", aro.epsilon},
                  {"alpha_min", aro.alpha_min},
                  {"alpha_step", aro.alpha_step}};
    doc["mask"] = {{"lambda", mask.lambda},
                   {"start_fraction", mask.start_fraction},
                   {"mode", mask.mode},
                   {"steps", mask.steps},
                   {"source", mask.source},
                   {"rho_mask", mask.rho_mask},
                   {"lattice",
                    {{"h", mask.lattice.h}, {"w", mask.lattice.w}, {"channels", mask.lattice.channels}}}};
    doc["narrative"] = {{"window_n", narrative.window_n},
                        {"mode", narrative.mode},
                        {"provider", narrative.provider},
                        {"provider_config", narrative.provider_config}};
    doc["render"] = {{"pixels_per_point", render.pixels_per_point},
                     {"text_color", color_to_json(render.text_color)},
                     {"seed", render.seed},
                     {"workers", render.workers}};
    return doc;
}

void PipelineConfig::validate(bool has_prompt) const {
    if (narrative.mode != "prompt_text" && narrative.mode != "prompt_only") {
        throw ValidationError("config: narrative.mode must be prompt_text or prompt_only");
    }
    if (narrative.mode == "prompt_only" && !has_prompt) {
        throw ValidationError("config: prompt_only mode requires a user prompt");
    }
    if (narrative.provider != "stub" && narrative.provider != "http") {
        throw ValidationError("config: narrative.provider must be stub or http");
    }
    if (narrative.provider == "http") {
        if (narrative.provider_config.empty() || !fs::exists(narrative.provider_config)) {
            throw ValidationError("config: narrative.provider_config must point to an existing file");
        }
    }
    if (narrative.window_n < 0) throw ValidationError("config: narrative.window_n must be >= 0");
    if (mask.mode != "attenuate" && mask.mode != "literal") {
        throw ValidationError("config: mask.mode must be attenuate or literal");
    }
    if (mask.source != "boxes" && mask.source != "centered") {
        throw ValidationError("config: mask.source must be boxes or centered");
    }
    if (!(mask.lambda > 0.0 && mask.lambda <= 1.0)) {
        throw ValidationError("config: mask.lambda must be in (0,1]");
    }
    if (mask.start_fraction < 0.0 || mask.start_fraction > 1.0) {
        throw ValidationError("config: mask.start_fraction must be in [0,1]");
    }
    if (mask.steps < 1) throw ValidationError("config: mask.steps must be >= 1");
    if (mask.lattice.h < 1 || mask.lattice.w < 1) {
        throw ValidationError("config: mask.lattice dimensions must be >= 1");
    }
    if (mask.rho_mask < 0.0 || mask.rho_mask > 1.0) {
        throw ValidationError("config: mask.rho_mask must be in [0,1]");
    }
    if (render.pixels_per_point <= 0.0) {
        throw ValidationError("config: render.pixels_per_point must be > 0");
    }
    if (render.workers < 0) throw ValidationError("config: render.workers must be >= 0");
    if (!(extraction.eta_x > 0.0 && extraction.eta_x <= 1.0)) {
        throw ValidationError("config: extraction.eta_x must be in (0,1]");
    }
    if (!(extraction.tau_cont > 0.0 && extraction.tau_cont <= 1.0) ||
        !(extraction.tau_iou > 0.0 && extraction.tau_iou <= 1.0)) {
        throw ValidationError("config: extraction thresholds must be in (0,1]");
    }
    if (extraction.max_vgap && *extraction.max_vgap <= 0.0) {
        throw ValidationError("config: extraction.max_vgap must be > 0 when set");
    }
    if (!(aro.target_contrast >= 1.0)) {
        throw ValidationError("config: aro.target_contrast must be >= 1");
    }
    if (!(aro.coverage > 0.0 && aro.coverage <= 1.0)) {
        throw ValidationError("config: aro.coverage must be in (0,1]");
    }
    if (!(aro.alpha_step > 0.0 && aro.alpha_step <= 0.05)) {
        throw ValidationError("config: aro.alpha_step must be in (0, 0.05]");
    }
}

// ---------------------------------------------------------------------------
// Toy background synthesis.

raster::RasterImage toy_background(double page_w_points, double page_h_points,
                                   const std::vector<BBox>& protected_boxes,
                                   const std::string& instruction_text, int page_index,
                                   const MaskConfig& mask_config, const RenderConfig& render,
                                   latent::AttenuationMask* mask_out,
                                   std::vector<latent::StepTrace>* trace_out) {
    latent::LatticeShape shape = mask_config.lattice;
    shape.channels = 3;

    const latent::AttenuationMask mask =
        mask_config.source == "centered"
            ? latent::build_mask_centered(shape, mask_config.rho_mask, mask_config.lambda)
            : latent::build_mask_from_boxes(shape, protected_boxes, page_w_points, page_h_points,
                                            mask_config.lambda);

    // Palette and texture frequencies derive from the instruction text, so
    // different instructions give visibly different fields.
    std::uint64_t rng = render.seed ^ util::fnv1a64(instruction_text) ^
                        (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(page_index + 1));
    const double light_r = 0.60 + 0.35 * util::next_unit(rng);
    const double light_g = 0.60 + 0.35 * util::next_unit(rng);
    const double light_b = 0.60 + 0.35 * util::next_unit(rng);
    const double deep_r = 0.15 + 0.55 * util::next_unit(rng);
    const double deep_g = 0.15 + 0.55 * util::next_unit(rng);
    const double deep_b = 0.15 + 0.55 * util::next_unit(rng);
    const double fx = (0.5 + 2.5 * util::next_unit(rng)) * 6.283185307179586 / shape.w;
    const double fy = (0.5 + 2.5 * util::next_unit(rng)) * 6.283185307179586 / shape.h;
    const double shear = 0.6 * util::next_unit(rng);
    const double phase1 = 6.283185307179586 * util::next_unit(rng);
    const double phase2 = 6.283185307179586 * util::next_unit(rng);

    std::vector<double> target(static_cast<std::size_t>(shape.cells()) * 3);
    for (int row = 0; row < shape.h; ++row) {
        for (int col = 0; col < shape.w; ++col) {
            const double t = std::clamp(0.5 + 0.35 * std::sin(fx * col + phase1) +
                                            0.25 * std::cos(fy * row + shear * col + phase2),
                                        0.0, 1.0);
            const std::size_t i = (static_cast<std::size_t>(row) * shape.w + col) * 3;
            target[i + 0] = light_r + t * (deep_r - light_r);
            target[i + 1] = light_g + t * (deep_g - light_g);
            target[i + 2] = light_b + t * (deep_b - light_b);
        }
    }

    // Start from paper and let the sampler pull toward the texture;
    // attenuated cells keep most of the paper tone.
    latent::LatentState start = latent::make_state(shape, 0.0);
    for (int cell = 0; cell < shape.cells(); ++cell) {
        start.x[static_cast<std::size_t>(cell) * 3 + 0] = 0.965;
        start.x[static_cast<std::size_t>(cell) * 3 + 1] = 0.960;
        start.x[static_cast<std::size_t>(cell) * 3 + 2] = 0.950;
    }

    const latent::StraightPathProvider provider(start, target);
    const latent::GateSchedule schedule{mask_config.steps, mask_config.start_fraction};
    const latent::StepMode mode = mask_config.mode == "literal" ? latent::StepMode::Literal
                                                                : latent::StepMode::Attenuate;
    auto result = latent::run_sampler(start, provider, mask, schedule, mode);
    if (mask_out) *mask_out = mask;
    if (trace_out) *trace_out = std::move(result.trace);

    const int width = std::max(1, static_cast<int>(std::lround(page_w_points * render.pixels_per_point)));
    const int height =
        std::max(1, static_cast<int>(std::lround(page_h_points * render.pixels_per_point)));
    raster::RasterImage img(width, height);
    for (int y = 0; y < height; ++y) {
        const double row = (y + 0.5) / height * shape.h - 0.5;
        for (int x = 0; x < width; ++x) {
            const double col = (x + 0.5) / width * shape.w - 0.5;
            double* p = img.at(x, y);
            p[0] = std::clamp(bilinear_at(result.final_state, row, col, 0), 0.0, 1.0);
            p[1] = std::clamp(bilinear_at(result.final_state, row, col, 1), 0.0, 1.0);
            p[2] = std::clamp(bilinear_at(result.final_state, row, col, 2), 0.0, 1.0);
            p[3] = 1.0;
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// Extraction document.

json extract_document_json(const std::vector<layout::PageLayout>& pages,
                           const layout::ExtractionParams& params) {
    json out;
    out["pages"] = json::array();
    for (const auto& page : pages) {
        const auto extracted = layout::extract(page, params);
        json boxes = json::array();
        for (const auto& box : extracted.text_boxes) boxes.push_back(box_to_json(box));
        json reps = json::array();
        for (const auto& box : extracted.representative_boxes) reps.push_back(box_to_json(box));
        json regions = json::array();
        for (const auto& region : extracted.regions) {
            regions.push_back({{"bbox", box_to_json(region.bbox)},
                               {"text", region.text},
                               {"line_ids", region.member_line_ids}});
        }
        out["pages"].push_back({{"index", page.page_index},
                                {"width", page.width},
                                {"height", page.height},
                                {"page_text", extracted.page_text},
                                {"text_boxes", boxes},
                                {"representative_boxes", reps},
                                {"regions", regions}});
    }
    return out;
}

std::uint64_t file_content_hash(const std::string& path) {
    return util::fnv1a64(util::read_file(path));
}

// ---------------------------------------------------------------------------
// Full pipeline.

RunResult run_pipeline(const RunOptions& options, const PipelineConfig& config,
                       const narrative::TextProvider& provider) {
    config.validate(options.user_prompt.has_value());

    const fs::path run_dir(options.output_dir);
    fs::create_directories(run_dir / "pages");

    json manifest;
    manifest["tool"] = "docback";
    manifest["format_version"] = kManifestFormatVersion;
    manifest["status"] = "ok";
    manifest["backgrounds"] = options.backgrounds_dir ? "external" : "toy";
    manifest["user_prompt"] = options.user_prompt ? json(*options.user_prompt) : json();
    manifest["provider_id"] = provider.id();
    manifest["narrative"] = {{"mode", config.narrative.mode},
                             {"window_n", config.narrative.window_n}};

    const auto fail = [&](const std::string& stage, const std::string& error) {
        manifest["status"] = "failed";
        manifest["failed_stage"] = stage;
        manifest["error"] = error;
        write_json_file(run_dir / "manifest.json", manifest);
    };

    // Inputs are copied into the run so it can be reproduced and refined.
    std::vector<layout::PageLayout> pages;
    try {
        const std::string layout_bytes = util::read_file(options.layout_path);
        util::write_file((run_dir / "layout.json").string(), layout_bytes);
        pages = layout::load_layout_file(options.layout_path);
        // Worker count is runtime-only; it must not change the run identity.
        json hashed_config = config.to_json();
        hashed_config["render"].erase("workers");
        manifest["config_hash"] = util::hex64(
            util::fnv1a64(hashed_config.dump() + layout_bytes +
                          (options.user_prompt ? *options.user_prompt : std::string())));
        write_json_file(run_dir / "config.json", config.to_json());
    } catch (const std::exception& e) {
        fail("load_layout", e.what());
        throw;
    }

    std::vector<layout::PageExtract> extracts(pages.size());
    try {
        parallel_for(static_cast<int>(pages.size()), config.render.workers, [&](int i) {
            extracts[i] = layout::extract(pages[i], config.extraction);
        });
        write_json_file(run_dir / "regions.json",
                        extract_document_json(pages, config.extraction));
    } catch (const std::exception& e) {
        fail("extract", e.what());
        throw;
    }

    // Narrative recursion is strictly sequential.
    std::vector<std::optional<narrative::PageSummary>> summaries(pages.size());
    std::vector<narrative::Instruction> instructions;
    try {
        if (config.narrative.mode == "prompt_text") {
            for (std::size_t i = 0; i < pages.size(); ++i) {
                const auto summary =
                    narrative::summarize(extracts[i].page_text, provider, pages[i].page_index);
                if (!summary.empty()) summaries[i] = summary;
            }
        }
        instructions =
            narrative::run_document(summaries, options.user_prompt, config.narrative.window_n,
                                    provider);

        json instruction_pages = json::array();
        narrative::NarrativeBank bank(config.narrative.window_n);
        for (std::size_t i = 0; i < pages.size(); ++i) {
            instruction_pages.push_back(
                {{"page_index", pages[i].page_index},
                 {"summary_words", summaries[i] ? json(summaries[i]->words) : json::array()},
                 {"prompt", options.user_prompt ? json(*options.user_prompt) : json()},
                 {"instruction", instructions[i].text},
                 {"mode", instructions[i].mode},
                 {"provider_id", instructions[i].provider_id}});
            bank = narrative::bank_push(bank, instructions[i]);
        }
        write_json_file(run_dir / "instructions.json",
                        json{{"window_n", config.narrative.window_n},
                             {"mode", config.narrative.mode},
                             {"pages", instruction_pages}});
        write_json_file(run_dir / "bank.json", bank.to_json());
    } catch (const std::exception& e) {
        fail("narrative", e.what());
        throw;
    }

    std::vector<PageRecord> records(pages.size());
    try {
        parallel_for(static_cast<int>(pages.size()), config.render.workers, [&](int i) {
            records[i] = render_page(pages[i], extracts[i], instructions[i].text,
                                     summaries[i] ? summaries[i]->joined() : std::string(),
                                     config, options.backgrounds_dir, run_dir);
        });
    } catch (const std::exception& e) {
        fail("render", e.what());
        throw;
    }

    RunResult result;
    result.pages = static_cast<int>(pages.size());
    json page_entries = json::array();
    for (const auto& record : records) {
        page_entries.push_back(page_record_to_json(record));
        if (record.unattainable_boxes > 0) result.any_unattainable = true;
    }
    manifest["pages"] = page_entries;
    write_json_file(run_dir / "manifest.json", manifest);
    result.manifest_path = (run_dir / "manifest.json").string();
    return result;
}

RunResult refine_page(const std::string& run_dir_str, int page_index,
                      const std::string& new_prompt, const narrative::TextProvider& provider) {
    const fs::path run_dir(run_dir_str);
    if (!fs::exists(run_dir / "manifest.json")) {
        throw ValidationError("refine: no manifest in '" + run_dir_str + "'");
    }
    json manifest = load_json_file(run_dir / "manifest.json");
    if (manifest.value("status", "") != "ok") {
        throw ValidationError("refine: run is not in an ok state");
    }
    const PipelineConfig config = PipelineConfig::from_json(load_json_file(run_dir / "config.json"));
    json instructions_doc = load_json_file(run_dir / "instructions.json");
    if (!instructions_doc.contains("pages")) {
        throw ValidationError("refine: missing bank state (instructions.json)");
    }
    const auto pages = layout::load_layout_file((run_dir / "layout.json").string());

    // Ordinal position of the page within the document.
    int position = -1;
    for (std::size_t i = 0; i < pages.size(); ++i) {
        if (pages[i].page_index == page_index) {
            position = static_cast<int>(i);
            break;
        }
    }
    if (position < 0) {
        throw ValidationError("refine: unknown page " + std::to_string(page_index));
    }
    json& page_entries = instructions_doc["pages"];
    if (page_entries.size() != pages.size()) {
        throw ValidationError("refine: instructions do not match the layout");
    }

    // Rebuild the bank prefix H_{i-1} from the stored instructions.
    narrative::NarrativeBank bank(config.narrative.window_n);
    for (int i = 0; i < position; ++i) {
        narrative::Instruction prior;
        prior.page_index = page_entries[i]["page_index"].get<int>();
        prior.text = page_entries[i]["instruction"].get<std::string>();
        prior.provider_id = page_entries[i].value("provider_id", std::string());
        prior.mode = page_entries[i].value("mode", std::string());
        bank = narrative::bank_push(bank, prior);
    }

    std::optional<narrative::PageSummary> summary;
    if (config.narrative.mode == "prompt_text") {
        narrative::PageSummary s;
        s.page_index = page_index;
        for (const auto& word : page_entries[position]["summary_words"]) {
            s.words.push_back(word.get<std::string>());
        }
        if (!s.words.empty()) summary = s;
    }

    const auto instruction =
        narrative::instruct(summary, new_prompt, bank, provider, page_index);

    page_entries[position]["instruction"] = instruction.text;
    page_entries[position]["prompt"] = new_prompt;
    page_entries[position]["mode"] = instruction.mode;
    page_entries[position]["provider_id"] = instruction.provider_id;
    write_json_file(run_dir / "instructions.json", instructions_doc);

    // Bank state after the whole document, with the refined entry in place.
    narrative::NarrativeBank full_bank(config.narrative.window_n);
    for (const auto& entry : page_entries) {
        narrative::Instruction inst;
        inst.page_index = entry["page_index"].get<int>();
        inst.text = entry["instruction"].get<std::string>();
        inst.provider_id = entry.value("provider_id", std::string());
        inst.mode = entry.value("mode", std::string());
        full_bank = narrative::bank_push(full_bank, inst);
    }
    write_json_file(run_dir / "bank.json", full_bank.to_json());

    const std::optional<std::string> backgrounds_dir =
        manifest.value("backgrounds", "toy") == "external"
            ? std::optional<std::string>((run_dir / "external_backgrounds").string())
            : std::nullopt;
    // External backgrounds were copied into the page dir at run time; for
    // refinement we reuse the stored background rather than a source dir.
    const auto extracted = layout::extract(pages[position], config.extraction);

    PageRecord record;
    if (backgrounds_dir) {
        // Re-run readability stages against the existing background.
        const fs::path page_dir = run_dir / "pages" / page_dir_name(page_index);
        const std::string bg_path = (page_dir / "background.png").string();
        if (!fs::exists(bg_path)) {
            throw ValidationError("refine: stored background missing for page " +
                                  std::to_string(page_index));
        }
        // Treat the stored background as the per-page source.
        const fs::path stash = run_dir / "external_backgrounds";
        fs::create_directories(stash);
        fs::copy_file(bg_path, stash / background_file_name(page_index),
                      fs::copy_options::overwrite_existing);
        record = render_page(pages[position], extracted, instruction.text,
                             summary ? summary->joined() : std::string(), config,
                             std::optional<std::string>(stash.string()), run_dir);
    } else {
        record = render_page(pages[position], extracted, instruction.text,
                             summary ? summary->joined() : std::string(), config, std::nullopt,
                             run_dir);
    }

    RunResult result;
    result.pages = static_cast<int>(pages.size());
    for (auto& entry : manifest["pages"]) {
        if (entry["index"].get<int>() == page_index) {
            entry = page_record_to_json(record);
        }
        if (entry["unattainable_boxes"].get<int>() > 0) result.any_unattainable = true;
    }
    write_json_file(run_dir / "manifest.json", manifest);
    result.manifest_path = (run_dir / "manifest.json").string();
    return result;
}

}  // namespace docback::pipeline
