// docback: readable document background toolkit.
//
// Subcommands cover the full pipeline (extract, summarize, instruct,
// mask-sim, aro, compose, evaluate, pipeline, refine). Exit codes:
//   0 success, 2 config/validation error, 3 provider error,
//   4 readability target unattainable for at least one box.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "docback/compose.hpp"
#include "docback/errors.hpp"
#include "docback/layout_io.hpp"
#include "docback/narrative_http.hpp"
#include "docback/pipeline.hpp"
#include "docback/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace docback;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitProvider = 3;
constexpr int kExitUnattainable = 4;

std::unique_ptr<narrative::TextProvider> make_provider(const pipeline::PipelineConfig& config) {
    if (config.narrative.provider == "http") {
        return std::make_unique<narrative::HttpChatProvider>(
            narrative::HttpProviderConfig::load_file(config.narrative.provider_config));
    }
    return std::make_unique<narrative::StubProvider>();
}

color::Srgb parse_color(const std::string& text) {
    std::istringstream in(text);
    double r = 0.0, g = 0.0, b = 0.0;
    char comma1 = 0, comma2 = 0;
    if (!(in >> r >> comma1 >> g >> comma2 >> b) || comma1 != ',' || comma2 != ',') {
        throw ValidationError("expected a color as r,g,b with channels in [0,1]");
    }
    return {r, g, b};
}

std::vector<BBox> load_boxes_file(const std::string& path) {
    json doc;
    try {
        doc = json::parse(util::read_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError("boxes file '" + path + "': " + e.what());
    }
    if (!doc.contains("boxes") || !doc["boxes"].is_array()) {
        throw ValidationError("boxes file '" + path + "': missing \"boxes\" array");
    }
    std::vector<BBox> boxes;
    for (std::size_t i = 0; i < doc["boxes"].size(); ++i) {
        const auto& node = doc["boxes"][i];
        if (!node.is_array() || node.size() != 4) {
            throw ValidationError("boxes file '" + path + "': boxes[" + std::to_string(i) +
                                  "] must be [x0,y0,x1,y1]");
        }
        boxes.push_back(BBox{node[0].get<double>(), node[1].get<double>(), node[2].get<double>(),
                             node[3].get<double>()});
    }
    return boxes;
}

void write_json_file(const std::string& path, const json& doc) {
    util::write_file(path, doc.dump(2) + "\n");
}

json overlay_to_json(const aro::BackingOverlay& overlay) {
    return json{{"backing_box",
                 {overlay.box.x0, overlay.box.y0, overlay.box.x1, overlay.box.y1}},
                {"corner_radius", overlay.corner_radius},
                {"overlay_color",
                 {overlay.overlay_color.r, overlay.overlay_color.g, overlay.overlay_color.b}},
                {"alpha", overlay.alpha},
                {"alpha_star", overlay.solved_alpha_star},
                {"attained_coverage", overlay.attained_coverage},
                {"unattainable", overlay.unattainable}};
}

aro::BackingOverlay overlay_from_json(const json& node) {
    aro::BackingOverlay overlay;
    const auto& box = node.at("backing_box");
    overlay.box = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
                   box[3].get<double>()};
    overlay.corner_radius = node.at("corner_radius").get<double>();
    const auto& c = node.at("overlay_color");
    overlay.overlay_color = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
    overlay.alpha = node.at("alpha").get<double>();
    overlay.solved_alpha_star = node.value("alpha_star", overlay.alpha);
    overlay.attained_coverage = node.value("attained_coverage", 1.0);
    overlay.unattainable = node.value("unattainable", false);
    return overlay;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"docback: readable, multi-page-consistent document backgrounds"};
    app.require_subcommand(1);
    int exit_code = kExitOk;

    std::string config_path;
    app.add_option("--config", config_path, "pipeline configuration JSON")->envname("DOCBACK_CONFIG");

    const auto load_config = [&]() {
        return config_path.empty() ? pipeline::PipelineConfig{}
                                   : pipeline::PipelineConfig::load_file(config_path);
    };

    // -- extract ------------------------------------------------------------
    auto* extract_cmd = app.add_subcommand("extract", "extract text regions from a layout file");
    struct {
        std::string layout, out;
    } extract_opts;
    extract_cmd->add_option("--layout", extract_opts.layout, "layout interchange JSON")->required();
    extract_cmd->add_option("--out", extract_opts.out, "regions JSON output")->required();
    extract_cmd->callback([&] {
        const auto config = load_config();
        const auto pages = layout::load_layout_file(extract_opts.layout);
        write_json_file(extract_opts.out,
                        pipeline::extract_document_json(pages, config.extraction));
        std::cout << "wrote " << extract_opts.out << " (" << pages.size() << " pages)\n";
    });

    // -- summarize ----------------------------------------------------------
    auto* summarize_cmd = app.add_subcommand("summarize", "distill page texts into themes");
    struct {
        std::string layout, out, provider;
    } summarize_opts;
    summarize_cmd->add_option("--layout", summarize_opts.layout, "layout interchange JSON")
        ->required();
    summarize_cmd->add_option("--out", summarize_opts.out, "summaries JSON output")->required();
    summarize_cmd->add_option("--provider", summarize_opts.provider, "stub or http");
    summarize_cmd->callback([&] {
        auto config = load_config();
        if (!summarize_opts.provider.empty()) config.narrative.provider = summarize_opts.provider;
        config.validate(true);
        const auto provider = make_provider(config);
        const auto pages = layout::load_layout_file(summarize_opts.layout);

        json out;
        out["pages"] = json::array();
        for (const auto& page : pages) {
            const auto extracted = layout::extract(page, config.extraction);
            const auto summary =
                narrative::summarize(extracted.page_text, *provider, page.page_index);
            out["pages"].push_back({{"page_index", page.page_index},
                                    {"words", summary.words},
                                    {"raw", summary.raw}});
        }
        write_json_file(summarize_opts.out, out);
        std::cout << "wrote " << summarize_opts.out << "\n";
    });

    // -- instruct -----------------------------------------------------------
    auto* instruct_cmd =
        app.add_subcommand("instruct", "generate background instructions with memory");
    struct {
        std::string summaries, out, prompt, provider;
        int pages = 0;
        int window = -1;
    } instruct_opts;
    instruct_cmd->add_option("--summaries", instruct_opts.summaries,
                             "summaries JSON (from `summarize`)");
    instruct_cmd->add_option("--pages", instruct_opts.pages,
                             "page count for prompt-only runs without summaries");
    instruct_cmd->add_option("--out", instruct_opts.out, "instructions JSON output")->required();
    instruct_cmd->add_option("--prompt", instruct_opts.prompt, "user style prompt");
    instruct_cmd->add_option("--window", instruct_opts.window, "memory window N");
    instruct_cmd->add_option("--provider", instruct_opts.provider, "stub or http");
    instruct_cmd->callback([&] {
        auto config = load_config();
        if (!instruct_opts.provider.empty()) config.narrative.provider = instruct_opts.provider;
        if (instruct_opts.window >= 0) config.narrative.window_n = instruct_opts.window;
        config.validate(!instruct_opts.prompt.empty());
        const auto provider = make_provider(config);

        std::vector<std::optional<narrative::PageSummary>> summaries;
        if (!instruct_opts.summaries.empty()) {
            const json doc = json::parse(util::read_file(instruct_opts.summaries));
            for (const auto& entry : doc.at("pages")) {
                narrative::PageSummary s;
                s.page_index = entry.at("page_index").get<int>();
                for (const auto& word : entry.at("words")) s.words.push_back(word.get<std::string>());
                summaries.push_back(s.empty() ? std::optional<narrative::PageSummary>()
                                              : std::optional<narrative::PageSummary>(s));
            }
        } else if (instruct_opts.pages > 0) {
            summaries.assign(instruct_opts.pages, std::nullopt);
        } else {
            throw ValidationError("instruct: provide --summaries or --pages");
        }

        const std::optional<std::string> prompt =
            instruct_opts.prompt.empty() ? std::nullopt
                                         : std::optional<std::string>(instruct_opts.prompt);
        const auto instructions =
            narrative::run_document(summaries, prompt, config.narrative.window_n, *provider);

        json out;
        out["window_n"] = config.narrative.window_n;
        out["pages"] = json::array();
        for (const auto& inst : instructions) {
            out["pages"].push_back({{"page_index", inst.page_index},
                                    {"instruction", inst.text},
                                    {"mode", inst.mode},
                                    {"provider_id", inst.provider_id}});
        }
        write_json_file(instruct_opts.out, out);
        std::cout << "wrote " << instruct_opts.out << " (" << instructions.size() << " pages)\n";
    });

    // -- mask-sim -----------------------------------------------------------
    auto* mask_cmd = app.add_subcommand("mask-sim", "run the toy masked sampler standalone");
    struct {
        std::string out, layout, instruction = "sample texture";
        int page = 0;
        double rho = -1.0;
    } mask_opts;
    mask_cmd->add_option("--out", mask_opts.out, "output directory")->required();
    mask_cmd->add_option("--layout", mask_opts.layout,
                         "layout JSON; protected boxes come from this page");
    mask_cmd->add_option("--page", mask_opts.page, "page index within --layout");
    mask_cmd->add_option("--rho", mask_opts.rho, "centered-window fraction (ignores --layout)");
    mask_cmd->add_option("--instruction", mask_opts.instruction, "seed text for the texture");
    mask_cmd->callback([&] {
        auto config = load_config();
        double page_w = 595.0, page_h = 842.0;
        std::vector<BBox> boxes;
        if (mask_opts.rho >= 0.0) {
            config.mask.source = "centered";
            config.mask.rho_mask = mask_opts.rho;
        } else if (!mask_opts.layout.empty()) {
            const auto pages = layout::load_layout_file(mask_opts.layout);
            const auto it = std::find_if(pages.begin(), pages.end(), [&](const auto& p) {
                return p.page_index == mask_opts.page;
            });
            if (it == pages.end()) {
                throw ValidationError("mask-sim: page " + std::to_string(mask_opts.page) +
                                      " not in layout");
            }
            page_w = it->width;
            page_h = it->height;
            boxes = layout::extract(*it, config.extraction).representative_boxes;
        } else {
            config.mask.source = "centered";
        }
        config.validate(true);

        fs::create_directories(mask_opts.out);
        latent::AttenuationMask mask;
        std::vector<latent::StepTrace> trace;
        const auto background =
            pipeline::toy_background(page_w, page_h, boxes, mask_opts.instruction, mask_opts.page,
                                     config.mask, config.render, &mask, &trace);
        const fs::path out_dir(mask_opts.out);
        write_json_file((out_dir / "mask.json").string(), latent::mask_to_json(mask));
        raster::write_gray_png(mask.values, mask.shape.w, mask.shape.h,
                               (out_dir / "mask.png").string());
        write_json_file((out_dir / "trace.json").string(), latent::trace_to_json(trace));
        raster::write_png(background, (out_dir / "background.png").string());
        std::cout << "wrote mask, trace and background under " << mask_opts.out << "\n";
    });

    // -- aro ----------------------------------------------------------------
    auto* aro_cmd = app.add_subcommand("aro", "solve backing opacities for text boxes");
    struct {
        std::string background, boxes, out, composite;
        std::string text_color = "0,0,0";
    } aro_opts;
    aro_cmd->add_option("--background", aro_opts.background, "background PNG")->required();
    aro_cmd->add_option("--boxes", aro_opts.boxes, "JSON {\"boxes\":[[x0,y0,x1,y1],...]} in pixels")
        ->required();
    aro_cmd->add_option("--out", aro_opts.out, "overlay report JSON")->required();
    aro_cmd->add_option("--composite", aro_opts.composite, "optional backed-background PNG");
    aro_cmd->add_option("--text-color", aro_opts.text_color, "text color r,g,b");
    aro_cmd->callback([&] {
        const auto config = load_config();
        const auto background = raster::read_png(aro_opts.background);
        const auto boxes = load_boxes_file(aro_opts.boxes);
        const auto text_color = parse_color(aro_opts.text_color);

        std::vector<aro::BackingOverlay> overlays;
        json entries = json::array();
        bool any_unattainable = false;
        for (const auto& box : boxes) {
            const auto overlay = aro::build_overlay(box, text_color, background, config.aro);
            json entry = overlay_to_json(overlay);
            entry["text_box"] = {box.x0, box.y0, box.x1, box.y1};
            entries.push_back(entry);
            any_unattainable |= overlay.unattainable;
            overlays.push_back(overlay);
        }
        write_json_file(aro_opts.out,
                        json{{"text_color",
                              {text_color.r, text_color.g, text_color.b}},
                             {"target_contrast", config.aro.target_contrast},
                             {"coverage", config.aro.coverage},
                             {"overlays", entries}});
        if (!aro_opts.composite.empty()) {
            raster::write_png(aro::composite_overlays(background, overlays), aro_opts.composite);
        }
        std::cout << "wrote " << aro_opts.out << " (" << overlays.size() << " boxes)\n";
        if (any_unattainable) {
            std::cerr << "warning: contrast target unattainable for at least one box\n";
            exit_code = kExitUnattainable;
        }
    });

    // -- compose ------------------------------------------------------------
    auto* compose_cmd = app.add_subcommand("compose", "layer background, backings and foreground");
    struct {
        std::string background, overlays, foreground, out;
    } compose_opts;
    compose_cmd->add_option("--background", compose_opts.background, "background PNG")->required();
    compose_cmd->add_option("--overlays", compose_opts.overlays, "overlay report JSON");
    compose_cmd->add_option("--foreground", compose_opts.foreground, "foreground PNG with alpha");
    compose_cmd->add_option("--out", compose_opts.out, "composited PNG")->required();
    compose_cmd->callback([&] {
        compose::PageLayers layers;
        layers.background = raster::read_png(compose_opts.background);
        if (!compose_opts.overlays.empty()) {
            const json doc = json::parse(util::read_file(compose_opts.overlays));
            for (const auto& entry : doc.at("overlays")) {
                layers.backings.push_back(overlay_from_json(entry));
            }
        }
        if (!compose_opts.foreground.empty()) {
            layers.foreground = raster::read_png(compose_opts.foreground);
        }
        raster::write_png(compose::compose_page(layers), compose_opts.out);
        std::cout << "wrote " << compose_opts.out << "\n";
    });

    // -- evaluate -------------------------------------------------------------
    auto* evaluate_cmd = app.add_subcommand("evaluate", "WCAG contrast coverage report");
    struct {
        std::string image, boxes, out;
        std::string text_color = "0,0,0";
        double threshold = 4.5;
        double coverage = 0.98;
    } evaluate_opts;
    evaluate_cmd->add_option("--image", evaluate_opts.image, "composited PNG")->required();
    evaluate_cmd->add_option("--boxes", evaluate_opts.boxes, "text boxes JSON (pixels)")->required();
    evaluate_cmd->add_option("--out", evaluate_opts.out, "readability report JSON")->required();
    evaluate_cmd->add_option("--text-color", evaluate_opts.text_color, "text color r,g,b");
    evaluate_cmd->add_option("--threshold", evaluate_opts.threshold, "contrast threshold");
    evaluate_cmd->add_option("--coverage", evaluate_opts.coverage, "required pixel coverage");
    evaluate_cmd->callback([&] {
        const auto image = raster::read_png(evaluate_opts.image);
        const auto boxes = load_boxes_file(evaluate_opts.boxes);
        const auto report =
            compose::evaluate_wcag(image, boxes, parse_color(evaluate_opts.text_color),
                                   evaluate_opts.threshold, evaluate_opts.coverage);
        write_json_file(evaluate_opts.out, report.to_json());
        std::cout << "pass rate " << report.page_pass_rate << ", pixel rate "
                  << report.pixel_pass_rate << "\n";
    });

    // -- pipeline -------------------------------------------------------------
    auto* pipeline_cmd = app.add_subcommand("pipeline", "run the full document pipeline");
    struct {
        std::string layout, out, backgrounds, prompt, provider, mode;
        std::uint64_t seed = 0;
        int workers = -1;
        bool has_seed = false;
    } pipeline_opts;
    pipeline_cmd->add_option("--layout", pipeline_opts.layout, "layout interchange JSON")
        ->required();
    pipeline_cmd->add_option("--out", pipeline_opts.out, "run output directory")->required();
    pipeline_cmd->add_option("--backgrounds", pipeline_opts.backgrounds,
                             "directory of page_<index>.png backgrounds (default: toy sampler)");
    pipeline_cmd->add_option("--prompt", pipeline_opts.prompt, "user style prompt");
    pipeline_cmd->add_option("--provider", pipeline_opts.provider, "stub or http");
    pipeline_cmd->add_option("--mode", pipeline_opts.mode, "prompt_text or prompt_only");
    auto* seed_option = pipeline_cmd->add_option("--seed", pipeline_opts.seed, "toy sampler seed");
    pipeline_cmd->add_option("--workers", pipeline_opts.workers, "worker pool size (0 = auto)");
    pipeline_cmd->callback([&] {
        auto config = load_config();
        if (!pipeline_opts.provider.empty()) config.narrative.provider = pipeline_opts.provider;
        if (!pipeline_opts.mode.empty()) config.narrative.mode = pipeline_opts.mode;
        if (seed_option->count() > 0) config.render.seed = pipeline_opts.seed;
        if (pipeline_opts.workers >= 0) config.render.workers = pipeline_opts.workers;

        pipeline::RunOptions options;
        options.layout_path = pipeline_opts.layout;
        options.output_dir = pipeline_opts.out;
        if (!pipeline_opts.backgrounds.empty()) options.backgrounds_dir = pipeline_opts.backgrounds;
        if (!pipeline_opts.prompt.empty()) options.user_prompt = pipeline_opts.prompt;

        config.validate(options.user_prompt.has_value());
        const auto provider = make_provider(config);
        const auto result = pipeline::run_pipeline(options, config, *provider);
        std::cout << "wrote " << result.manifest_path << " (" << result.pages << " pages)\n";
        if (result.any_unattainable) {
            std::cerr << "warning: contrast target unattainable for at least one box\n";
            exit_code = kExitUnattainable;
        }
    });

    // -- refine ---------------------------------------------------------------
    auto* refine_cmd = app.add_subcommand("refine", "re-run one page with a new prompt");
    struct {
        std::string run, prompt, provider;
        int page = -1;
    } refine_opts;
    refine_cmd->add_option("--run", refine_opts.run, "existing run directory")->required();
    refine_cmd->add_option("--page", refine_opts.page, "page index to refine")->required();
    refine_cmd->add_option("--prompt", refine_opts.prompt, "new style prompt")->required();
    refine_cmd->add_option("--provider", refine_opts.provider, "stub or http");
    refine_cmd->callback([&] {
        auto config = pipeline::PipelineConfig::load_file(
            (fs::path(refine_opts.run) / "config.json").string());
        if (!refine_opts.provider.empty()) config.narrative.provider = refine_opts.provider;
        config.validate(true);
        const auto provider = make_provider(config);
        const auto result =
            pipeline::refine_page(refine_opts.run, refine_opts.page, refine_opts.prompt, *provider);
        std::cout << "refined page " << refine_opts.page << "; manifest updated\n";
        if (result.any_unattainable) {
            std::cerr << "warning: contrast target unattainable for at least one box\n";
            exit_code = kExitUnattainable;
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ProviderError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return exit_code;
}
