#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "docback/aro.hpp"
#include "docback/latentmask.hpp"
#include "docback/layout.hpp"
#include "docback/narrative.hpp"
#include "docback/raster.hpp"

namespace docback::pipeline {

struct MaskConfig {
    double lambda = 0.2;
    double start_fraction = 0.29;
    std::string mode = "attenuate";  // or "literal"
    latent::LatticeShape lattice{64, 64, 4};  // toy generation renders 3 channels
    int steps = 50;
    std::string source = "boxes";  // or "centered"
    double rho_mask = 0.25;        // centered source only
};

struct NarrativeConfig {
    int window_n = 3;
    std::string mode = "prompt_text";  // or "prompt_only"
    std::string provider = "stub";     // or "http"
    std::string provider_config;       // path to the http provider json
};

struct RenderConfig {
    double pixels_per_point = 1.0;
    color::Srgb text_color{0.0, 0.0, 0.0};
    std::uint64_t seed = 1;
    int workers = 0;  // 0 = hardware concurrency
};

struct PipelineConfig {
    layout::ExtractionParams extraction;
    aro::AroParams aro;
    MaskConfig mask;
    NarrativeConfig narrative;
    RenderConfig render;

    static PipelineConfig from_json(const nlohmann::json& doc);
    static PipelineConfig load_file(const std::string& path);
    nlohmann::json to_json() const;

    /// Consistency checks that need the run inputs (e.g. prompt_only
    /// mode requires a prompt).
    void validate(bool has_prompt) const;
};

struct RunOptions {
    std::string layout_path;
    std::string output_dir;
    std::optional<std::string> backgrounds_dir;  // absent = toy generation
    std::optional<std::string> user_prompt;
};

struct RunResult {
    std::string manifest_path;
    bool any_unattainable = false;
    int pages = 0;
};

/// Full run: extract, narrative recursion, background per page (toy
/// sampler or supplied PNGs), backings, composition and the readability
/// report, all recorded in <output_dir>/manifest.json.
RunResult run_pipeline(const RunOptions& options, const PipelineConfig& config,
                       const narrative::TextProvider& provider);

/// Recompute one page with a new prompt against the existing bank
/// prefix. Other pages' artifacts are left untouched.
RunResult refine_page(const std::string& run_dir, int page_index, const std::string& new_prompt,
                      const narrative::TextProvider& provider);

/// Deterministic toy background: a masked straight-path sampler pulls a
/// paper-colored lattice toward an instruction-seeded texture, then the
/// lattice is upsampled to page pixels. Protected cells keep most of the
/// paper tone.
raster::RasterImage toy_background(double page_w_points, double page_h_points,
                                   const std::vector<BBox>& protected_boxes,
                                   const std::string& instruction_text, int page_index,
                                   const MaskConfig& mask_config, const RenderConfig& render,
                                   latent::AttenuationMask* mask_out = nullptr,
                                   std::vector<latent::StepTrace>* trace_out = nullptr);

nlohmann::json extract_document_json(const std::vector<layout::PageLayout>& pages,
                                     const layout::ExtractionParams& params);

std::uint64_t file_content_hash(const std::string& path);

}  // namespace docback::pipeline
