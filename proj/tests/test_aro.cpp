#include <doctest.h>

#include <random>

#include "docback/aro.hpp"
#include "docback/errors.hpp"
#include "oracles.hpp"

using namespace docback;
using namespace docback::aro;
using docback::color::Srgb;

namespace {

AroParams defaults() { return AroParams{}; }

}  // namespace

TEST_CASE("blend_luminance endpoints and midpoint") {
    CHECK(blend_luminance(1.0, 0.7, 0.2) == 0.7);
    CHECK(blend_luminance(0.0, 0.7, 0.2) == 0.2);
    CHECK(blend_luminance(0.5, 1.0, 0.2) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("choose_overlay_color flips with text luminance") {
    const Srgb light{0.98, 0.98, 0.98};
    const Srgb dark{0.06, 0.06, 0.06};
    CHECK(choose_overlay_color({0, 0, 0}) == light);
    CHECK(choose_overlay_color({1, 1, 1}) == dark);
    // Tie at L = 0.5 goes dark.
    CHECK(choose_overlay_for_luminance(0.5) == dark);
    CHECK(choose_overlay_for_luminance(0.4999) == light);

    // The pairing keeps at least 7:1 against pure black / pure white text.
    const double l_light = color::relative_luminance(light);
    const double l_dark = color::relative_luminance(dark);
    CHECK(color::contrast_ratio(l_light, 0.0) >= 7.0);
    CHECK(color::contrast_ratio(l_dark, 1.0) >= 7.0);
}

TEST_CASE("solve_alpha returns zero when the background already passes") {
    auto params = defaults();
    const std::vector<double> bg(64, 1.0);  // same as the overlay luminance
    const auto solution = solve_alpha(bg, 1.0, 0.0, params);
    CHECK(solution.alpha_star == 0.0);
    CHECK(solution.grid_index == 0);
    CHECK(solution.attained_coverage == 1.0);
    CHECK_FALSE(solution.unattainable);
}

TEST_CASE("solve_alpha inverts the uniform dark background case") {
    // Black text, white overlay, all pixels at luminance 0.05, tau 7:
    // blended needs to reach 0.30, so alpha* = 0.25/0.95 rounded up on
    // the 0.001 grid -> 0.264.
    auto params = defaults();
    const std::vector<double> bg(100, 0.05);
    const auto solution = solve_alpha(bg, 1.0, 0.0, params);
    CHECK(solution.grid_index == 264);
    CHECK(solution.alpha_star == doctest::Approx(0.264).epsilon(1e-12));
    CHECK_FALSE(solution.unattainable);

    const auto scan = oracles::scan_alpha({bg.begin(), bg.end()}, 1.0, 0.0,
                                          params.target_contrast, params.coverage,
                                          params.alpha_step);
    CHECK(scan.index == solution.grid_index);
}

TEST_CASE("solve_alpha flags targets beyond the overlay's reach") {
    auto params = defaults();
    params.target_contrast = 9.0;
    // CR(1.0, 0.18) ~ 4.57 < 9, so even a fully opaque overlay fails.
    const std::vector<double> bg = {0.3, 0.6, 0.9};
    const auto solution = solve_alpha(bg, 1.0, 0.18, params);
    CHECK(solution.unattainable);
    CHECK(solution.alpha_star == 1.0);
    CHECK(solution.attained_coverage == 0.0);
}

TEST_CASE("solve_alpha input validation") {
    auto params = defaults();
    CHECK_THROWS_WITH(solve_alpha(std::vector<double>{}, 1.0, 0.0, params),
                      doctest::Contains("no pixels"));
    const std::vector<double> with_nan = {0.5, std::nan("")};
    CHECK_THROWS_WITH(solve_alpha(with_nan, 1.0, 0.0, params),
                      doctest::Contains("invalid sample"));
    params.alpha_step = 0.2;
    const std::vector<double> ok = {0.5};
    CHECK_THROWS_AS(solve_alpha(ok, 1.0, 0.0, params), ValidationError);
}

TEST_CASE("solve_alpha matches the exhaustive scan on fuzzed instances") {
    auto params = defaults();
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> count(1, 200);
    for (int trial = 0; trial < 100; ++trial) {
        const bool black_text = trial % 2 == 0;
        const double l_text = black_text ? 0.0 : 1.0;
        const double l_overlay = color::relative_luminance(
            choose_overlay_for_luminance(l_text));
        std::vector<double> bg(count(rng));
        for (double& l : bg) l = unit(rng);

        const auto got = solve_alpha(bg, l_overlay, l_text, params);
        const auto want = oracles::scan_alpha(bg, l_overlay, l_text, params.target_contrast,
                                              params.coverage, params.alpha_step);
        CHECK(got.grid_index == want.index);
        CHECK(got.alpha_star == want.alpha);
        CHECK(got.attained_coverage == want.coverage);
        CHECK(got.unattainable == want.unattainable);
    }
}

TEST_CASE("coverage is nondecreasing in alpha for opposite-side overlays") {
    auto params = defaults();
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        const double l_text = trial % 2 == 0 ? 0.0 : 1.0;
        const double l_overlay =
            color::relative_luminance(choose_overlay_for_luminance(l_text));
        std::vector<double> bg(64);
        for (double& l : bg) l = unit(rng);

        double previous = -1.0;
        for (int i = 0; i <= 1000; ++i) {
            const double alpha = i == 1000 ? 1.0 : i * 0.001;
            std::size_t hits = 0;
            for (double l_bg : bg) {
                const double blended = blend_luminance(alpha, l_overlay, l_bg);
                if (color::contrast_ratio(blended, l_text) >= params.target_contrast) ++hits;
            }
            const double coverage = static_cast<double>(hits) / bg.size();
            CHECK(coverage >= previous);
            previous = coverage;
        }
    }
}

TEST_CASE("finalize_alpha applies margin, floor and ceiling") {
    auto params = defaults();  // epsilon 0.02, alpha_min 0.15
    CHECK(finalize_alpha(0.0, params) == 0.15);
    CHECK(finalize_alpha(0.99, params) == 1.0);
    params.epsilon = 0.0;
    params.alpha_min = 0.0;
    CHECK(finalize_alpha(0.5, params) == 0.5);
}

TEST_CASE("finalize_alpha output stays within [alpha_min, 1]") {
    std::mt19937_64 rng(97);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        AroParams params;
        params.epsilon = 0.1 * unit(rng);
        params.alpha_min = unit(rng);
        const double alpha = finalize_alpha(unit(rng), params);
        CHECK(alpha >= std::min(1.0, params.alpha_min));
        CHECK(alpha <= 1.0);
    }
}

TEST_CASE("build_overlay expands, clamps and solves") {
    auto params = defaults();
    const raster::RasterImage white(400, 400, 1.0, 1.0, 1.0, 1.0);

    const auto overlay = build_overlay({100, 100, 300, 140}, {0, 0, 0}, white, params);
    CHECK(overlay.box == BBox{76, 76, 324, 164});
    // 248 x 88 backing: radius 0.12 * 88.
    CHECK(overlay.corner_radius == doctest::Approx(10.56).epsilon(1e-12));
    // White background already clears tau at alpha 0; the floor wins.
    CHECK(overlay.solved_alpha_star == 0.0);
    CHECK(overlay.alpha == 0.15);
    CHECK_FALSE(overlay.unattainable);
    CHECK(overlay.overlay_color == Srgb{0.98, 0.98, 0.98});
}

TEST_CASE("build_overlay rejects boxes without pixels") {
    auto params = defaults();
    const raster::RasterImage img(100, 100, 0.5, 0.5, 0.5, 1.0);
    CHECK_THROWS_AS(build_overlay({500, 500, 600, 600}, {0, 0, 0}, img, params), Error);
}

TEST_CASE("sample_luminances strides down very large boxes") {
    const raster::RasterImage img(200, 200, 0.25, 0.25, 0.25, 1.0);
    const auto all = sample_luminances(img, {0, 0, 200, 200}, 1'000'000);
    CHECK(all.size() == 40'000);
    const auto capped = sample_luminances(img, {0, 0, 200, 200}, 1000);
    CHECK(capped.size() <= 1000);
    CHECK(capped.size() >= 500);
}

TEST_CASE("finalized opacity keeps the solved coverage for black or white text") {
    // Monotone feasibility makes the coverage at the final alpha (star +
    // margin, floored) at least the solved coverage, so the target either
    // holds over the sampled pixels or the box is flagged.
    auto params = defaults();
    std::mt19937_64 rng(107);
    const oracles::BackgroundKind kinds[] = {
        oracles::BackgroundKind::Gradient, oracles::BackgroundKind::Noise,
        oracles::BackgroundKind::Plasma, oracles::BackgroundKind::Blobs};

    for (int trial = 0; trial < 40; ++trial) {
        const auto bg = oracles::synthetic_background(rng, 160, 120, kinds[trial % 4]);
        const color::Srgb text = trial % 2 == 0 ? color::Srgb{0, 0, 0} : color::Srgb{1, 1, 1};
        const BBox box{20.0 + (trial % 7), 20.0, 120.0 + (trial % 13), 44.0};

        const auto overlay = build_overlay(box, text, bg, params);
        if (overlay.unattainable) continue;

        const auto lums = sample_luminances(bg, overlay.box, params.max_samples);
        const double l_text = color::relative_luminance(text);
        const double l_overlay = color::relative_luminance(overlay.overlay_color);
        std::size_t hits = 0;
        for (double l : lums) {
            const double blended = blend_luminance(overlay.alpha, l_overlay, l);
            if (color::contrast_ratio(blended, l_text) >= params.target_contrast) ++hits;
        }
        CHECK(static_cast<double>(hits) / lums.size() >= params.coverage);
    }
}

TEST_CASE("composite_overlays leaves the background alone without overlays") {
    std::mt19937_64 rng(47);
    const auto bg = oracles::synthetic_background(rng, 64, 48, oracles::BackgroundKind::Plasma);
    const auto out = composite_overlays(bg, {});
    CHECK(out.px == bg.px);
}

TEST_CASE("composite_overlays interior arithmetic is exact") {
    raster::RasterImage black(40, 40, 0.0, 0.0, 0.0, 1.0);

    BackingOverlay opaque;
    opaque.box = {4, 4, 36, 36};
    opaque.corner_radius = 3.0;
    opaque.overlay_color = {0.25, 0.5, 0.75};
    opaque.alpha = 1.0;
    auto out = composite_overlays(black, {opaque});
    const double* center = out.at(20, 20);
    CHECK(center[0] == 0.25);
    CHECK(center[1] == 0.5);
    CHECK(center[2] == 0.75);

    // Half white over black meets in the middle of linear light.
    BackingOverlay half;
    half.box = {0, 0, 40, 40};
    half.corner_radius = 0.0;
    half.overlay_color = {1.0, 1.0, 1.0};
    half.alpha = 0.5;
    out = composite_overlays(black, {half});
    const double* p = out.at(20, 20);
    CHECK(color::srgb_to_linear(p[0]) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[0] == p[1]);
    CHECK(p[1] == p[2]);
}

TEST_CASE("composited luminance equals the blend model") {
    std::mt19937_64 rng(101);
    const auto bg = oracles::synthetic_background(rng, 48, 48, oracles::BackgroundKind::Plasma);

    BackingOverlay overlay;
    overlay.box = {0, 0, 48, 48};
    overlay.corner_radius = 0.0;
    overlay.overlay_color = {0.98, 0.98, 0.98};
    overlay.alpha = 0.37;
    const auto out = composite_overlays(bg, {overlay});

    const double l_overlay = color::relative_luminance(overlay.overlay_color);
    for (int y = 4; y < 44; y += 5) {
        for (int x = 4; x < 44; x += 5) {
            const double l_bg = color::relative_luminance(bg.rgb_at(x, y));
            const double expected = blend_luminance(overlay.alpha, l_overlay, l_bg);
            const double actual = color::relative_luminance(out.rgb_at(x, y));
            CHECK(actual == doctest::Approx(expected).epsilon(1e-9));
        }
    }
}

TEST_CASE("composite_overlays is a no-op outside the rounded rect") {
    std::mt19937_64 rng(53);
    const auto bg = oracles::synthetic_background(rng, 64, 64, oracles::BackgroundKind::Gradient);

    BackingOverlay overlay;
    overlay.box = {16, 16, 48, 48};
    overlay.corner_radius = 8.0;
    overlay.overlay_color = {1.0, 1.0, 1.0};
    overlay.alpha = 1.0;
    const auto out = composite_overlays(bg, {overlay});

    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            if (overlay_pixel_coverage(overlay, x, y) == 0.0) {
                CHECK(out.at(x, y)[0] == bg.at(x, y)[0]);
                CHECK(out.at(x, y)[1] == bg.at(x, y)[1]);
                CHECK(out.at(x, y)[2] == bg.at(x, y)[2]);
            }
        }
    }

    // Corner pixels straddling the rounded boundary blend partially.
    const double corner = overlay_pixel_coverage(overlay, 18, 18);
    CHECK(corner > 0.0);
    CHECK(corner < 1.0);
    CHECK(overlay_pixel_coverage(overlay, 32, 32) == 1.0);
    CHECK(overlay_pixel_coverage(overlay, 2, 2) == 0.0);
}
