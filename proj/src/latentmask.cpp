#include "docback/latentmask.hpp"

#include <cmath>

#include "docback/errors.hpp"
#include "docback/util.hpp"

namespace docback::latent {

namespace {

void check_lattice(const LatticeShape& shape) {
    if (shape.h < 1 || shape.w < 1 || shape.channels < 1) {
        throw ValidationError("lattice dimensions must be >= 1");
    }
}

void check_lambda(double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) {
        throw ValidationError("attenuation lambda must be in (0,1]");
    }
}

// Shared by gated_step and run_sampler so a folded run is bit-identical
// to stepping manually.
void apply_update(LatentState& state, const std::vector<double>& velocity,
                  const AttenuationMask& mask, bool attenuate, double dt) {
    const int channels = state.shape.channels;
    if (attenuate) {
        for (int cell = 0; cell < state.shape.cells(); ++cell) {
            const double m = mask.values[cell];
            for (int c = 0; c < channels; ++c) {
                const std::size_t i = static_cast<std::size_t>(cell) * channels + c;
                state.x[i] -= (m * velocity[i]) * dt;
            }
        }
    } else {
        for (std::size_t i = 0; i < state.x.size(); ++i) {
            state.x[i] -= velocity[i] * dt;
        }
    }
    state.t -= dt;
}

std::vector<double> checked_velocity(const LatentState& state, const VelocityProvider& provider) {
    std::vector<double> v = provider.evaluate(state);
    if (v.size() != state.x.size()) {
        throw Error("velocity shape mismatch from provider '" + provider.name() + "'");
    }
    for (double value : v) {
        if (!std::isfinite(value)) {
            throw Error("non-finite velocity from provider '" + provider.name() + "'");
        }
    }
    return v;
}

}  // namespace

std::size_t AttenuationMask::attenuated_cells() const {
    std::size_t count = 0;
    for (double v : values) {
        if (v != 1.0) ++count;
    }
    return count;
}

LatentState make_state(const LatticeShape& shape, double fill) {
    check_lattice(shape);
    LatentState state;
    state.shape = shape;
    state.x.assign(static_cast<std::size_t>(shape.cells()) * shape.channels, fill);
    state.t = 1.0;
    return state;
}

std::vector<double> ConstantProvider::evaluate(const LatentState& state) const {
    return std::vector<double>(state.x.size(), value_);
}

StraightPathProvider::StraightPathProvider(const LatentState& start, std::vector<double> target)
    : shape_(start.shape) {
    if (target.size() != start.x.size()) {
        throw ValidationError("straight-path target size does not match the start state");
    }
    velocity_.resize(start.x.size());
    for (std::size_t i = 0; i < velocity_.size(); ++i) velocity_[i] = start.x[i] - target[i];
}

std::vector<double> StraightPathProvider::evaluate(const LatentState& state) const {
    if (state.shape != shape_) {
        throw Error("straight-path provider evaluated on a different lattice shape");
    }
    return velocity_;
}

std::vector<double> ProceduralFieldProvider::evaluate(const LatentState& state) const {
    std::uint64_t rng = seed_;
    const double fx1 = 0.05 + 0.45 * util::next_unit(rng);
    const double fy1 = 0.05 + 0.45 * util::next_unit(rng);
    const double fx2 = 0.05 + 0.90 * util::next_unit(rng);
    const double fy2 = 0.05 + 0.90 * util::next_unit(rng);
    const double phase1 = 6.283185307179586 * util::next_unit(rng);
    const double phase2 = 6.283185307179586 * util::next_unit(rng);

    std::vector<double> v(state.x.size());
    const int channels = state.shape.channels;
    for (int row = 0; row < state.shape.h; ++row) {
        for (int col = 0; col < state.shape.w; ++col) {
            const double base =
                0.6 * std::sin(fx1 * col + fy1 * row + phase1 + 0.7 * state.t) +
                0.4 * std::sin(fx2 * col - fy2 * row + phase2 + 1.3 * state.t);
            for (int c = 0; c < channels; ++c) {
                const std::size_t i =
                    (static_cast<std::size_t>(row) * state.shape.w + col) * channels + c;
                v[i] = base + 0.15 * c + 0.1 * state.x[i];
            }
        }
    }
    return v;
}

AttenuationMask build_mask_centered(const LatticeShape& shape, double rho_mask, double lambda) {
    check_lattice(shape);
    check_lambda(lambda);
    if (rho_mask < 0.0 || rho_mask > 1.0) {
        throw ValidationError("rho_mask must be in [0,1]");
    }
    AttenuationMask mask;
    mask.shape = shape;
    mask.lambda = lambda;
    mask.source = "centered";
    mask.values.assign(static_cast<std::size_t>(shape.cells()), 1.0);

    const double side = std::sqrt(rho_mask);
    const int win_h = static_cast<int>(std::lround(side * shape.h));
    const int win_w = static_cast<int>(std::lround(side * shape.w));
    const int row0 = (shape.h - win_h) / 2;
    const int col0 = (shape.w - win_w) / 2;
    for (int row = row0; row < row0 + win_h; ++row) {
        for (int col = col0; col < col0 + win_w; ++col) {
            mask.values[static_cast<std::size_t>(row) * shape.w + col] = lambda;
        }
    }
    return mask;
}

AttenuationMask build_mask_from_boxes(const LatticeShape& shape, const std::vector<BBox>& boxes,
                                      double page_w, double page_h, double lambda) {
    check_lattice(shape);
    check_lambda(lambda);
    if (page_w <= 0.0 || page_h <= 0.0) {
        throw ValidationError("page dimensions must be positive");
    }
    AttenuationMask mask;
    mask.shape = shape;
    mask.lambda = lambda;
    mask.source = "boxes";
    mask.values.assign(static_cast<std::size_t>(shape.cells()), 1.0);

    for (const BBox& box : boxes) {
        // Outward rounding: partially covered cells are protected too.
        const int c0 = std::clamp(static_cast<int>(std::floor(box.x0 / page_w * shape.w)), 0, shape.w);
        const int c1 = std::clamp(static_cast<int>(std::ceil(box.x1 / page_w * shape.w)), 0, shape.w);
        const int r0 = std::clamp(static_cast<int>(std::floor(box.y0 / page_h * shape.h)), 0, shape.h);
        const int r1 = std::clamp(static_cast<int>(std::ceil(box.y1 / page_h * shape.h)), 0, shape.h);
        for (int row = r0; row < r1; ++row) {
            for (int col = c0; col < c1; ++col) {
                mask.values[static_cast<std::size_t>(row) * shape.w + col] = lambda;
            }
        }
    }
    return mask;
}

AttenuationMask identity_mask(const LatticeShape& shape) {
    check_lattice(shape);
    AttenuationMask mask;
    mask.shape = shape;
    mask.lambda = 1.0;
    mask.source = "none";
    mask.values.assign(static_cast<std::size_t>(shape.cells()), 1.0);
    return mask;
}

bool gate_active(int step_index, const GateSchedule& schedule) {
    if (schedule.total_steps < 1) throw ValidationError("schedule needs at least one step");
    return static_cast<double>(step_index) / schedule.total_steps >= schedule.start_fraction;
}

LatentState gated_step(const LatentState& state, const VelocityProvider& provider,
                       const AttenuationMask& mask, const GateSchedule& schedule, int k,
                       double dt, StepMode mode) {
    if (mask.shape.h != state.shape.h || mask.shape.w != state.shape.w) {
        throw Error("mask shape does not match the latent state");
    }
    if (dt <= 0.0) throw ValidationError("dt must be positive");

    const std::vector<double> v = checked_velocity(state, provider);
    const bool attenuate = mode == StepMode::Attenuate && gate_active(k, schedule);

    LatentState next = state;
    apply_update(next, v, mask, attenuate, dt);
    return next;
}

SampleResult run_sampler(const LatentState& x0, const VelocityProvider& provider,
                         const AttenuationMask& mask, const GateSchedule& schedule,
                         StepMode mode) {
    if (mask.shape.h != x0.shape.h || mask.shape.w != x0.shape.w) {
        throw Error("mask shape does not match the latent state");
    }
    const int steps = schedule.total_steps;
    if (steps < 1) throw ValidationError("schedule needs at least one step");
    const double dt = 1.0 / steps;

    SampleResult result;
    result.final_state = x0;
    result.final_state.t = 1.0;
    result.trace.reserve(static_cast<std::size_t>(steps));

    const int channels = x0.shape.channels;
    for (int k = 0; k < steps; ++k) {
        const std::vector<double> v = checked_velocity(result.final_state, provider);

        StepTrace trace;
        trace.k = k;
        trace.t_before = result.final_state.t;
        trace.gate_active = gate_active(k, schedule);
        double sum_masked = 0.0;
        double sum_unmasked = 0.0;
        std::size_t n_masked = 0;
        std::size_t n_unmasked = 0;
        for (int cell = 0; cell < x0.shape.cells(); ++cell) {
            const bool masked = mask.values[cell] != 1.0;
            for (int c = 0; c < channels; ++c) {
                const double mag = std::abs(v[static_cast<std::size_t>(cell) * channels + c]);
                if (masked) {
                    sum_masked += mag;
                    ++n_masked;
                } else {
                    sum_unmasked += mag;
                    ++n_unmasked;
                }
            }
        }
        trace.mean_abs_v_masked = n_masked ? sum_masked / n_masked : 0.0;
        trace.mean_abs_v_unmasked = n_unmasked ? sum_unmasked / n_unmasked : 0.0;
        result.trace.push_back(trace);

        const bool attenuate = mode == StepMode::Attenuate && trace.gate_active;
        apply_update(result.final_state, v, mask, attenuate, dt);
    }
    return result;
}

nlohmann::json mask_to_json(const AttenuationMask& mask) {
    nlohmann::json out;
    out["h"] = mask.shape.h;
    out["w"] = mask.shape.w;
    out["lambda"] = mask.lambda;
    out["source"] = mask.source;
    out["attenuated_cells"] = mask.attenuated_cells();
    out["values"] = mask.values;
    return out;
}

nlohmann::json trace_to_json(const std::vector<StepTrace>& trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& step : trace) {
        steps.push_back({{"k", step.k},
                         {"t", step.t_before},
                         {"gate_active", step.gate_active},
                         {"mean_abs_v_masked", step.mean_abs_v_masked},
                         {"mean_abs_v_unmasked", step.mean_abs_v_unmasked}});
    }
    return nlohmann::json{{"steps", steps}};
}

}  // namespace docback::latent
