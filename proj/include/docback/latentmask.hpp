#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "docback/geometry.hpp"

namespace docback::latent {

struct LatticeShape {
    int h = 0;
    int w = 0;
    int channels = 1;

    int cells() const { return h * w; }
    bool operator==(const LatticeShape&) const = default;
};

/// Per-cell update multiplier over the lattice. Every value is either
/// `lambda` (attenuated cell) or 1 (free cell).
struct AttenuationMask {
    LatticeShape shape;
    std::vector<double> values;  // h * w, row-major
    double lambda = 1.0;
    std::string source;  // "centered" | "boxes" | "none"

    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * shape.w + col]; }
    std::size_t attenuated_cells() const;
};

/// Attenuation starts once k/K reaches start_fraction.
struct GateSchedule {
    int total_steps = 50;
    double start_fraction = 0.29;
};

/// Latent lattice state at normalized time t (1 at the start of
/// sampling, 0 at the end).
struct LatentState {
    LatticeShape shape;
    std::vector<double> x;  // h * w * channels, cell-major then channel
    double t = 1.0;

    double& value(int row, int col, int c) {
        return x[(static_cast<std::size_t>(row) * shape.w + col) * shape.channels + c];
    }
    double value(int row, int col, int c) const {
        return x[(static_cast<std::size_t>(row) * shape.w + col) * shape.channels + c];
    }
};

LatentState make_state(const LatticeShape& shape, double fill = 0.0);

/// Velocity source driving the sampler; stands in for a generative
/// backbone. Implementations must be safe for concurrent evaluate calls.
class VelocityProvider {
public:
    virtual ~VelocityProvider() = default;
    virtual std::vector<double> evaluate(const LatentState& state) const = 0;
    virtual std::string name() const = 0;
};

/// Uniform velocity everywhere.
class ConstantProvider : public VelocityProvider {
public:
    explicit ConstantProvider(double value) : value_(value) {}
    std::vector<double> evaluate(const LatentState& state) const override;
    std::string name() const override { return "constant"; }

private:
    double value_;
};

/// Straight-path velocity field x1 - target, fixed at construction, so a
/// full unit-time integration carries the start state onto the target.
class StraightPathProvider : public VelocityProvider {
public:
    StraightPathProvider(const LatentState& start, std::vector<double> target);
    std::vector<double> evaluate(const LatentState& state) const override;
    std::string name() const override { return "straight_path"; }

private:
    std::vector<double> velocity_;
    LatticeShape shape_;
};

/// Smooth seeded pseudo-texture field over cell coordinates and time.
class ProceduralFieldProvider : public VelocityProvider {
public:
    explicit ProceduralFieldProvider(std::uint64_t seed) : seed_(seed) {}
    std::vector<double> evaluate(const LatentState& state) const override;
    std::string name() const override { return "procedural"; }

private:
    std::uint64_t seed_;
};

enum class StepMode {
    Attenuate,  // masked cells move by lambda x the raw update
    Literal,    // value-preserving formulation; identical to vanilla
};

/// Centered window covering rho_mask of the lattice, holding lambda.
AttenuationMask build_mask_centered(const LatticeShape& shape, double rho_mask, double lambda);

/// Page boxes scaled to lattice cells with outward rounding, so the
/// protected area is never under-covered. Union over boxes.
AttenuationMask build_mask_from_boxes(const LatticeShape& shape, const std::vector<BBox>& boxes,
                                      double page_w, double page_h, double lambda);

AttenuationMask identity_mask(const LatticeShape& shape);

bool gate_active(int step_index, const GateSchedule& schedule);

/// One Euler step. With the gate active in Attenuate mode the velocity
/// is multiplied cell-wise by the mask; otherwise the vanilla update
/// x <- x - v dt applies untouched.
LatentState gated_step(const LatentState& state, const VelocityProvider& provider,
                       const AttenuationMask& mask, const GateSchedule& schedule, int k,
                       double dt, StepMode mode);

struct StepTrace {
    int k = 0;
    double t_before = 0.0;
    bool gate_active = false;
    double mean_abs_v_masked = 0.0;
    double mean_abs_v_unmasked = 0.0;
};

struct SampleResult {
    LatentState final_state;
    std::vector<StepTrace> trace;
};

/// Run total_steps gated steps with dt = 1/total_steps from t=1 to t=0.
SampleResult run_sampler(const LatentState& x0, const VelocityProvider& provider,
                         const AttenuationMask& mask, const GateSchedule& schedule,
                         StepMode mode);

nlohmann::json mask_to_json(const AttenuationMask& mask);
nlohmann::json trace_to_json(const std::vector<StepTrace>& trace);

}  // namespace docback::latent
