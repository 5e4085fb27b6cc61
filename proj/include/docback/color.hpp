#pragma once

#include <algorithm>

namespace docback::color {

/// sRGB-encoded color, each channel in [0,1].
struct Srgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    constexpr Srgb() = default;
    constexpr Srgb(double r_, double g_, double b_)
        : r(std::clamp(r_, 0.0, 1.0)),
          g(std::clamp(g_, 0.0, 1.0)),
          b(std::clamp(b_, 0.0, 1.0)) {}

    bool operator==(const Srgb&) const = default;
};

/// Decode one sRGB channel to linear light. Out-of-range inputs are
/// clamped to [0,1] before conversion.
double srgb_to_linear(double c);

/// Encode one linear-light channel back to sRGB. Inverse of
/// srgb_to_linear over [0,1].
double linear_to_srgb(double c);

/// Relative luminance of an sRGB color: 0.2126 R + 0.7152 G + 0.0722 B
/// over the linear-light channels. Result is in [0,1].
double relative_luminance(const Srgb& c);

/// WCAG contrast ratio between two relative luminances:
/// (L_max + 0.05) / (L_min + 0.05). Symmetric; range [1, 21].
double contrast_ratio(double l1, double l2);

}  // namespace docback::color
