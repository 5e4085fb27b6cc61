#include "docback/color.hpp"

#include <cmath>

namespace docback::color {

double srgb_to_linear(double c) {
    c = std::clamp(c, 0.0, 1.0);
    if (c <= 0.04045) {
        return c / 12.92;
    }
    return std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
    c = std::clamp(c, 0.0, 1.0);
    if (c <= 0.04045 / 12.92) {
        return c * 12.92;
    }
    return 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double relative_luminance(const Srgb& c) {
    return 0.2126 * srgb_to_linear(c.r) + 0.7152 * srgb_to_linear(c.g) +
           0.0722 * srgb_to_linear(c.b);
}

double contrast_ratio(double l1, double l2) {
    const double hi = std::max(l1, l2);
    const double lo = std::min(l1, l2);
    return (hi + 0.05) / (lo + 0.05);
}

}  // namespace docback::color
