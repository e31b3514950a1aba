#pragma once

#include <cmath>
#include <limits>

namespace ezsdu {

/// A value in [0, +inf] with an explicit infinity tag. Boundary conventions
/// of the transformed aggregator are decided on the tag, never by letting
/// IEEE infinities flow through pow().
class ExtendedNonNegative {
public:
    constexpr ExtendedNonNegative() = default;

    static constexpr ExtendedNonNegative finite(double v) { return ExtendedNonNegative(v, false); }
    static constexpr ExtendedNonNegative infinity() { return ExtendedNonNegative(0.0, true); }

    /// Storage decoding: grids keep doubles and encode +inf as IEEE infinity.
    static ExtendedNonNegative from_double(double v) {
        return std::isinf(v) && v > 0 ? infinity() : finite(v);
    }

    constexpr bool is_infinite() const { return infinite_; }
    constexpr bool is_zero() const { return !infinite_ && value_ == 0.0; }
    constexpr bool is_interior() const { return !infinite_ && value_ > 0.0; }
    constexpr double finite_value() const { return value_; }

    double to_double() const {
        return infinite_ ? std::numeric_limits<double>::infinity() : value_;
    }

    friend constexpr bool operator==(const ExtendedNonNegative&, const ExtendedNonNegative&) = default;

private:
    constexpr ExtendedNonNegative(double v, bool inf) : value_(v), infinite_(inf) {}

    double value_ = 0.0;
    bool infinite_ = false;
};

}  // namespace ezsdu
