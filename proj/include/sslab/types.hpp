#pragma once

#include "sslab/errors.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>

namespace sslab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Inside good, 1-based (good L is the numeraire and has no index here).
class GoodIndex {
public:
    constexpr GoodIndex() = default;
    constexpr explicit GoodIndex(int one_based) : value_(one_based) {}

    constexpr int value() const { return value_; }
    constexpr int zero_based() const { return value_ - 1; }

    void check(int num_inside_goods) const {
        if (value_ < 1 || value_ > num_inside_goods)
            throw ArgumentError("good index " + std::to_string(value_) + " outside 1.." +
                                std::to_string(num_inside_goods));
    }

    friend constexpr bool operator==(GoodIndex, GoodIndex) = default;

private:
    int value_ = 1;
};

// Conditioning vector w = (p, x, q, v). v is absent in exogenous designs.
struct ContextPoint {
    Vec p;
    double x = 0.0;
    Vec q;
    std::optional<double> v;

    int num_inside_goods() const { return static_cast<int>(p.size()); }

    // Throws DomainError unless every price and the income are positive.
    void validate() const;

    static ContextPoint make(std::initializer_list<double> prices, double income) {
        ContextPoint w;
        w.p = Vec(static_cast<Eigen::Index>(prices.size()));
        Eigen::Index k = 0;
        for (double v : prices) w.p[k++] = v;
        w.x = income;
        return w;
    }
};

bool operator==(const ContextPoint& a, const ContextPoint& b);

// Direction along which a quantile object is differentiated: one of the
// L-1 prices, income, or the conditioning demand value y_j.
struct Coordinate {
    enum class Kind { Price, Income, ConditioningValue };

    Kind kind = Kind::Price;
    int good = 1; // 1-based good for Price and ConditioningValue

    static Coordinate price(int good) { return {Kind::Price, good}; }
    static Coordinate income() { return {Kind::Income, 0}; }
    // good: the conditioning good j, or 0 when unspecified.
    static Coordinate conditioning_value(int good = 0) { return {Kind::ConditioningValue, good}; }

    // s in 1..L-1 selects a price, s == L selects income.
    static Coordinate from_derivative_index(int s, int num_inside_goods);

    bool is_w1() const { return kind != Kind::ConditioningValue; }
    std::string name() const;

    friend bool operator==(const Coordinate&, const Coordinate&) = default;
};

// Coordinate value of w1 = (p, x) at a context.
double coordinate_value(const ContextPoint& w, Coordinate c);
// Copy of w with the given w1 coordinate shifted by delta.
ContextPoint shifted(const ContextPoint& w, Coordinate c, double delta);

enum class ChannelMode { Observable, Frozen, StableComposition };

std::string_view to_string(ChannelMode mode);
ChannelMode channel_from_string(std::string_view name);

inline constexpr ChannelMode kAllChannels[] = {ChannelMode::Observable, ChannelMode::Frozen,
                                               ChannelMode::StableComposition};

// Central-difference settings. With `relative` the step is h*max(1,|t|).
struct FdScheme {
    double h = 1e-4;
    bool richardson = true;
    bool relative = true;

    double step_at(double t) const;
};

inline constexpr double kDefaultDensityFloor = 1e-3;

} // namespace sslab
