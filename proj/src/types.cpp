#include "sslab/types.hpp"

#include <cmath>

namespace sslab {

void ContextPoint::validate() const {
    if (p.size() == 0) throw DomainError("context has no prices");
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        if (!(p[k] > 0.0) || !std::isfinite(p[k]))
            throw DomainError("price p" + std::to_string(k + 1) + " must be positive, got " +
                              std::to_string(p[k]));
    }
    if (!(x > 0.0) || !std::isfinite(x))
        throw DomainError("income x must be positive, got " + std::to_string(x));
}

bool operator==(const ContextPoint& a, const ContextPoint& b) {
    return a.p.size() == b.p.size() && a.p == b.p && a.x == b.x && a.q.size() == b.q.size() &&
           a.q == b.q && a.v == b.v;
}

Coordinate Coordinate::from_derivative_index(int s, int num_inside_goods) {
    if (s >= 1 && s <= num_inside_goods) return price(s);
    if (s == num_inside_goods + 1) return income();
    throw ArgumentError("derivative index s=" + std::to_string(s) + " outside 1.." +
                        std::to_string(num_inside_goods + 1));
}

std::string Coordinate::name() const {
    switch (kind) {
    case Kind::Price:
        return "p" + std::to_string(good);
    case Kind::Income:
        return "x";
    case Kind::ConditioningValue:
        return "y_cond";
    }
    return "?";
}

double coordinate_value(const ContextPoint& w, Coordinate c) {
    switch (c.kind) {
    case Coordinate::Kind::Price:
        if (c.good < 1 || c.good > w.num_inside_goods())
            throw ArgumentError("price coordinate out of range");
        return w.p[c.good - 1];
    case Coordinate::Kind::Income:
        return w.x;
    case Coordinate::Kind::ConditioningValue:
        break;
    }
    throw ArgumentError("conditioning value is not a coordinate of w");
}

ContextPoint shifted(const ContextPoint& w, Coordinate c, double delta) {
    ContextPoint out = w;
    switch (c.kind) {
    case Coordinate::Kind::Price:
        if (c.good < 1 || c.good > w.num_inside_goods())
            throw ArgumentError("price coordinate out of range");
        out.p[c.good - 1] += delta;
        return out;
    case Coordinate::Kind::Income:
        out.x += delta;
        return out;
    case Coordinate::Kind::ConditioningValue:
        break;
    }
    throw ArgumentError("conditioning value is not a coordinate of w");
}

std::string_view to_string(ChannelMode mode) {
    switch (mode) {
    case ChannelMode::Observable:
        return "observable";
    case ChannelMode::Frozen:
        return "frozen";
    case ChannelMode::StableComposition:
        return "stable_composition";
    }
    return "unknown";
}

ChannelMode channel_from_string(std::string_view name) {
    if (name == "observable") return ChannelMode::Observable;
    if (name == "frozen") return ChannelMode::Frozen;
    if (name == "stable_composition") return ChannelMode::StableComposition;
    throw ArgumentError("unknown channel mode '" + std::string(name) + "'");
}

double FdScheme::step_at(double t) const {
    if (!(h > 0.0)) throw ArgumentError("finite-difference step must be positive");
    return relative ? h * std::max(1.0, std::abs(t)) : h;
}

} // namespace sslab
