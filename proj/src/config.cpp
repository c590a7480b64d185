#include "sslab/config.hpp"

#include "sslab/format.hpp"

#include <fstream>
#include <set>

namespace sslab {

namespace {

using nlohmann::json;

// Sections whose contents are checked by their own parsers.
const std::set<std::string> kFreeForm = {"system", "design", "grid.contexts", "grid.levels",
                                         "grid.pairs", "estimator.overrides", "mc.systems",
                                         "mc.ns", "fd", "channels"};

json uniform(double lo, double hi) { return {{"kind", "uniform"}, {"lo", lo}, {"hi", hi}}; }

json ctx(double p1, double p2, double x) { return {{"p", {p1, p2}}, {"x", x}}; }

void merge(json& base, const json& user, const std::string& path) {
    if (!user.is_object()) throw ConfigError("configuration" + (path.empty() ? "" : " '" + path + "'") +
                                             " must be an object");
    for (const auto& [key, value] : user.items()) {
        const std::string at = path.empty() ? key : path + "." + key;
        if (!base.contains(key)) throw ConfigError("unknown configuration key '" + at + "'");
        if (kFreeForm.count(at) || !base[key].is_object() || base[key].empty())
            base[key] = value;
        else
            merge(base[key], value, at);
    }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("configuration key '" + where + key + "' has the wrong type");
    }
}

} // namespace

json defaults_json() {
    const json contexts = json::array({ctx(1.0, 2.0, 40.0), ctx(0.95, 2.05, 38.0), ctx(1.05, 1.95, 42.0)});
    return {
        {"seed", nullptr},
        {"system", {{"name", "CD3"}}},
        {"design", {{"prices", json::array({uniform(0.8, 1.2), uniform(1.6, 2.4)})},
                    {"income", uniform(30.0, 50.0)}}},
        {"n", 100000},
        {"endogenous", false},
        {"control", "estimated"},
        {"channels", {"observable", "frozen", "stable_composition"}},
        {"test_channel", "stable_composition"},
        {"grid", {{"levels", {0.25, 0.5, 0.75}},
                  {"contexts", contexts},
                  {"pairs", json::array({json::array({1, 2})})},
                  {"trim_lo", 0.1},
                  {"trim_hi", 0.9}}},
        {"fd", nullptr},
        {"oracle", {{"integration", "quadrature"},
                    {"draws", 1000000},
                    {"seed", 1},
                    {"outcome_smoothing", 0.01},
                    {"conditioning_bandwidth", 0.05},
                    {"force_smoothed_conditioning", false},
                    {"density_floor", kDefaultDensityFloor},
                    {"round_trip_tolerance", 1e-6}}},
        {"estimator", {{"bandwidth_scale", 5.0},
                       {"outcome_scale", 1.0},
                       {"overrides", json::object()},
                       {"fd_fraction", 0.5},
                       {"use_control", true},
                       {"min_effective", 50.0},
                       {"density_floor", kDefaultDensityFloor},
                       {"grid_points", 401},
                       {"grid_expansion", 0.05},
                       {"round_trip_tolerance", 0.02}}},
        {"B", 199},
        {"output_dir", "sslab_out"},
        {"oracle_verify_tolerance", 2e-3},
        {"mc", {{"systems", json::array({{{"name", "CD3"}}, {{"name", "ASYM3"}, {"c", 1.0}}})},
                {"ns", {100000}},
                {"reps", 20},
                {"B", 99},
                {"nominal", 0.05}}},
    };
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
        node = &(*node)[part];
        start = dot + 1;
    }
}

std::string RunConfig::hash() const {
    json keyed = resolved;
    keyed.erase("output_dir"); // where results go does not change them
    return hex64(fnv1a(keyed.dump()));
}

RunConfig resolve_config(const json& user, const std::vector<std::string>& overrides) {
    json merged_user = user.is_null() ? json::object() : user;
    for (const auto& o : overrides) apply_override(merged_user, o);
    json r = defaults_json();
    merge(r, merged_user, "");

    RunConfig c;
    c.resolved = r;
    const json& seed = r["seed"];
    if (!(seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<std::int64_t>() >= 0)))
        throw ConfigError("configuration needs a nonnegative integer 'seed'");
    c.seed = r["seed"].get<std::uint64_t>();
    try {
        c.system = r["system"];
        make_system(c.system); // validates
        c.design = Design::from_json(r["design"]);
        c.grid = GridDesign::from_json(r["grid"]);
        c.grid.validate();
        for (const auto& s : r["mc"]["systems"]) make_system(s);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
    c.n = get<std::size_t>(r, "n", "");
    if (c.n == 0) throw ConfigError("configuration key 'n' must be positive");
    c.endogenous = get<bool>(r, "endogenous", "");
    const auto control = get<std::string>(r, "control", "");
    if (control == "estimated") c.control = ControlMode::Estimated;
    else if (control == "true") c.control = ControlMode::TrueV;
    else throw ConfigError("configuration key 'control' must be \"estimated\" or \"true\"");
    try {
        for (const auto& ch : r["channels"]) c.channels.push_back(channel_from_string(ch.get<std::string>()));
        c.test_channel = channel_from_string(get<std::string>(r, "test_channel", ""));
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    } catch (const json::exception&) {
        throw ConfigError("configuration key 'channels' must list channel names");
    }
    if (c.channels.empty()) throw ConfigError("configuration key 'channels' is empty");

    if (!r["fd"].is_null()) {
        const json& f = r["fd"];
        for (const auto& [key, _] : f.items())
            if (key != "h" && key != "richardson" && key != "relative")
                throw ConfigError("unknown configuration key 'fd." + key + "'");
        FdScheme s;
        if (f.contains("h")) s.h = get<double>(f, "h", "fd.");
        if (f.contains("richardson")) s.richardson = get<bool>(f, "richardson", "fd.");
        if (f.contains("relative")) s.relative = get<bool>(f, "relative", "fd.");
        if (!(s.h > 0.0)) throw ConfigError("configuration key 'fd.h' must be positive");
        c.fd = s;
    }

    const json& o = r["oracle"];
    const auto integration = get<std::string>(o, "integration", "oracle.");
    if (integration == "quadrature") c.oracle.integration = Integration::Quadrature;
    else if (integration == "monte_carlo") c.oracle.integration = Integration::MonteCarlo;
    else throw ConfigError("configuration key 'oracle.integration' must be quadrature or monte_carlo");
    c.oracle.draws = get<std::size_t>(o, "draws", "oracle.");
    c.oracle.seed = get<std::uint64_t>(o, "seed", "oracle.");
    c.oracle.outcome_smoothing = get<double>(o, "outcome_smoothing", "oracle.");
    c.oracle.conditioning_bandwidth = get<double>(o, "conditioning_bandwidth", "oracle.");
    c.oracle.force_smoothed_conditioning = get<bool>(o, "force_smoothed_conditioning", "oracle.");
    c.oracle.density_floor = get<double>(o, "density_floor", "oracle.");
    c.oracle.round_trip_tolerance = get<double>(o, "round_trip_tolerance", "oracle.");
    if (c.fd) c.oracle.scheme = *c.fd;

    const json& e = r["estimator"];
    c.estimator.bandwidth_scale = get<double>(e, "bandwidth_scale", "estimator.");
    c.estimator.outcome_scale = get<double>(e, "outcome_scale", "estimator.");
    c.estimator.overrides = get<std::map<std::string, double>>(e, "overrides", "estimator.");
    c.estimator.fd_fraction = get<double>(e, "fd_fraction", "estimator.");
    c.estimator.use_control = get<bool>(e, "use_control", "estimator.");
    c.estimator.estimator.min_effective = get<double>(e, "min_effective", "estimator.");
    c.estimator.estimator.density_floor = get<double>(e, "density_floor", "estimator.");
    c.estimator.estimator.grid_points = get<int>(e, "grid_points", "estimator.");
    c.estimator.estimator.grid_expansion = get<double>(e, "grid_expansion", "estimator.");
    c.estimator.round_trip_tolerance = get<double>(e, "round_trip_tolerance", "estimator.");
    if (!(c.estimator.bandwidth_scale > 0.0 && c.estimator.outcome_scale > 0.0 &&
          c.estimator.fd_fraction > 0.0))
        throw ConfigError("estimator scales and fd_fraction must be positive");

    c.B = get<int>(r, "B", "");
    if (c.B < 19) throw ConfigError("configuration key 'B' must be at least 19");
    c.output_dir = get<std::string>(r, "output_dir", "");
    c.oracle_verify_tolerance = get<double>(r, "oracle_verify_tolerance", "");

    const json& m = r["mc"];
    c.mc.systems = m["systems"].get<std::vector<json>>();
    c.mc.ns = get<std::vector<std::size_t>>(m, "ns", "mc.");
    c.mc.reps = get<std::size_t>(m, "reps", "mc.");
    c.mc.B = get<int>(m, "B", "mc.");
    c.mc.nominal = get<double>(m, "nominal", "mc.");
    if (c.mc.B < 19) throw ConfigError("configuration key 'mc.B' must be at least 19");
    if (c.mc.reps == 0) throw ConfigError("configuration key 'mc.reps' must be positive");
    if (c.mc.ns.empty() || c.mc.systems.empty())
        throw ConfigError("configuration keys 'mc.ns' and 'mc.systems' must be nonempty");
    c.mc.channel = c.test_channel;
    c.mc.seed = c.seed;
    c.mc.design = c.design;
    c.mc.endogenous = c.endogenous;
    c.mc.grid = c.grid;
    c.mc.estimator = c.estimator;
    return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json user = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read configuration " + path);
        try {
            in >> user;
        } catch (const json::exception& e) {
            throw ConfigError(path + ": " + e.what());
        }
    }
    return resolve_config(user, overrides);
}

} // namespace sslab
