#include "sslab/harness.hpp"

#include "sslab/format.hpp"
#include "sslab/parallel.hpp"
#include "sslab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace sslab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using nlohmann::json;

// Non-finite doubles are stored as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

const json& field(const json& j, const std::string& name, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    auto it = j.find(name);
    if (it == j.end()) throw ParseError(where + ": missing field '" + name + "'");
    return *it;
}

double get_num(const json& j, const std::string& name, const std::string& where) {
    const json& v = field(j, name, where);
    if (v.is_null()) return kNaN;
    if (!v.is_number()) throw ParseError(where + ": field '" + name + "' is not a number");
    return v.get<double>();
}

int get_int(const json& j, const std::string& name, const std::string& where) {
    const json& v = field(j, name, where);
    if (!v.is_number_integer()) throw ParseError(where + ": field '" + name + "' is not an integer");
    return v.get<int>();
}

std::string get_str(const json& j, const std::string& name, const std::string& where) {
    const json& v = field(j, name, where);
    if (!v.is_string()) throw ParseError(where + ": field '" + name + "' is not a string");
    return v.get<std::string>();
}

std::vector<double> get_vec(const json& j, const std::string& name, const std::string& where) {
    const json& v = field(j, name, where);
    if (!v.is_array()) throw ParseError(where + ": field '" + name + "' is not an array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (e.is_null()) out.push_back(kNaN);
        else if (e.is_number()) out.push_back(e.get<double>());
        else throw ParseError(where + ": field '" + name + "' has a non-numeric entry");
    }
    return out;
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(num(v[k]));
    return a;
}

Vec to_vec(const std::vector<double>& v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[k];
    return out;
}

// NaN-aware equality for round-trip checks.
bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (!same(a[k], b[k])) return false;
    return true;
}

std::string describe(const EvaluationPoint& pt) {
    std::ostringstream os;
    os << "point p=(";
    for (Eigen::Index k = 0; k < pt.w.p.size(); ++k)
        os << (k ? "," : "") << format_double(pt.w.p[k]);
    os << ") x=" << format_double(pt.w.x) << " pair (" << pt.i.value() << "," << pt.j.value()
       << ") level " << format_double(pt.level_i);
    return os.str();
}

} // namespace

json context_to_json(const ContextPoint& w) {
    json j{{"p", vec_json(w.p)}, {"x", num(w.x)}, {"q", vec_json(w.q)}};
    j["v"] = w.v ? num(*w.v) : json(nullptr);
    return j;
}

ContextPoint context_from_json(const json& j) {
    const std::string where = "context";
    ContextPoint w;
    w.p = to_vec(get_vec(j, "p", where));
    w.x = get_num(j, "x", where);
    if (j.contains("q")) w.q = to_vec(get_vec(j, "q", where));
    if (j.contains("v") && !j["v"].is_null()) w.v = get_num(j, "v", where);
    return w;
}

void GridDesign::validate() const {
    if (!(trim_lo > 0.0 && trim_lo < trim_hi && trim_hi < 1.0))
        throw ArgumentError("grid trimming bounds must satisfy 0 < lo < hi < 1");
    if (levels.empty()) throw ArgumentError("grid has no quantile levels");
    for (double l : levels)
        if (!(l >= trim_lo && l <= trim_hi))
            throw ArgumentError("grid level " + format_double(l) + " outside the trimmed range [" +
                                format_double(trim_lo) + ", " + format_double(trim_hi) + "]");
    if (contexts.empty()) throw ArgumentError("grid has no contexts");
    for (const auto& w : contexts) w.validate();
    if (pairs.empty()) throw ArgumentError("grid has no good pairs");
    for (const auto& [i, j] : pairs)
        if (i == j) throw ArgumentError("grid pair needs i != j");
}

json GridDesign::to_json() const {
    json ctx = json::array();
    for (const auto& w : contexts) ctx.push_back(context_to_json(w));
    json pr = json::array();
    for (const auto& [i, j] : pairs) pr.push_back({i, j});
    return {{"levels", levels}, {"contexts", ctx}, {"pairs", pr},
            {"trim_lo", trim_lo}, {"trim_hi", trim_hi}};
}

GridDesign GridDesign::from_json(const json& j) {
    const std::string where = "grid";
    GridDesign g;
    if (j.contains("levels")) g.levels = get_vec(j, "levels", where);
    if (j.contains("trim_lo")) g.trim_lo = get_num(j, "trim_lo", where);
    if (j.contains("trim_hi")) g.trim_hi = get_num(j, "trim_hi", where);
    for (const auto& c : field(j, "contexts", where)) g.contexts.push_back(context_from_json(c));
    if (j.contains("pairs")) {
        g.pairs.clear();
        for (const auto& p : j["pairs"]) {
            if (!p.is_array() || p.size() != 2) throw ParseError("grid: pairs entries are [i, j]");
            g.pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
        }
    }
    return g;
}

EvaluationGrid build_grid(const QuantileProvider& provider, const GridDesign& design) {
    design.validate();
    EvaluationGrid grid;
    grid.trim_lo = design.trim_lo;
    grid.trim_hi = design.trim_hi;
    const int goods = provider.num_inside_goods();
    for (const auto& w : design.contexts) {
        for (double level : design.levels) {
            for (const auto& [i, j] : design.pairs) {
                EvaluationPoint pt;
                pt.w = w;
                pt.i = GoodIndex(i);
                pt.j = GoodIndex(j);
                pt.i.check(goods);
                pt.j.check(goods);
                pt.level_i = level;
                pt.level_j = level;
                try {
                    pt.y_i = provider.marginal_quantile(w, pt.i, level);
                    pt.y_j = provider.marginal_quantile(w, pt.j, level);
                    const double f_ij = provider.conditional_density(w, pt.i, pt.j, pt.y_j, pt.y_i);
                    const double f_ji = provider.conditional_density(w, pt.j, pt.i, pt.y_i, pt.y_j);
                    const double floor = provider.density_floor();
                    if (!(f_ij >= floor && f_ji >= floor))
                        throw DegeneracyError("conditional density below the floor");
                } catch (const Error& e) {
                    grid.dropped.push_back(describe(pt) + ": " + e.what());
                    continue;
                }
                grid.points.push_back(pt);
            }
        }
    }
    if (grid.points.empty())
        throw EstimationError("every grid point was dropped (" +
                              std::to_string(grid.dropped.size()) + " candidates)");
    return grid;
}

std::vector<PointResult> evaluate_residual_field(const QuantileProvider& provider,
                                                 const EvaluationGrid& grid, ChannelMode channel,
                                                 const std::optional<FdScheme>& scheme,
                                                 bool all_corrections, int threads) {
    std::vector<PointResult> out(grid.points.size());
    parallel_for(
        grid.points.size(),
        [&](std::size_t k) {
            try {
                const auto& pt = grid.points[k];
                const QuantileIndices q = quantile_indices(provider, pt);
                out[k].residual = symmetry_sides(provider, pt, q, channel, scheme, all_corrections);
            } catch (const Error& e) {
                out[k].error = e.what();
            }
        },
        threads > 0 ? threads : thread_count());
    return out;
}

double test_statistic(const std::vector<double>& residuals, const std::vector<double>& weights) {
    if (!weights.empty() && weights.size() != residuals.size())
        throw ArgumentError("weights and residuals differ in length");
    double num_sum = 0.0, den = 0.0;
    for (std::size_t k = 0; k < residuals.size(); ++k) {
        if (!std::isfinite(residuals[k])) continue;
        const double wk = weights.empty() ? 1.0 : weights[k];
        if (!(wk >= 0.0)) throw ArgumentError("negative grid weight");
        num_sum += wk * residuals[k] * residuals[k];
        den += wk;
    }
    if (!(den > 0.0)) throw EstimationError("no evaluable grid points for the statistic");
    return num_sum / den;
}

std::vector<double> bootstrap_frequencies(std::size_t n, std::uint64_t seed, int b) {
    std::vector<double> freq(n, 0.0);
    const std::uint64_t stream = rng::stream::kBootstrap + static_cast<std::uint64_t>(b);
    for (std::size_t k = 0; k < n; ++k) {
        auto row = static_cast<std::size_t>(rng::uniform(seed, stream, k) * static_cast<double>(n));
        freq[std::min(row, n - 1)] += 1.0;
    }
    return freq;
}

BootstrapResult bootstrap_pvalue(const KernelProvider& provider, const EvaluationGrid& grid,
                                 ChannelMode channel, int B, std::uint64_t seed) {
    if (B < 19) throw ArgumentError("bootstrap needs at least 19 replicates");
    BootstrapResult res;
    res.field = evaluate_residual_field(provider, grid, channel, std::nullopt, true);
    std::vector<double> base(res.field.size(), kNaN);
    std::size_t ok = 0;
    for (std::size_t k = 0; k < base.size(); ++k)
        if (res.field[k].ok()) {
            base[k] = res.field[k].residual->residual;
            ++ok;
        }
    if (2 * ok < base.size())
        throw EstimationError("only " + std::to_string(ok) + " of " + std::to_string(base.size()) +
                              " grid points could be evaluated");
    res.statistic = test_statistic(base);

    const std::size_t n = provider.estimator().data().size();
    res.replicates.assign(static_cast<std::size_t>(B), kNaN);
    parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
        auto freq = std::make_shared<const std::vector<double>>(
            bootstrap_frequencies(n, seed, static_cast<int>(b)));
        const KernelProvider rep = provider.resampled(freq);
        const auto field = evaluate_residual_field(rep, grid, channel, std::nullopt, false, 1);
        // A replicate counts only if it evaluates every point the full sample did.
        std::vector<double> centered(field.size(), kNaN);
        for (std::size_t k = 0; k < field.size(); ++k) {
            if (std::isnan(base[k])) continue;
            if (!field[k].ok()) return;
            centered[k] = field[k].residual->residual - base[k];
        }
        res.replicates[b] = test_statistic(centered);
    });

    std::size_t exceed = 0, valid = 0;
    for (double t : res.replicates) {
        if (std::isnan(t)) {
            ++res.failed;
            continue;
        }
        ++valid;
        if (t >= res.statistic) ++exceed;
    }
    if (5 * res.failed > static_cast<std::size_t>(B))
        throw UnreliableBootstrapError(std::to_string(res.failed) + " of " + std::to_string(B) +
                                       " bootstrap replicates failed");
    res.p_value = (1.0 + static_cast<double>(exceed)) / (static_cast<double>(valid) + 1.0);
    return res;
}

McStudy monte_carlo_study(const McConfig& config) {
    if (config.reps == 0) throw ArgumentError("Monte Carlo study needs at least one replication");
    if (config.systems.empty() || config.ns.empty())
        throw ArgumentError("Monte Carlo study needs systems and sample sizes");
    config.grid.validate();
    McStudy study;
    for (const auto& spec : config.systems) {
        const auto system = make_system(spec);
        for (std::size_t n : config.ns) {
            McCell cell;
            cell.system = system->name();
            cell.n = n;
            cell.channel = config.channel;
            std::vector<double> ts;
            std::size_t rejections = 0;
            for (std::size_t r = 0; r < config.reps; ++r) {
                McReplicate rec;
                rec.system = cell.system;
                rec.n = n;
                rec.rep = r;
                rec.seed = rng::derive_seed(config.seed, r);
                try {
                    auto data = std::make_shared<SimulatedDataset>(simulate_cross_section(
                        *system, config.design, n, rec.seed, config.endogenous));
                    if (config.endogenous)
                        *data = control_residuals(*data, ControlMode::Estimated);
                    const KernelProvider provider(data, config.estimator);
                    const EvaluationGrid grid = build_grid(provider, config.grid);
                    const BootstrapResult b =
                        bootstrap_pvalue(provider, grid, config.channel, config.B, rec.seed);
                    rec.statistic = b.statistic;
                    rec.p_value = b.p_value;
                    ts.push_back(b.statistic);
                    if (b.p_value <= config.nominal) ++rejections;
                } catch (const Error& e) {
                    rec.error = e.what();
                    rec.statistic = rec.p_value = kNaN;
                    cell.errors.push_back("rep " + std::to_string(r) + ": " + e.what());
                }
                study.replicates.push_back(rec);
            }
            cell.reps = ts.size();
            if (!ts.empty()) {
                double mean = 0.0;
                for (double t : ts) mean += t;
                mean /= static_cast<double>(ts.size());
                double ss = 0.0;
                for (double t : ts) ss += (t - mean) * (t - mean);
                cell.mean_T = mean;
                cell.sd_T = ts.size() > 1 ? std::sqrt(ss / static_cast<double>(ts.size() - 1)) : 0.0;
                cell.reject_rate = static_cast<double>(rejections) / static_cast<double>(ts.size());
            } else {
                cell.mean_T = cell.sd_T = cell.reject_rate = kNaN;
            }
            study.cells.push_back(std::move(cell));
        }
    }
    return study;
}

void write_mc_csv(const McStudy& study, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path);
    out << "system,n,channel,reps,reject_rate_5pct,mean_T,sd_T\n";
    for (const auto& c : study.cells)
        out << c.system << ',' << c.n << ',' << to_string(c.channel) << ',' << c.reps << ','
            << format_double(c.reject_rate) << ',' << format_double(c.mean_T) << ','
            << format_double(c.sd_T) << '\n';
}

ReportPoint ReportPoint::from(const EvaluationPoint& pt, ChannelMode channel,
                              const PointResult& r) {
    ReportPoint out;
    out.w = pt.w;
    out.i = pt.i.value();
    out.j = pt.j.value();
    out.y_i = pt.y_i;
    out.y_j = pt.y_j;
    out.level_i = pt.level_i;
    out.level_j = pt.level_j;
    out.channel = channel;
    if (r.ok()) {
        const auto& s = *r.residual;
        out.lhs = s.lhs;
        out.rhs = s.rhs;
        out.residual = s.residual;
        out.C = s.corrections.C;
        out.D.assign(s.corrections.D.data(), s.corrections.D.data() + s.corrections.D.size());
        out.D_x = s.corrections.D_x;
    } else {
        out.lhs = out.rhs = out.residual = out.C = out.D_x = kNaN;
        out.error = r.error;
    }
    return out;
}

bool operator==(const ReportPoint& a, const ReportPoint& b) {
    return a.w == b.w && a.i == b.i && a.j == b.j && same(a.y_i, b.y_i) && same(a.y_j, b.y_j) &&
           same(a.level_i, b.level_i) && same(a.level_j, b.level_j) && a.channel == b.channel &&
           same(a.lhs, b.lhs) && same(a.rhs, b.rhs) && same(a.residual, b.residual) &&
           same(a.C, b.C) && same(a.D, b.D) && same(a.D_x, b.D_x) && a.error == b.error;
}

bool operator==(const TestReport& a, const TestReport& b) {
    return a.meta == b.meta && a.points == b.points && same(a.statistic, b.statistic) &&
           same(a.replicates, b.replicates) && same(a.p_value, b.p_value);
}

json report_to_json(const TestReport& report) {
    json pts = json::array();
    for (const auto& p : report.points) {
        json d = json::array();
        for (double v : p.D) d.push_back(num(v));
        json e{{"w", context_to_json(p.w)},
               {"i", p.i},
               {"j", p.j},
               {"y_i", num(p.y_i)},
               {"y_j", num(p.y_j)},
               {"level_i", num(p.level_i)},
               {"level_j", num(p.level_j)},
               {"channel", std::string(to_string(p.channel))},
               {"lhs", num(p.lhs)},
               {"rhs", num(p.rhs)},
               {"residual", num(p.residual)},
               {"corrections", {{"C", num(p.C)}, {"D", d}, {"Dx", num(p.D_x)}}}};
        if (!p.error.empty()) e["error"] = p.error;
        pts.push_back(std::move(e));
    }
    json reps = json::array();
    for (double t : report.replicates) reps.push_back(num(t));
    return {{"meta", report.meta},
            {"points", pts},
            {"statistic", num(report.statistic)},
            {"replicates", reps},
            {"p_value", num(report.p_value)}};
}

TestReport report_from_json(const json& j) {
    TestReport r;
    const std::string where = "report";
    r.meta = field(j, "meta", where);
    for (const char* key : {"seed", "config_hash", "runtime_s"}) field(r.meta, key, "report.meta");
    const json& pts = field(j, "points", where);
    if (!pts.is_array()) throw ParseError("report: field 'points' is not an array");
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const std::string at = "report.points[" + std::to_string(k) + "]";
        const json& e = pts[k];
        ReportPoint p;
        p.w = context_from_json(field(e, "w", at));
        p.i = get_int(e, "i", at);
        p.j = get_int(e, "j", at);
        p.y_i = get_num(e, "y_i", at);
        p.y_j = get_num(e, "y_j", at);
        p.level_i = e.contains("level_i") ? get_num(e, "level_i", at) : kNaN;
        p.level_j = e.contains("level_j") ? get_num(e, "level_j", at) : kNaN;
        try {
            p.channel = channel_from_string(get_str(e, "channel", at));
        } catch (const ArgumentError& err) {
            throw ParseError(at + ": field 'channel': " + err.what());
        }
        p.lhs = get_num(e, "lhs", at);
        p.rhs = get_num(e, "rhs", at);
        p.residual = get_num(e, "residual", at);
        const json& c = field(e, "corrections", at);
        p.C = get_num(c, "C", at + ".corrections");
        p.D = get_vec(c, "D", at + ".corrections");
        p.D_x = get_num(c, "Dx", at + ".corrections");
        if (e.contains("error")) p.error = get_str(e, "error", at);
        r.points.push_back(std::move(p));
    }
    r.statistic = get_num(j, "statistic", where);
    r.replicates = get_vec(j, "replicates", where);
    r.p_value = get_num(j, "p_value", where);
    return r;
}

void write_report(const TestReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path);
    out << report_to_json(report).dump(2) << '\n';
}

TestReport read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot read " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return report_from_json(j);
}

void write_residual_csv(const TestReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path);
    out << "point_id,level_i,level_j,residual,channel\n";
    // Points are stored channel by channel; the id counts within a channel.
    std::map<ChannelMode, std::size_t> next;
    for (const auto& p : report.points)
        out << next[p.channel]++ << ',' << format_double(p.level_i) << ','
            << format_double(p.level_j) << ',' << format_double(p.residual) << ','
            << to_string(p.channel) << '\n';
}

} // namespace sslab
