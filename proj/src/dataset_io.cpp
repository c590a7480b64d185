#include "sslab/demand.hpp"
#include "sslab/format.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace sslab {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string sidecar_path(const std::string& csv_path) {
    std::filesystem::path p(csv_path);
    p.replace_extension(".meta.json");
    return p.string();
}

} // namespace

void write_dataset_csv(const SimulatedDataset& data, const std::string& csv_path) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw Error("cannot open '" + csv_path + "' for writing");
    const int goods = data.num_inside_goods();
    const int num_q = data.num_characteristics();
    for (int k = 1; k <= goods; ++k) out << 'y' << k << ',';
    for (int k = 1; k <= goods; ++k) out << 'p' << k << ',';
    out << 'x' << ',';
    for (int k = 1; k <= num_q; ++k) out << 'q' << k << ',';
    out << "s,v_true,v_hat\n";
    const auto n = static_cast<Eigen::Index>(data.size());
    for (Eigen::Index r = 0; r < n; ++r) {
        for (int k = 0; k < goods; ++k) out << format_double(data.y(r, k)) << ',';
        for (int k = 0; k < goods; ++k) out << format_double(data.p(r, k)) << ',';
        out << format_double(data.x[r]) << ',';
        for (int k = 0; k < num_q; ++k) out << format_double(data.q(r, k)) << ',';
        out << format_double(data.s[r]) << ',' << format_double(data.v_true[r]) << ',';
        if (data.v_hat) out << format_double((*data.v_hat)[r]);
        out << '\n';
    }
    if (!out) throw Error("write failed for '" + csv_path + "'");
    DatasetMetadata meta = data.meta;
    meta.n = data.size();
    write_metadata_json(meta, sidecar_path(csv_path));
}

SimulatedDataset read_dataset_csv(const std::string& csv_path) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw ParseError("cannot open dataset '" + csv_path + "'");
    std::string header;
    if (!std::getline(in, header)) throw ParseError(csv_path + ": empty file");
    const auto names = split_fields(header);
    int goods = 0, prices = 0, num_q = 0;
    std::size_t col = 0;
    while (col < names.size() && names[col] == "y" + std::to_string(goods + 1)) ++goods, ++col;
    while (col < names.size() && names[col] == "p" + std::to_string(prices + 1)) ++prices, ++col;
    if (goods == 0 || goods != prices)
        throw ParseError(csv_path + ": header must start with y1..yM,p1..pM");
    if (col >= names.size() || names[col] != "x") throw ParseError(csv_path + ": missing column x");
    ++col;
    while (col < names.size() && names[col] == "q" + std::to_string(num_q + 1)) ++num_q, ++col;
    if (names.size() != col + 3 || names[col] != "s" || names[col + 1] != "v_true" ||
        names[col + 2] != "v_hat")
        throw ParseError(csv_path + ": header must end with s,v_true,v_hat");

    std::vector<std::vector<double>> cols(names.size() - 1);
    std::vector<double> v_hat;
    std::size_t present = 0, absent = 0;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != names.size())
            throw ParseError(csv_path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(names.size()) + " fields, got " +
                             std::to_string(fields.size()));
        for (std::size_t c = 0; c + 1 < fields.size(); ++c)
            cols[c].push_back(parse_double(
                fields[c], csv_path + ":" + std::to_string(line_no) + " column " +
                               std::string(names[c])));
        if (fields.back().empty()) {
            ++absent;
        } else {
            ++present;
            v_hat.push_back(parse_double(fields.back(), "v_hat at line " + std::to_string(line_no)));
        }
    }
    if (present && absent) throw ParseError(csv_path + ": v_hat present on some rows only");

    const auto n = static_cast<Eigen::Index>(cols[0].size());
    SimulatedDataset d;
    d.y = Mat(n, goods);
    d.p = Mat(n, goods);
    d.x = Vec(n);
    d.q = Mat(n, num_q);
    d.s = Vec(n);
    d.v_true = Vec(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        std::size_t c = 0;
        for (int k = 0; k < goods; ++k) d.y(r, k) = cols[c++][r];
        for (int k = 0; k < goods; ++k) d.p(r, k) = cols[c++][r];
        d.x[r] = cols[c++][r];
        for (int k = 0; k < num_q; ++k) d.q(r, k) = cols[c++][r];
        d.s[r] = cols[c++][r];
        d.v_true[r] = cols[c++][r];
    }
    if (present) d.v_hat = Eigen::Map<const Vec>(v_hat.data(), n);
    d.meta.n = static_cast<std::size_t>(n);
    const auto side = sidecar_path(csv_path);
    if (std::filesystem::exists(side)) {
        d.meta = read_metadata_json(side);
        if (d.meta.n != static_cast<std::size_t>(n))
            throw ParseError(side + ": n=" + std::to_string(d.meta.n) + " but CSV has " +
                             std::to_string(n) + " rows");
    }
    return d;
}

nlohmann::json metadata_json(const DatasetMetadata& meta) {
    return {{"system", meta.system},
            {"seed", meta.seed},
            {"n", meta.n},
            {"design", meta.design},
            {"endogenous", meta.endogenous}};
}

void write_metadata_json(const DatasetMetadata& meta, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << metadata_json(meta).dump(2) << '\n';
}

DatasetMetadata read_metadata_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open metadata '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    DatasetMetadata m;
    for (const char* field : {"system", "seed", "n", "design", "endogenous"})
        if (!j.contains(field)) throw ParseError(path + ": missing field '" + field + "'");
    m.system = j.at("system");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n = j.at("n").get<std::size_t>();
    m.design = j.at("design");
    m.endogenous = j.at("endogenous").get<bool>();
    return m;
}

} // namespace sslab
