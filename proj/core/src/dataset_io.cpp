#include "fedchan/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "fedchan/errors.hpp"

namespace fedchan::io {

namespace {

constexpr const char* kPathColumnNames[synth::kParamsPerPath] = {"pl", "delay", "aoa_az", "aoa_el", "aod_az",
                                                                  "aod_el"};

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view field, const std::string& where) {
    double v = 0.0;
    const auto* end = field.data() + field.size();
    const auto res = std::from_chars(field.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw ParseError(where + ": cannot parse number '" + std::string(field) + "'");
    return v;
}

std::uint64_t parse_u64(std::string_view field, const std::string& where) {
    std::uint64_t v = 0;
    const auto* end = field.data() + field.size();
    const auto res = std::from_chars(field.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end || field.empty())
        throw ParseError(where + ": cannot parse integer '" + std::string(field) + "'");
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> dataset_header() {
    std::vector<std::string> h = {"city", "gnb_type", "dx", "dy", "dz", "state"};
    for (std::size_t k = 0; k < synth::kPathCount; ++k) {
        char prefix[8];
        std::snprintf(prefix, sizeof(prefix), "p%02zu_", k + 1);
        for (const char* name : kPathColumnNames) h.push_back(std::string(prefix) + name);
    }
    return h;
}

void write_dataset_csv(std::ostream& out, const synth::CityDataset& dataset) {
    const auto header = dataset_header();
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& r : dataset.records) {
        out << dataset.profile.city_id << ',' << synth::to_string(r.condition.gnb) << ','
            << format_double(r.condition.dx) << ',' << format_double(r.condition.dy) << ','
            << format_double(r.condition.dz) << ',' << static_cast<int>(r.state);
        for (double v : r.paths) out << ',' << format_double(v);
        out << "\n";
    }
}

std::vector<synth::LinkRecord> read_dataset_csv(std::istream& in, const std::string& source, std::string* city_out) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ParseError(source + ":1: missing header");
    {
        const auto expected = dataset_header();
        const auto cols = split(line, ',');
        if (cols.size() != expected.size())
            throw ParseError(source + ":1: header has " + std::to_string(cols.size()) + " columns, expected " +
                             std::to_string(expected.size()));
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] != expected[i])
                throw ParseError(source + ":1: unexpected column '" + std::string(cols[i]) + "'");
    }
    std::vector<synth::LinkRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(line_no);
        const auto f = split(line, ',');
        if (f.size() != kDatasetColumns)
            throw ParseError(where + ": row has " + std::to_string(f.size()) + " fields, expected " +
                             std::to_string(kDatasetColumns));
        if (city_out && records.empty()) *city_out = std::string(f[0]);
        synth::LinkRecord r;
        if (f[1] == "terrestrial")
            r.condition.gnb = synth::GnbType::terrestrial;
        else if (f[1] == "aerial")
            r.condition.gnb = synth::GnbType::aerial;
        else
            throw ParseError(where + ": unknown gnb_type '" + std::string(f[1]) + "'");
        r.condition.dx = parse_double(f[2], where);
        r.condition.dy = parse_double(f[3], where);
        r.condition.dz = parse_double(f[4], where);
        const double state = parse_double(f[5], where);
        if (state != 0.0 && state != 1.0 && state != 2.0)
            throw ParseError(where + ": state must be 0, 1 or 2");
        r.state = static_cast<synth::LinkState>(static_cast<int>(state));
        for (std::size_t i = 0; i < synth::kPathDim; ++i) r.paths[i] = parse_double(f[6 + i], where);
        records.push_back(r);
    }
    return records;
}

std::string profile_to_meta(const synth::CityDataset& d) {
    const auto& p = d.profile;
    std::ostringstream out;
    out << "city_id=" << p.city_id << "\n"
        << "pl0=" << format_double(p.pl0) << "\n"
        << "slope1=" << format_double(p.slope1) << "\n"
        << "slope2=" << format_double(p.slope2) << "\n"
        << "d_break=" << format_double(p.d_break) << "\n"
        << "shadow_sigma=" << format_double(p.shadow_sigma) << "\n"
        << "los_decay=" << format_double(p.los_decay) << "\n"
        << "nolink_range=" << format_double(p.nolink_range) << "\n"
        << "nlos_offset=" << format_double(p.nlos_offset) << "\n"
        << "area_radius=" << format_double(p.area_radius) << "\n"
        << "hard_states=" << (p.hard_states ? 1 : 0) << "\n"
        << "seed=" << p.seed << "\n"
        << "frequency_ghz=" << format_double(p.frequency_ghz) << "\n"
        << "n_links=" << d.records.size() << "\n"
        << "n_train=" << d.n_train << "\n"
        << "n_test=" << d.n_test << "\n";
    return out.str();
}

void apply_meta(const std::string& text, synth::CityDataset& d, const std::string& source) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(source + ":" + std::to_string(line_no) + ": expected key=value");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto num = [&](const char* key, double& dst) {
        if (auto it = kv.find(key); it != kv.end()) dst = parse_double(it->second, source + ": " + key);
    };
    auto& p = d.profile;
    if (auto it = kv.find("city_id"); it != kv.end()) p.city_id = it->second;
    num("pl0", p.pl0);
    num("slope1", p.slope1);
    num("slope2", p.slope2);
    num("d_break", p.d_break);
    num("shadow_sigma", p.shadow_sigma);
    num("los_decay", p.los_decay);
    num("nolink_range", p.nolink_range);
    num("nlos_offset", p.nlos_offset);
    num("area_radius", p.area_radius);
    num("frequency_ghz", p.frequency_ghz);
    if (auto it = kv.find("hard_states"); it != kv.end()) p.hard_states = it->second == "1";
    if (auto it = kv.find("seed"); it != kv.end()) p.seed = parse_u64(it->second, source + ": seed");
    if (auto it = kv.find("n_links"); it != kv.end()) {
        const auto n_links = parse_u64(it->second, source + ": n_links");
        if (n_links != d.records.size())
            throw ParseError(source + ": n_links=" + std::to_string(n_links) + " but the dataset has " +
                             std::to_string(d.records.size()) + " records");
    }
    d.n_train = d.records.size();
    d.n_test = 0;
    if (auto it = kv.find("n_train"); it != kv.end()) {
        const auto n_train = parse_u64(it->second, source + ": n_train");
        if (n_train > d.records.size()) throw ParseError(source + ": n_train exceeds record count");
        d.n_train = n_train;
        d.n_test = d.records.size() - n_train;
    }
}

std::filesystem::path meta_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".meta");
    return p;
}

void write_dataset(const synth::CityDataset& dataset, const std::filesystem::path& csv_path) {
    {
        std::ofstream out(csv_path, std::ios::trunc);
        if (!out) throw ParseError("cannot open " + csv_path.string() + " for writing");
        write_dataset_csv(out, dataset);
    }
    std::ofstream meta(meta_path(csv_path), std::ios::trunc);
    if (!meta) throw ParseError("cannot open " + meta_path(csv_path).string() + " for writing");
    meta << profile_to_meta(dataset);
}

synth::CityDataset read_dataset(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw ParseError("cannot open " + csv_path.string());
    synth::CityDataset d;
    std::string city;
    d.records = read_dataset_csv(in, csv_path.string(), &city);
    d.profile.city_id = city.empty() ? csv_path.stem().string() : city;
    d.n_train = d.records.size();
    const auto meta = meta_path(csv_path);
    if (std::filesystem::exists(meta)) {
        std::ifstream m(meta);
        std::stringstream ss;
        ss << m.rdbuf();
        apply_meta(ss.str(), d, meta.string());
    }
    return d;
}

}  // namespace fedchan::io
