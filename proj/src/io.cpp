#include "sehs/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"
#include "sehs/errors.hpp"

namespace sehs::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ConfigError("csv: missing column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
    const std::string& s = text(row, name);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("csv: column '" + name + "' row " + std::to_string(row) + " is not a number: '" + s + "'");
    }
}

const std::string& CsvTable::text(std::size_t row, const std::string& name) const {
    const std::size_t c = column(name);
    if (row >= rows.size() || c >= rows[row].size()) {
        throw ConfigError("csv: row " + std::to_string(row) + " has no column '" + name + "'");
    }
    return rows[row][c];
}

std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_escape(cells[i]);
        os << "\r\n";
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
    write_text(path, os.str());
}

CsvTable read_csv(const std::string& path) {
    const std::string text = read_text(path);
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string cell;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            record.push_back(std::move(cell));
            cell.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !cell.empty()) {
                record.push_back(std::move(cell));
                records.push_back(std::move(record));
            }
            cell.clear();
            record.clear();
            any = false;
        } else {
            cell += c;
            any = true;
        }
    }
    if (quoted) throw ConfigError("csv: unterminated quote in " + path);
    if (any || !cell.empty()) {
        record.push_back(std::move(cell));
        records.push_back(std::move(record));
    }
    if (records.empty()) throw ConfigError("csv: empty file " + path);
    CsvTable t;
    t.header = std::move(records.front());
    t.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r].size() != t.header.size()) {
            throw ConfigError("csv: row " + std::to_string(r + 1) + " of " + path + " has " +
                              std::to_string(t.rows[r].size()) + " cells, header has " +
                              std::to_string(t.header.size()));
        }
    }
    return t;
}

// ---------------------------------------------------------------------------

namespace {

std::string sidecar_path(const std::string& csv_path) {
    fs::path p(csv_path);
    p.replace_extension(".json");
    return p.string();
}

json vehicle_json(const vbi::VehicleModel& v) {
    return {{"body_mass", v.body_mass},
            {"pitch_inertia", v.pitch_inertia},
            {"tire_mass_front", v.tire_mass_front},
            {"tire_mass_rear", v.tire_mass_rear},
            {"susp_stiffness_front", v.susp_stiffness_front},
            {"susp_stiffness_rear", v.susp_stiffness_rear},
            {"susp_damping_front", v.susp_damping_front},
            {"susp_damping_rear", v.susp_damping_rear},
            {"tire_stiffness_front", v.tire_stiffness_front},
            {"tire_stiffness_rear", v.tire_stiffness_rear},
            {"tire_damping_front", v.tire_damping_front},
            {"tire_damping_rear", v.tire_damping_rear},
            {"d1", v.d1},
            {"d2", v.d2},
            {"speed", v.speed}};
}

vbi::VehicleModel vehicle_from(const json& j) {
    vbi::VehicleModel v = vbi::VehicleModel::nominal();
    auto get = [&](const char* k, double& out) {
        if (j.contains(k)) out = j.at(k).get<double>();
    };
    get("body_mass", v.body_mass);
    get("pitch_inertia", v.pitch_inertia);
    get("tire_mass_front", v.tire_mass_front);
    get("tire_mass_rear", v.tire_mass_rear);
    get("susp_stiffness_front", v.susp_stiffness_front);
    get("susp_stiffness_rear", v.susp_stiffness_rear);
    get("susp_damping_front", v.susp_damping_front);
    get("susp_damping_rear", v.susp_damping_rear);
    get("tire_stiffness_front", v.tire_stiffness_front);
    get("tire_stiffness_rear", v.tire_stiffness_rear);
    get("tire_damping_front", v.tire_damping_front);
    get("tire_damping_rear", v.tire_damping_rear);
    get("d1", v.d1);
    get("d2", v.d2);
    get("speed", v.speed);
    return v;
}

/// Two-column numeric CSV with a uniform first column; returns dt.
double read_uniform_series(const std::string& path, const std::string& value_col, std::vector<double>& values) {
    const CsvTable t = read_csv(path);
    const std::size_t ct = t.column("t");
    const std::size_t cv = t.column(value_col);
    if (t.rows.size() < 2) throw ConfigError(path + ": need at least 2 samples");
    std::vector<double> time(t.rows.size());
    values.resize(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.rows[i].size() <= std::max(ct, cv)) throw ConfigError(path + ": short row " + std::to_string(i + 1));
        try {
            time[i] = std::stod(t.rows[i][ct]);
            values[i] = std::stod(t.rows[i][cv]);
        } catch (const std::exception&) {
            throw ConfigError(path + ": non-numeric value at row " + std::to_string(i + 1));
        }
    }
    const double dt = (time.back() - time.front()) / static_cast<double>(time.size() - 1);
    if (!(dt > 0.0)) throw ConfigError(path + ": time column must increase");
    for (std::size_t i = 1; i < time.size(); ++i) {
        if (std::abs(time[i] - time[i - 1] - dt) > 1e-6 * dt + 1e-9) {
            throw ConfigError(path + ": non-uniform sampling at row " + std::to_string(i + 1));
        }
    }
    return dt;
}

}  // namespace

void write_passage(const std::string& csv_path, const vbi::PassageRecord& p) {
    std::ostringstream os;
    os << "t,accel\r\n";
    for (std::size_t i = 0; i < p.accel.size(); ++i) {
        os << format_number(p.dt * static_cast<double>(i)) << ',' << format_number(p.accel[i]) << "\r\n";
    }
    write_text(csv_path, os.str());
    json side = {{"id", p.id},
                 {"dt", p.dt},
                 {"samples", p.accel.size()},
                 {"sensor_location", p.sensor_location},
                 {"state", p.state_label},
                 {"road_class", p.road_class},
                 {"road_seed", p.road_seed},
                 {"vehicle", vehicle_json(p.vehicle)}};
    if (p.crack) side["crack"] = {{"location", p.crack->location}, {"severity", p.crack->severity}};
    write_text(sidecar_path(csv_path), side.dump(2) + "\n");
}

vbi::PassageRecord read_passage(const std::string& csv_path) {
    vbi::PassageRecord p;
    p.dt = read_uniform_series(csv_path, "accel", p.accel);
    p.id = fs::path(csv_path).stem().string();
    p.state_label = "external";
    p.road_class = "unknown";
    const std::string side = sidecar_path(csv_path);
    if (file_exists(side)) {
        try {
            const json j = json::parse(read_text(side));
            p.id = j.value("id", p.id);
            p.sensor_location = j.value("sensor_location", p.sensor_location);
            p.state_label = j.value("state", p.state_label);
            p.road_class = j.value("road_class", p.road_class);
            p.road_seed = j.value("road_seed", p.road_seed);
            if (j.contains("vehicle")) p.vehicle = vehicle_from(j.at("vehicle"));
            if (j.contains("crack")) {
                p.crack = vbi::CrackSpec{j.at("crack").at("location").get<double>(),
                                         j.at("crack").at("severity").get<double>()};
            }
        } catch (const json::exception& e) {
            throw ConfigError(side + ": " + e.what());
        }
    }
    return p;
}

void write_voltage(const std::string& path, const peh::VoltageTrace& trace) {
    std::ostringstream os;
    os << "t,voltage\r\n";
    for (std::size_t i = 0; i < trace.volts.size(); ++i) {
        os << format_number(trace.dt * static_cast<double>(i)) << ',' << format_number(trace.volts[i]) << "\r\n";
    }
    write_text(path, os.str());
}

peh::VoltageTrace read_voltage(const std::string& path) {
    peh::VoltageTrace t;
    t.dt = read_uniform_series(path, "voltage", t.volts);
    t.source_id = fs::path(path).stem().string();
    return t;
}

void write_frf(const std::string& path, const std::vector<double>& freq_hz,
               const std::vector<std::complex<double>>& frf) {
    if (freq_hz.size() != frf.size()) throw DomainError("write_frf: size mismatch");
    CsvTable t;
    t.header = {"freq_hz", "re", "im", "magnitude", "phase_rad"};
    for (std::size_t i = 0; i < frf.size(); ++i) {
        t.rows.push_back({format_number(freq_hz[i]), format_number(frf[i].real()), format_number(frf[i].imag()),
                          format_number(std::abs(frf[i])), format_number(std::arg(frf[i]))});
    }
    write_csv(path, t);
}

// ---------------------------------------------------------------------------

namespace {

std::string hex_digest(EVP_MD_CTX* ctx) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

EVP_MD_CTX* new_sha256() {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) throw Error("sha256: digest init failed");
    return ctx;
}

}  // namespace

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("sha256_file: cannot open " + path);
    EVP_MD_CTX* ctx = new_sha256();
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return hex_digest(ctx);
}

std::string sha256_string(const std::string& data) {
    EVP_MD_CTX* ctx = new_sha256();
    EVP_DigestUpdate(ctx, data.data(), data.size());
    return hex_digest(ctx);
}

void ensure_directory(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw ConfigError("cannot create directory " + path + ": " + ec.message());
}

bool file_exists(const std::string& path) { return fs::is_regular_file(path); }

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::string& path, const std::string& text) {
    const fs::path p(path);
    if (p.has_parent_path()) ensure_directory(p.parent_path().string());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
    if (!out) throw ConfigError("write failed for " + path);
}

}  // namespace sehs::io
