#pragma once

// File formats shared by the pipeline and the CLI: RFC-4180 CSV tables,
// passage traces with JSON sidecars, voltage traces, FRF tables and content hashes.

#include <complex>
#include <string>
#include <vector>

#include "sehs/bridge.hpp"
#include "sehs/peh.hpp"

namespace sehs::io {

/// In-memory CSV table; every cell kept as text.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;  // throws ConfigError if absent
    double number(std::size_t row, const std::string& name) const;
    const std::string& text(std::size_t row, const std::string& name) const;
};

std::string csv_escape(const std::string& cell);
std::string format_number(double v);

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

/// "t,accel" CSV plus "<path minus .csv>.json" sidecar with vehicle, seeds and state.
void write_passage(const std::string& csv_path, const vbi::PassageRecord& passage);

/// Reads a passage CSV. The sidecar is optional, so externally recorded
/// acceleration with the same header is accepted; the sample spacing must be uniform.
vbi::PassageRecord read_passage(const std::string& csv_path);

/// "t,voltage" CSV.
void write_voltage(const std::string& path, const peh::VoltageTrace& trace);
peh::VoltageTrace read_voltage(const std::string& path);

/// "freq_hz,re,im,magnitude,phase_rad" CSV.
void write_frf(const std::string& path, const std::vector<double>& freq_hz,
               const std::vector<std::complex<double>>& frf);

/// Hex SHA-256 of a file's bytes or of a string.
std::string sha256_file(const std::string& path);
std::string sha256_string(const std::string& data);

void ensure_directory(const std::string& path);
bool file_exists(const std::string& path);
std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace sehs::io
