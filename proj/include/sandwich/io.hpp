#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace sandwich {

// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double v);

std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& text);

// Minimal CSV table: fixed header, numeric rows.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
    void add(const std::vector<double>& row);
    std::string str() const;
    void write(const std::filesystem::path& p) const { write_file(p, str()); }
    std::size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

inline constexpr const char* kVersion = "0.3.0";

}  // namespace sandwich
