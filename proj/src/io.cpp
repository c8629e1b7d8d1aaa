#include "sandwich/io.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sandwich {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    auto res = std::to_chars(buf, buf + 16, v, 16);
    std::string s(buf, res.ptr);
    return std::string(16 - s.size(), '0') + s;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

void CsvTable::add(const std::vector<double>& row) {
    if (row.size() != header_.size()) throw std::invalid_argument("csv row width mismatch");
    rows_.push_back(row);
}

std::string CsvTable::str() const {
    std::string s;
    for (std::size_t j = 0; j < header_.size(); ++j) {
        if (j) s += ',';
        s += header_[j];
    }
    s += '\n';
    for (const auto& r : rows_) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) s += ',';
            s += format_number(r[j]);
        }
        s += '\n';
    }
    return s;
}

}  // namespace sandwich
