#pragma once

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "spinmachine/types.hpp"

namespace spinmachine::harness {

inline constexpr const char* kToolName = "spinmachine";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kOutputEnv = "SPINMACHINE_OUT";

struct IoError : Error {
    using Error::Error;
};

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

using Cell = std::variant<std::monostate, double, long, std::string>;

inline std::string format_cell(const Cell& c) {
    if (std::holds_alternative<double>(c)) return format_double(std::get<double>(c));
    if (std::holds_alternative<long>(c)) return std::to_string(std::get<long>(c));
    if (std::holds_alternative<std::string>(c)) {
        const std::string& s = std::get<std::string>(c);
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) {
            if (ch == '"') q += '"';
            q += ch;
        }
        return q + "\"";
    }
    return "";
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    std::string csv() const {
        std::string out;
        for (std::size_t k = 0; k < columns.size(); ++k) out += (k ? "," : "") + columns[k];
        out += "\n";
        for (const auto& r : rows) {
            for (std::size_t k = 0; k < r.size(); ++k) {
                if (k) out += ",";
                out += format_cell(r[k]);
            }
            out += "\n";
        }
        return out;
    }
};

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("sha256: digest failed");
    std::ostringstream os;
    for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << int(md[k]);
    return os.str();
}

// --out wins, then the environment variable, then the fallback.
inline std::filesystem::path resolve_output_dir(const std::string& flag, const std::string& fallback = "out") {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return fallback;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::error_code ec;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open " + p.string() + " for writing");
    f << text;
    if (!f) throw IoError("write failed for " + p.string());
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot read " + p.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

inline nlohmann::json sidecar(const std::string& name, const std::string& canonical_config, const Table& t,
                              long flagged) {
    nlohmann::json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["name"] = name;
    j["config_sha256"] = sha256_hex(canonical_config);
    j["columns"] = t.columns;
    j["rows"] = t.rows.size();
    j["flagged"] = flagged;
    return j;
}

}  // namespace spinmachine::harness
