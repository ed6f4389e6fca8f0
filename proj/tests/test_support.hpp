#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace unidomain::testing {

inline std::filesystem::path data_path(const std::string &relative) {
    return std::filesystem::path(UNIDOMAIN_TEST_DATA) / relative;
}

inline std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("missing file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string read_data(const std::string &relative) { return read_file(data_path(relative)); }

} // namespace unidomain::testing
