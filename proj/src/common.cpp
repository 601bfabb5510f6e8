#include "wisppn/common.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace wisppn {

int log_level() {
    static const int level = [] {
        const char* v = std::getenv("WISPPN_LOG");
        if (!v) return 0;
        return std::atoi(v);
    }();
    return level;
}

void log_line(int level, const std::string& msg) {
    if (log_level() >= level) std::cerr << "[wisppn] " << msg << "\n";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path);
}

}  // namespace wisppn
