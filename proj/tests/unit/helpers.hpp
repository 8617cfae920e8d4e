#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "compass/records.hpp"

namespace testutil {

inline std::string data_dir() { return COMPASS_DATA_DIR; }

inline std::string data_path(const std::string& relative) {
    return (std::filesystem::path(COMPASS_DATA_DIR) / relative).string();
}

inline std::filesystem::path make_temp_dir(const std::string& prefix) {
    static std::atomic<unsigned> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     (prefix + "-" + std::to_string(::getpid()) + "-" +
                      std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline compass::PbRecord make_record(std::string id, compass::MeasurementType type, double value,
                                     std::string unit, std::optional<double> lat = {},
                                     std::optional<double> lon = {},
                                     std::optional<double> depth = {},
                                     std::string paper_id = "PX") {
    compass::PbRecord r;
    r.record_id = std::move(id);
    r.measurement_type = type;
    r.value = value;
    r.unit = std::move(unit);
    r.latitude = lat;
    r.longitude = lon;
    r.depth_m = depth;
    compass::Provenance p;
    p.paper_id = std::move(paper_id);
    p.table_id = "T1";
    p.row_index = 0;
    p.column_header = "col";
    p.source_uri = "test://";
    r.provenance.push_back(std::move(p));
    return r;
}

} // namespace testutil
