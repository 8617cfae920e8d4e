#pragma once

#include <map>
#include <string>
#include <vector>

#include "compass/records.hpp"

namespace compass::store {

/// Append-only record collection with a record_id index. Persisted as JSON
/// lines plus a sidecar index file mapping record_id to line number.
class RecordStore {
public:
    /// Error: DuplicateRecordId.
    void append(PbRecord record);
    bool contains(const std::string& record_id) const;
    const PbRecord& at(const std::string& record_id) const; // Error: UnknownRecord
    const std::vector<PbRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    /// Writes `path` (one record per line) and `path + ".idx.json"`.
    /// Error: UnwritablePath.
    void write_file(const std::string& path) const;
    static RecordStore read_file(const std::string& path); // Error: MalformedStore

private:
    std::vector<PbRecord> records_;
    std::map<std::string, std::size_t> index_;
};

std::string to_jsonl(const std::vector<PbRecord>& records);
std::vector<PbRecord> records_from_jsonl(const std::string& text); // Error: MalformedStore

/// Fixed column set; numbers rendered in shortest round-trip form so that
/// csv -> records -> csv is byte-identical.
std::string to_csv(const std::vector<PbRecord>& records);
std::vector<PbRecord> records_from_csv(const std::string& text); // Error: MalformedStore

/// One Point feature per located record, GeoJSON axis order [lon, lat].
/// Unlocated records are left out.
json to_geojson(const std::vector<PbRecord>& records);

struct StoreStats {
    std::map<std::string, std::size_t> by_type;   // all 8 types, zeros included
    std::map<std::string, std::size_t> by_source; // all 3 kinds, zeros included
    std::map<std::string, std::size_t> by_region; // named ocean boxes + "unlocated"
    std::size_t total = 0;
};

/// Coarse named region for (lat, lon); used only for reporting.
std::string region_of(double latitude, double longitude);

StoreStats stats_report(const std::vector<PbRecord>& records);
json stats_to_json(const StoreStats& stats);

} // namespace compass::store
