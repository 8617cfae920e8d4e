#include "compass/store.hpp"

#include <fstream>
#include <sstream>

#include "compass/errors.hpp"
#include "compass/util/csv.hpp"
#include "compass/util/text.hpp"

namespace compass::store {

void RecordStore::append(PbRecord record) {
    if (index_.count(record.record_id))
        throw Error("DuplicateRecordId", record.record_id, "record already stored");
    index_[record.record_id] = records_.size();
    records_.push_back(std::move(record));
}

bool RecordStore::contains(const std::string& record_id) const {
    return index_.count(record_id) > 0;
}

const PbRecord& RecordStore::at(const std::string& record_id) const {
    auto it = index_.find(record_id);
    if (it == index_.end())
        throw Error("UnknownRecord", record_id, "record is not in the store");
    return records_[it->second];
}

void RecordStore::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("UnwritablePath", path, "cannot open for writing");
    out << to_jsonl(records_);
    if (!out)
        throw Error("UnwritablePath", path, "write failed");

    json index = json::object();
    for (std::size_t i = 0; i < records_.size(); ++i) index[records_[i].record_id] = i;
    std::ofstream idx(path + ".idx.json", std::ios::binary);
    if (!idx)
        throw Error("UnwritablePath", path + ".idx.json", "cannot open for writing");
    idx << json{{"count", records_.size()}, {"index", index}}.dump(2) << "\n";
}

RecordStore RecordStore::read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("MalformedStore", path, "cannot open store file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    RecordStore store;
    for (auto& record : records_from_jsonl(buffer.str())) store.append(std::move(record));
    return store;
}

std::string to_jsonl(const std::vector<PbRecord>& records) {
    std::string out;
    for (const auto& record : records) out += to_json(record).dump() + "\n";
    return out;
}

std::vector<PbRecord> records_from_jsonl(const std::string& text) {
    std::vector<PbRecord> records;
    std::istringstream in(text);
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (util::trim(line).empty()) continue;
        try {
            records.push_back(record_from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw Error("MalformedStore", "line " + std::to_string(line_number), e.what());
        }
    }
    return records;
}

namespace {

const std::vector<std::string> kCsvColumns = {
    "record_id", "measurement_type", "value",       "unit",        "latitude", "longitude",
    "depth_m",   "phase",            "sample_date", "source_kind", "flags",    "provenance",
};

std::string number_cell(double value) { return json(value).dump(); }

std::string optional_number_cell(const std::optional<double>& value) {
    return value ? number_cell(*value) : "";
}

} // namespace

std::string to_csv(const std::vector<PbRecord>& records) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back(kCsvColumns);
    for (const auto& record : records) {
        json provenance = json::array();
        for (const auto& entry : record.provenance) provenance.push_back(to_json(entry));
        std::string flags;
        for (const auto& flag : record.flags) flags += (flags.empty() ? "" : ";") + flag;
        rows.push_back({
            record.record_id,
            to_string(record.measurement_type),
            number_cell(record.value),
            record.unit,
            optional_number_cell(record.latitude),
            optional_number_cell(record.longitude),
            optional_number_cell(record.depth_m),
            to_string(record.phase),
            record.sample_date.value_or(""),
            to_string(record.source_kind),
            flags,
            provenance.dump(),
        });
    }
    return util::write_csv(rows);
}

std::vector<PbRecord> records_from_csv(const std::string& text) {
    const auto rows = util::parse_csv(text);
    if (rows.empty() || rows.front() != kCsvColumns)
        throw Error("MalformedStore", "csv", "missing or unexpected header row");

    std::vector<PbRecord> records;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != kCsvColumns.size())
            throw Error("MalformedStore", "csv row " + std::to_string(r),
                        "expected " + std::to_string(kCsvColumns.size()) + " cells");
        try {
            PbRecord record;
            record.record_id = row[0];
            auto mtype = measurement_type_from_string(row[1]);
            if (!mtype)
                throw Error("UnknownMeasurementType", row[1], "not one of the 8 types");
            record.measurement_type = *mtype;
            record.value = json::parse(row[2]).get<double>();
            record.unit = row[3];
            if (!row[4].empty()) record.latitude = json::parse(row[4]).get<double>();
            if (!row[5].empty()) record.longitude = json::parse(row[5]).get<double>();
            if (!row[6].empty()) record.depth_m = json::parse(row[6]).get<double>();
            record.phase = phase_from_string(row[7]);
            if (!row[8].empty()) record.sample_date = row[8];
            record.source_kind = source_kind_from_string(row[9]);
            for (const auto& flag : util::split(row[10], ';'))
                if (!flag.empty()) record.flags.insert(flag);
            for (const auto& entry : json::parse(row[11]))
                record.provenance.push_back(provenance_from_json(entry));
            records.push_back(std::move(record));
        } catch (const json::exception& e) {
            throw Error("MalformedStore", "csv row " + std::to_string(r), e.what());
        }
    }
    return records;
}

json to_geojson(const std::vector<PbRecord>& records) {
    json features = json::array();
    for (const auto& record : records) {
        if (!record.has_location()) continue;
        json properties = {
            {"measurement_type", to_string(record.measurement_type)},
            {"value", record.value},
            {"unit", record.unit},
            {"depth_m", record.depth_m ? json(*record.depth_m) : json(nullptr)},
            {"paper_id",
             record.provenance.empty() ? json(nullptr) : json(record.provenance.front().paper_id)},
            {"doi", record.provenance.empty() || !record.provenance.front().doi
                        ? json(nullptr)
                        : json(*record.provenance.front().doi)},
        };
        features.push_back(
            {{"type", "Feature"},
             {"geometry",
              {{"type", "Point"},
               {"coordinates", json::array({*record.longitude, *record.latitude})}}},
             {"properties", properties}});
    }
    return {{"type", "FeatureCollection"}, {"features", features}};
}

std::string region_of(double latitude, double longitude) {
    if (latitude >= 66.5) return "Arctic";
    if (latitude <= -60.0) return "Southern Ocean";
    double lon = longitude;
    while (lon < -180.0) lon += 360.0;
    while (lon >= 180.0) lon -= 360.0;
    if (lon >= -70.0 && lon < 20.0)
        return latitude >= 0.0 ? "North Atlantic" : "South Atlantic";
    // North of the equator the Pacific begins at the Malay Peninsula, well
    // west of the Torres Strait line that bounds the Indian Ocean in the south.
    if (lon >= 20.0 && lon < (latitude >= 0.0 ? 100.0 : 146.0)) return "Indian Ocean";
    return latitude >= 0.0 ? "North Pacific" : "South Pacific";
}

StoreStats stats_report(const std::vector<PbRecord>& records) {
    StoreStats stats;
    for (MeasurementType mtype : kAllMeasurementTypes) stats.by_type[to_string(mtype)] = 0;
    for (const char* kind : {"extracted", "structured", "scattered"}) stats.by_source[kind] = 0;
    for (const char* region : {"Arctic", "Southern Ocean", "North Atlantic", "South Atlantic",
                               "Indian Ocean", "North Pacific", "South Pacific", "unlocated"})
        stats.by_region[region] = 0;

    for (const auto& record : records) {
        stats.by_type[to_string(record.measurement_type)] += 1;
        stats.by_source[to_string(record.source_kind)] += 1;
        if (record.has_location())
            stats.by_region[region_of(*record.latitude, *record.longitude)] += 1;
        else
            stats.by_region["unlocated"] += 1;
    }
    stats.total = records.size();
    return stats;
}

json stats_to_json(const StoreStats& stats) {
    json by_type = json::object();
    for (const auto& [key, count] : stats.by_type) by_type[key] = count;
    json by_source = json::object();
    for (const auto& [key, count] : stats.by_source) by_source[key] = count;
    json by_region = json::object();
    for (const auto& [key, count] : stats.by_region) by_region[key] = count;
    return {{"total", stats.total},
            {"by_type", by_type},
            {"by_source", by_source},
            {"by_region", by_region}};
}

} // namespace compass::store
