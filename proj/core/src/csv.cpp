#include "compass/util/csv.hpp"

#include <fstream>
#include <sstream>

#include "compass/errors.hpp"

namespace compass::util {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(row);
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            break;
        case '\n':
            end_row();
            break;
        default:
            field += c;
            field_started = true;
            break;
        }
    }
    if (in_quotes)
        throw Error("MalformedCsv", "", "unterminated quoted field");
    if (field_started || !field.empty() || !row.empty())
        end_row();
    return rows;
}

std::vector<std::vector<std::string>> read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("MalformedCsv", path, "cannot open file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_csv(buffer.str());
    } catch (const Error& e) {
        throw Error("MalformedCsv", path, e.what());
    }
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos)
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string write_csv(const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += csv_escape(row[i]);
        }
        out += '\n';
    }
    return out;
}

} // namespace compass::util
