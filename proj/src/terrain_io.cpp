#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "dtmnav/errors.hpp"
#include "dtmnav/format.hpp"
#include "dtmnav/terrain.hpp"

namespace dtmnav {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

double header_number(const std::map<std::string, std::string>& header, const std::string& key) {
    const auto it = header.find(key);
    if (it == header.end()) throw NavError(ErrorCode::MalformedHeader, "missing header key '" + key + "'");
    const auto v = parse_double(it->second);
    if (!v) throw NavError(ErrorCode::MalformedHeader, "bad value for '" + key + "': " + it->second);
    return *v;
}

int header_count(const std::map<std::string, std::string>& header, const std::string& key) {
    const double v = header_number(header, key);
    if (v < 1.0 || v != std::floor(v) || v > 1e9) {
        throw NavError(ErrorCode::MalformedHeader, "'" + key + "' must be a positive integer");
    }
    return static_cast<int>(v);
}

}  // namespace

DtmGrid parse_dtm(const std::string& text) {
    std::istringstream in(text);
    std::map<std::string, std::string> header;
    std::string line;
    std::vector<std::string> data_lines;
    bool in_header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (in_header) {
            std::istringstream ls(line);
            std::string key;
            if (!(ls >> key)) continue;
            if (std::isalpha(static_cast<unsigned char>(key[0]))) {
                std::string value;
                std::string extra;
                if (!(ls >> value) || (ls >> extra)) {
                    throw NavError(ErrorCode::MalformedHeader, "header line needs 'key value': " + line);
                }
                header[lower(key)] = value;
                continue;
            }
            in_header = false;
        }
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        data_lines.push_back(line);
    }

    const int ncols = header_count(header, "ncols");
    const int nrows = header_count(header, "nrows");
    const double xll = header_number(header, "xllcorner");
    const double yll = header_number(header, "yllcorner");
    const double cellsize = header_number(header, "cellsize");
    if (!(cellsize > 0.0) || !std::isfinite(cellsize)) {
        throw NavError(ErrorCode::MalformedHeader, "cellsize must be positive");
    }
    if (ncols < 2 || nrows < 2) throw NavError(ErrorCode::MalformedHeader, "grid needs at least 2x2 samples");
    const double nodata = header.count("nodata_value") ? header_number(header, "nodata_value")
                                                         : DtmGrid::kDefaultNoData;

    if (static_cast<int>(data_lines.size()) != nrows) {
        throw NavError(ErrorCode::RowLengthMismatch, "expected " + std::to_string(nrows) + " rows, found " +
                                                         std::to_string(data_lines.size()));
    }
    std::vector<double> heights(static_cast<std::size_t>(ncols) * nrows);
    for (int r = 0; r < nrows; ++r) {
        // first file row is the northernmost
        const int row = nrows - 1 - r;
        const std::vector<std::string_view> fields = split_whitespace(data_lines[r]);
        if (static_cast<int>(fields.size()) != ncols) {
            throw NavError(ErrorCode::RowLengthMismatch, "data row " + std::to_string(r + 1) + " has " +
                                                             std::to_string(fields.size()) + " values, expected " +
                                                             std::to_string(ncols));
        }
        for (int c = 0; c < ncols; ++c) {
            const auto v = parse_double(fields[c]);
            if (!v) {
                throw NavError(ErrorCode::ParseError, "bad height in data row " + std::to_string(r + 1) + ": " +
                                                          std::string(fields[c]));
            }
            heights[static_cast<std::size_t>(row) * ncols + c] = *v;
        }
    }
    return DtmGrid(ncols, nrows, xll, yll, cellsize, std::move(heights), nodata);
}

std::string format_dtm(const DtmGrid& dtm) {
    std::string out;
    out.reserve(static_cast<std::size_t>(dtm.ncols()) * dtm.nrows() * 12 + 256);
    out += "ncols " + std::to_string(dtm.ncols()) + "\n";
    out += "nrows " + std::to_string(dtm.nrows()) + "\n";
    out += "xllcorner " + format_double(dtm.origin_x()) + "\n";
    out += "yllcorner " + format_double(dtm.origin_y()) + "\n";
    out += "cellsize " + format_double(dtm.cellsize()) + "\n";
    out += "NODATA_value " + format_double(dtm.nodata()) + "\n";
    for (int row = dtm.nrows() - 1; row >= 0; --row) {
        for (int c = 0; c < dtm.ncols(); ++c) {
            if (c) out += ' ';
            append_double(out, dtm.at(c, row));
        }
        out += '\n';
    }
    return out;
}

DtmGrid load_dtm(const std::filesystem::path& path) { return parse_dtm(read_text_file(path)); }

void save_dtm(const DtmGrid& dtm, const std::filesystem::path& path) { write_text_file(path, format_dtm(dtm)); }

}  // namespace dtmnav
