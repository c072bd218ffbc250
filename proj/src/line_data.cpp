#include "metrosim/line_data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "metrosim/errors.hpp"

namespace metrosim {

namespace {

constexpr const char* kHeader = "from,to,distance_km,cruise_kmh,dwell_s";

std::vector<std::string> split_fields(const std::string& row) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = row.find(',', start);
        std::string field = row.substr(start, comma - start);
        // Trim surrounding blanks so hand-edited files stay friendly.
        const auto a = field.find_first_not_of(" \t\r");
        const auto b = field.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? std::string()
                                             : field.substr(a, b - a + 1));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_number(const std::string& field, int line_no, const char* what) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw ParseError("line " + std::to_string(line_no) + ": field '" +
                         std::string(what) + "' is not a number: '" + field + "'");
    return value;
}

std::string format_number(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace

LineDataset::LineDataset(std::string name, std::vector<SegmentRecord> segments,
                         double speed_limit_kmh)
    : name_(std::move(name)),
      segments_(std::move(segments)),
      speed_limit_kmh_(speed_limit_kmh) {
    if (segments_.empty())
        throw ValidationError("line '" + name_ + "' has no segments");
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const SegmentRecord& s = segments_[i];
        const std::string where =
            "segment " + std::to_string(i + 1) + " (" + s.from_station + " -> " +
            s.to_station + ")";
        if (s.from_station.empty() || s.to_station.empty())
            throw ValidationError(where + ": empty station name");
        if (!(s.distance_km > 0.0))
            throw ValidationError(where + ": distance must be positive, got " +
                                  format_number(s.distance_km));
        if (!(s.cruise_kmh > 0.0))
            throw ValidationError(where + ": cruise speed must be positive, got " +
                                  format_number(s.cruise_kmh));
        if (s.cruise_kmh > speed_limit_kmh_)
            throw ValidationError(where + ": cruise speed " +
                                  format_number(s.cruise_kmh) +
                                  " km/h exceeds the line limit of " +
                                  format_number(speed_limit_kmh_) + " km/h");
        if (s.dwell_s < 0.0)
            throw ValidationError(where + ": dwell must be non-negative, got " +
                                  format_number(s.dwell_s));
        if (i > 0 && segments_[i - 1].to_station != s.from_station)
            throw ValidationError(where + ": chain broken, previous segment ends at '" +
                                  segments_[i - 1].to_station + "'");
    }
}

LineDataset LineDataset::parse(const std::string& text, std::string name,
                               double speed_limit_kmh) {
    std::istringstream in(text);
    std::string row;
    int line_no = 0;
    std::vector<SegmentRecord> segments;
    bool saw_header = false;
    while (std::getline(in, row)) {
        ++line_no;
        if (!row.empty() && row.back() == '\r') row.pop_back();
        if (row.empty()) continue;
        if (!saw_header) {
            if (row != kHeader)
                throw ParseError("line 1: expected header '" + std::string(kHeader) +
                                 "', got '" + row + "'");
            saw_header = true;
            continue;
        }
        const auto fields = split_fields(row);
        if (fields.size() != 5)
            throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                             std::to_string(fields.size()));
        SegmentRecord rec;
        rec.from_station = fields[0];
        rec.to_station = fields[1];
        rec.distance_km = parse_number(fields[2], line_no, "distance_km");
        rec.cruise_kmh = parse_number(fields[3], line_no, "cruise_kmh");
        rec.dwell_s = parse_number(fields[4], line_no, "dwell_s");
        segments.push_back(std::move(rec));
    }
    if (!saw_header) throw ParseError("document is empty");
    return LineDataset(std::move(name), std::move(segments), speed_limit_kmh);
}

LineDataset LineDataset::load_file(const std::string& path, double speed_limit_kmh) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open line file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string name = path;
    if (const auto slash = name.find_last_of('/'); slash != std::string::npos)
        name = name.substr(slash + 1);
    if (const auto dot = name.find_last_of('.'); dot != std::string::npos)
        name = name.substr(0, dot);
    return parse(buf.str(), std::move(name), speed_limit_kmh);
}

std::string LineDataset::serialize() const {
    std::string out = kHeader;
    out += '\n';
    for (const SegmentRecord& s : segments_) {
        out += s.from_station;
        out += ',';
        out += s.to_station;
        out += ',';
        out += format_number(s.distance_km);
        out += ',';
        out += format_number(s.cruise_kmh);
        out += ',';
        out += format_number(s.dwell_s);
        out += '\n';
    }
    return out;
}

void LineDataset::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write line file: " + path);
    out << serialize();
}

std::vector<std::string> LineDataset::stations() const {
    std::vector<std::string> out;
    out.reserve(segments_.size() + 1);
    out.push_back(segments_.front().from_station);
    for (const SegmentRecord& s : segments_) out.push_back(s.to_station);
    return out;
}

double LineDataset::total_distance_km() const {
    double sum = 0.0;
    for (const SegmentRecord& s : segments_) sum += s.distance_km;
    return sum;
}

LineDataset LineDataset::reversed() const {
    // Dwell lives with the station, not the row: look up each new arrival
    // station's dwell in this direction's rows.
    std::unordered_map<std::string, double> dwell_at;
    for (const SegmentRecord& s : segments_) dwell_at[s.to_station] = s.dwell_s;
    std::vector<SegmentRecord> rev;
    rev.reserve(segments_.size());
    for (auto it = segments_.rbegin(); it != segments_.rend(); ++it) {
        SegmentRecord r;
        r.from_station = it->to_station;
        r.to_station = it->from_station;
        r.distance_km = it->distance_km;
        r.cruise_kmh = it->cruise_kmh;
        const auto found = dwell_at.find(r.to_station);
        r.dwell_s = found == dwell_at.end() ? 0.0 : found->second;
        rev.push_back(std::move(r));
    }
    static const std::string kSuffix = "_reversed";
    std::string rev_name =
        name_.size() > kSuffix.size() && name_.ends_with(kSuffix)
            ? name_.substr(0, name_.size() - kSuffix.size())
            : name_ + kSuffix;
    return LineDataset(std::move(rev_name), std::move(rev), speed_limit_kmh_);
}

}  // namespace metrosim
