#pragma once

#include <string>
#include <vector>

namespace metrosim {

constexpr double kDefaultSpeedLimitKmh = 80.0;

/// One inter-station run as listed in the line file.  The dwell belongs to
/// the arrival (to_station) platform.
struct SegmentRecord {
    std::string from_station;
    std::string to_station;
    double distance_km = 0.0;
    double cruise_kmh = 0.0;
    double dwell_s = 0.0;

    bool operator==(const SegmentRecord&) const = default;
};

/**
 * @brief Static description of one service direction of a metro line.
 *
 * Immutable after construction; the segments form a connected chain of
 * stations and every cruise speed respects the line speed limit.
 */
class LineDataset {
public:
    LineDataset(std::string name, std::vector<SegmentRecord> segments,
                double speed_limit_kmh = kDefaultSpeedLimitKmh);

    /// Parse the documented line-file format: one header row, then
    /// `from,to,distance_km,cruise_kmh,dwell_s` rows.
    static LineDataset parse(const std::string& text,
                             std::string name = "line",
                             double speed_limit_kmh = kDefaultSpeedLimitKmh);

    static LineDataset load_file(const std::string& path,
                                 double speed_limit_kmh = kDefaultSpeedLimitKmh);

    /// Inverse of parse(): header plus one row per segment, numbers written
    /// with shortest round-trip precision.
    std::string serialize() const;
    void save_file(const std::string& path) const;

    const std::string& name() const { return name_; }
    double speed_limit_kmh() const { return speed_limit_kmh_; }
    const std::vector<SegmentRecord>& segments() const { return segments_; }
    std::size_t segment_count() const { return segments_.size(); }

    /// Station names in travel order (segment count + 1 entries).
    std::vector<std::string> stations() const;

    double total_distance_km() const;

    /// The same physical line traversed in the opposite direction.  Each
    /// station keeps its dwell regardless of travel direction; the new
    /// terminal (the forward origin, which has no dwell row) gets 0.
    LineDataset reversed() const;

private:
    std::string name_;
    std::vector<SegmentRecord> segments_;
    double speed_limit_kmh_;
};

}  // namespace metrosim
