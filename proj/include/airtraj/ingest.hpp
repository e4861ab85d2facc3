#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace airtraj::ingest {

// One decoded ADS-B report: time, aircraft id, geodetic position.
struct RawTrackRecord {
    std::int64_t timestamp = 0;  // UTC seconds, unix epoch
    std::string aircraft_id;     // ICAO hex or TIS-B id, opaque
    double latitude = 0.0;       // degrees WGS-84
    double longitude = 0.0;      // degrees WGS-84
    double altitude_msl = 0.0;   // feet
};

enum class WindKind { Normal, Variable, Calm };

struct MetarReport {
    std::string station;         // 4-char identifier
    std::int64_t issue_time = 0; // seconds; month-relative until resolved (see below)
    WindKind wind_kind = WindKind::Normal;
    double wind_dir_deg = 0.0;   // degrees true [0,360), wind FROM; meaningless for Variable/Calm
    double wind_speed_kt = 0.0;
    std::optional<double> gust_kt;
    std::string raw_text;
};

// Wind resolved into the runway-aligned local frame.
struct WindContext {
    double u_along = 0.0; // m/s along the +x runway axis
    double u_cross = 0.0; // m/s along the +y axis
    bool variable_flag = false;
};

struct Diagnostic {
    std::size_t line = 0;
    std::string message;
};

// Thrown for unreadable input or an ill-formed METAR body.
struct ParseError : std::exception {
    explicit ParseError(std::string msg) : message(std::move(msg)) {}
    const char* what() const noexcept override { return message.c_str(); }
    std::string message;
};

inline constexpr double kKnotToMps = 0.514444;

// Newline-delimited 5-column CSV: timestamp,id,lat,lon,alt_ft. Header line and
// '#' comments are skipped. Malformed lines are reported through `diagnostics`
// with their 1-based line number and do not abort the parse.
std::vector<RawTrackRecord> parse_track_log(std::istream& in,
                                            std::vector<Diagnostic>* diagnostics = nullptr);

// Decodes the wind group of a single METAR body (dddssKT, dddssGggKT, VRBssKT,
// 00000KT). Everything else is preserved only through raw_text. issue_time is
// seconds since the start of the (unknown) month: (day-1)*86400 + hh*3600 + mm*60.
MetarReport parse_metar(const std::string& raw);

// Rewrites issue_time as an absolute unix epoch. The day-of-month in a METAR
// carries no year or month, so each report is anchored to whichever of the
// previous/current/next month around `reference_epoch` lands it closest.
void resolve_metar_times(std::vector<MetarReport>& reports, std::int64_t reference_epoch);

// Projects the report's wind onto the runway axis. With theta the direction the
// wind blows FROM and h = theta + 180 the heading of air motion:
//   u_along = s * cos(h - axis),  u_cross = s * sin(h - axis),  s in m/s.
// Variable and calm winds map to (0,0) with the flag set for Variable.
WindContext wind_to_runway_frame(const MetarReport& report, double axis_azimuth_deg);

// Pairs each record with the report minimizing |issue_time - timestamp|,
// ties toward the earlier report. `reports` must be sorted by issue_time.
std::vector<std::pair<RawTrackRecord, MetarReport>>
join_weather(const std::vector<RawTrackRecord>& records,
             const std::vector<MetarReport>& reports);

// Index into `reports` (sorted by issue_time) nearest to t, earlier on ties.
std::size_t nearest_report_index(const std::vector<MetarReport>& reports, std::int64_t t);

} // namespace airtraj::ingest
