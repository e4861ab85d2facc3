#include "airtraj/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <sstream>
#include <stdexcept>

#include "airtraj/time_util.hpp"

namespace airtraj::ingest {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

bool parse_double(const std::string& s, double* out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) return false;
    *out = v;
    return true;
}

bool parse_int64(const std::string& s, std::int64_t* out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size()) return false;
    *out = v;
    return true;
}

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

} // namespace

std::vector<RawTrackRecord> parse_track_log(std::istream& in,
                                            std::vector<Diagnostic>* diagnostics) {
    if (!in.good()) throw ParseError("unreadable track log stream");

    auto report = [&](std::size_t line, std::string msg) {
        if (diagnostics) diagnostics->push_back({line, std::move(msg)});
    };

    std::vector<RawTrackRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string body = trim(line);
        if (body.empty() || body[0] == '#') continue;

        const auto fields = split(body, ',');
        if (fields.size() < 5) {
            report(line_no, "missing field (expected 5, got " + std::to_string(fields.size()) + ")");
            continue;
        }
        if (fields.size() > 5) {
            report(line_no, "too many fields (expected 5, got " + std::to_string(fields.size()) + ")");
            continue;
        }

        RawTrackRecord rec;
        if (!parse_int64(fields[0], &rec.timestamp)) {
            // A non-numeric first field on the first line is a header.
            if (line_no == 1) continue;
            report(line_no, "bad timestamp '" + fields[0] + "'");
            continue;
        }
        rec.aircraft_id = trim(fields[1]);
        if (rec.aircraft_id.empty()) {
            report(line_no, "empty aircraft id");
            continue;
        }
        if (!parse_double(fields[2], &rec.latitude)) {
            report(line_no, "bad latitude '" + fields[2] + "'");
            continue;
        }
        if (!parse_double(fields[3], &rec.longitude)) {
            report(line_no, "bad longitude '" + fields[3] + "'");
            continue;
        }
        if (!parse_double(fields[4], &rec.altitude_msl)) {
            report(line_no, "bad altitude '" + fields[4] + "'");
            continue;
        }
        if (rec.timestamp <= 0) {
            report(line_no, "non-positive timestamp");
            continue;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

MetarReport parse_metar(const std::string& raw) {
    MetarReport rep;
    rep.raw_text = raw;

    std::vector<std::string> tokens;
    {
        std::istringstream iss(raw);
        std::string tok;
        while (iss >> tok) tokens.push_back(tok);
    }
    if (tokens.empty()) throw ParseError("empty METAR body");

    std::size_t idx = 0;
    if (tokens[idx] == "METAR" || tokens[idx] == "SPECI") ++idx;
    if (idx >= tokens.size() || tokens[idx].size() != 4)
        throw ParseError("bad station token '" + (idx < tokens.size() ? tokens[idx] : "") + "'");
    rep.station = tokens[idx++];

    if (idx >= tokens.size()) throw ParseError("missing time group");
    {
        const std::string& t = tokens[idx];
        if (t.size() != 7 || t.back() != 'Z' || !all_digits(t.substr(0, 6)))
            throw ParseError("bad time group '" + t + "'");
        const int day = std::stoi(t.substr(0, 2));
        const int hh = std::stoi(t.substr(2, 2));
        const int mm = std::stoi(t.substr(4, 2));
        if (day < 1 || day > 31 || hh > 23 || mm > 59)
            throw ParseError("bad time group '" + t + "'");
        rep.issue_time = static_cast<std::int64_t>(day - 1) * 86400 + hh * 3600 + mm * 60;
        ++idx;
    }

    // Scan for the wind group: dddssKT, dddssGggKT, VRBssKT or 00000KT.
    for (; idx < tokens.size(); ++idx) {
        const std::string& t = tokens[idx];
        if (t == "AUTO" || t == "COR") continue;
        if (t.size() < 7 || t.substr(t.size() - 2) != "KT")
            throw ParseError("ill-formed wind group '" + t + "'");

        const std::string body = t.substr(0, t.size() - 2);
        std::string dir = body.substr(0, 3);
        std::string rest = body.substr(3);

        std::string speed, gust;
        const auto gpos = rest.find('G');
        if (gpos == std::string::npos) {
            speed = rest;
        } else {
            speed = rest.substr(0, gpos);
            gust = rest.substr(gpos + 1);
        }
        if (speed.size() < 2 || speed.size() > 3 || !all_digits(speed))
            throw ParseError("ill-formed wind group '" + t + "'");
        if (gpos != std::string::npos && (gust.size() < 2 || gust.size() > 3 || !all_digits(gust)))
            throw ParseError("ill-formed wind group '" + t + "'");

        rep.wind_speed_kt = std::stod(speed);
        if (!gust.empty()) {
            rep.gust_kt = std::stod(gust);
            if (*rep.gust_kt < rep.wind_speed_kt)
                throw ParseError("gust below sustained speed in '" + t + "'");
        }

        if (dir == "VRB") {
            rep.wind_kind = WindKind::Variable;
        } else if (all_digits(dir)) {
            double d = std::stod(dir);
            if (d > 360.0) throw ParseError("wind direction out of range in '" + t + "'");
            if (d == 360.0) d = 0.0;
            rep.wind_dir_deg = d;
            rep.wind_kind = (rep.wind_speed_kt == 0.0 && d == 0.0 && !rep.gust_kt)
                                ? WindKind::Calm
                                : WindKind::Normal;
        } else {
            throw ParseError("ill-formed wind group '" + t + "'");
        }
        return rep;
    }
    throw ParseError("missing wind group");
}

void resolve_metar_times(std::vector<MetarReport>& reports, std::int64_t reference_epoch) {
    const CivilDate ref = civil_from_days(reference_epoch >= 0 ? reference_epoch / 86400
                                                               : (reference_epoch - 86399) / 86400);
    for (auto& rep : reports) {
        const int day = static_cast<int>(rep.issue_time / 86400) + 1;
        const std::int64_t within_day = rep.issue_time % 86400;

        std::int64_t best = 0;
        std::int64_t best_dist = -1;
        for (int dm = -1; dm <= 1; ++dm) {
            int y = ref.year;
            int m = ref.month + dm;
            if (m < 1) { m += 12; --y; }
            if (m > 12) { m -= 12; ++y; }
            if (day > days_in_month(y, m)) continue;
            const std::int64_t candidate = civil_to_epoch(y, m, day) + within_day;
            const std::int64_t dist = std::llabs(candidate - reference_epoch);
            if (best_dist < 0 || dist < best_dist) {
                best_dist = dist;
                best = candidate;
            }
        }
        rep.issue_time = best;
    }
    std::sort(reports.begin(), reports.end(),
              [](const MetarReport& a, const MetarReport& b) { return a.issue_time < b.issue_time; });
}

WindContext wind_to_runway_frame(const MetarReport& report, double axis_azimuth_deg) {
    WindContext ctx;
    if (report.wind_kind == WindKind::Variable) {
        ctx.variable_flag = true;
        return ctx;
    }
    if (report.wind_kind == WindKind::Calm || report.wind_speed_kt == 0.0) return ctx;

    const double speed_mps = report.wind_speed_kt * kKnotToMps;
    const double heading = report.wind_dir_deg + 180.0; // direction of air motion
    const double rel = (heading - axis_azimuth_deg) * kDegToRad;
    ctx.u_along = speed_mps * std::cos(rel);
    ctx.u_cross = speed_mps * std::sin(rel);
    return ctx;
}

std::size_t nearest_report_index(const std::vector<MetarReport>& reports, std::int64_t t) {
    if (reports.empty()) throw std::runtime_error("no weather available");
    auto it = std::lower_bound(reports.begin(), reports.end(), t,
                               [](const MetarReport& r, std::int64_t v) { return r.issue_time < v; });
    if (it == reports.begin()) return 0;
    if (it == reports.end()) return reports.size() - 1;
    const std::size_t hi = static_cast<std::size_t>(it - reports.begin());
    const std::size_t lo = hi - 1;
    const std::int64_t dlo = t - reports[lo].issue_time;
    const std::int64_t dhi = reports[hi].issue_time - t;
    return dlo <= dhi ? lo : hi; // ties toward the earlier report
}

std::vector<std::pair<RawTrackRecord, MetarReport>>
join_weather(const std::vector<RawTrackRecord>& records,
             const std::vector<MetarReport>& reports) {
    if (reports.empty()) throw std::runtime_error("no weather available");
    std::vector<std::pair<RawTrackRecord, MetarReport>> out;
    out.reserve(records.size());
    for (const auto& rec : records)
        out.emplace_back(rec, reports[nearest_report_index(reports, rec.timestamp)]);
    return out;
}

} // namespace airtraj::ingest
