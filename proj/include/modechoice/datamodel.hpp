#pragma once

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "modechoice/csv.hpp"
#include "modechoice/errors.hpp"
#include "modechoice/geo.hpp"

namespace modechoice {

inline constexpr int kNumModes = 11;    // transport modes 1..11
inline constexpr int kNumClasses = 12;  // label 0 (no click) + 11 modes

/// Semantic names inferred from price/speed characteristics; label 0 is the
/// no-click class.
struct ModeCatalog {
    static const char* name(int label) {
        static constexpr const char* kNames[kNumClasses] = {
            "no_click", "bus",        "metro",      "drive",
            "taxi",     "walk",       "bike",       "metro+bus",
            "bus+taxi", "metro+bike", "metro+taxi", "metro+bus+bike"};
        if (label < 0 || label >= kNumClasses) throw ConfigError("label out of range 0..11");
        return kNames[label];
    }
};

struct QueryRecord {
    std::string session_id;
    std::string profile_id;  // empty = absent
    std::int64_t timestamp = 0;
    GeoPoint origin;
    GeoPoint destination;
};

struct PlanOption {
    int mode = 0;  // 1..11
    double distance_m = 0.0;
    double eta_s = 0.0;
    double price_cent = 0.0;  // 0 = free mode
    int display_rank = 1;
};

struct ClickRecord {
    std::string session_id;
    std::int64_t timestamp = 0;
    int click_mode = 0;
};

struct UserProfile {
    std::string profile_id;
    std::vector<std::uint8_t> attributes;  // entries in {0,1}, shared length P
};

struct TripSession {
    QueryRecord query;
    std::vector<PlanOption> plans;  // ordered by display_rank
    int label = 0;                  // 0 = no click, else one of the displayed modes
    std::optional<UserProfile> profile;
    std::optional<std::int64_t> click_timestamp;

    bool has_mode(int mode) const {
        for (const auto& p : plans)
            if (p.mode == mode) return true;
        return false;
    }

    const PlanOption* plan_for_mode(int mode) const {
        for (const auto& p : plans)
            if (p.mode == mode) return &p;
        return nullptr;
    }
};

namespace detail {

inline void check_coord(double lng, double lat, const std::string& context) {
    if (lng < -180.0 || lng > 180.0) throw DataError(context + ": longitude out of range [-180,180]");
    if (lat < -90.0 || lat > 90.0) throw DataError(context + ": latitude out of range [-90,90]");
}

// Empty fields mean missing; missing numeric prices parse as 0 (free mode).
inline double parse_price(const std::string& field, const std::string& context) {
    if (field.empty()) return 0.0;
    const double v = parse_double(field, context);
    if (v < 0) throw DataError(context + ": price must be >= 0");
    return v;
}

} // namespace detail

/// Loads the four tables and assembles one TripSession per query row,
/// ordered by timestamp ascending (ties by session_id). Sessions without a
/// click row get label 0. clicks_path may be empty (unlabeled data).
inline std::vector<TripSession> load_dataset(const std::string& queries_path,
                                             const std::string& plans_path,
                                             const std::string& clicks_path,
                                             const std::string& profiles_path) {
    // profiles
    std::unordered_map<std::string, UserProfile> profiles;
    std::size_t profile_dim = 0;
    if (!profiles_path.empty()) {
        const CsvTable t = read_csv(profiles_path);
        const int c_pid = t.require_column("profile_id");
        if (t.header.size() < 2) throw DataError(profiles_path + ": no attribute columns");
        profile_dim = t.header.size() - 1;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            UserProfile p;
            p.profile_id = t.rows[r][static_cast<std::size_t>(c_pid)];
            if (p.profile_id.empty()) throw DataError(t.context(r, static_cast<std::size_t>(c_pid)) + ": empty profile_id");
            p.attributes.reserve(profile_dim);
            for (std::size_t c = 0; c < t.header.size(); ++c) {
                if (static_cast<int>(c) == c_pid) continue;
                const std::int64_t v = parse_int(t.rows[r][c], t.context(r, c));
                if (v != 0 && v != 1) throw DataError(t.context(r, c) + ": profile attributes must be 0 or 1");
                p.attributes.push_back(static_cast<std::uint8_t>(v));
            }
            profiles[p.profile_id] = std::move(p);
        }
    }

    // queries
    std::vector<TripSession> sessions;
    std::unordered_map<std::string, std::size_t> by_session;
    {
        const CsvTable t = read_csv(queries_path);
        const std::size_t c_sid = static_cast<std::size_t>(t.require_column("session_id"));
        const std::size_t c_pid = static_cast<std::size_t>(t.require_column("profile_id"));
        const std::size_t c_ts = static_cast<std::size_t>(t.require_column("timestamp"));
        const std::size_t c_olng = static_cast<std::size_t>(t.require_column("o_lng"));
        const std::size_t c_olat = static_cast<std::size_t>(t.require_column("o_lat"));
        const std::size_t c_dlng = static_cast<std::size_t>(t.require_column("d_lng"));
        const std::size_t c_dlat = static_cast<std::size_t>(t.require_column("d_lat"));
        sessions.reserve(t.rows.size());
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            TripSession s;
            s.query.session_id = t.rows[r][c_sid];
            if (s.query.session_id.empty()) throw DataError(t.context(r, c_sid) + ": empty session_id");
            s.query.profile_id = t.rows[r][c_pid];
            s.query.timestamp = parse_int(t.rows[r][c_ts], t.context(r, c_ts));
            s.query.origin = {parse_double(t.rows[r][c_olng], t.context(r, c_olng)),
                              parse_double(t.rows[r][c_olat], t.context(r, c_olat))};
            s.query.destination = {parse_double(t.rows[r][c_dlng], t.context(r, c_dlng)),
                                   parse_double(t.rows[r][c_dlat], t.context(r, c_dlat))};
            detail::check_coord(s.query.origin.lng, s.query.origin.lat, t.context(r, c_olng));
            detail::check_coord(s.query.destination.lng, s.query.destination.lat, t.context(r, c_dlng));
            if (by_session.count(s.query.session_id)) {
                throw DataError(t.context(r, c_sid) + ": duplicate session_id '" + s.query.session_id + "'");
            }
            if (!s.query.profile_id.empty()) {
                auto it = profiles.find(s.query.profile_id);
                if (it != profiles.end()) s.profile = it->second;
            }
            by_session[s.query.session_id] = sessions.size();
            sessions.push_back(std::move(s));
        }
    }

    // plans
    {
        const CsvTable t = read_csv(plans_path);
        const std::size_t c_sid = static_cast<std::size_t>(t.require_column("session_id"));
        const std::size_t c_rank = static_cast<std::size_t>(t.require_column("display_rank"));
        const std::size_t c_mode = static_cast<std::size_t>(t.require_column("mode"));
        const std::size_t c_dist = static_cast<std::size_t>(t.require_column("distance_m"));
        const std::size_t c_eta = static_cast<std::size_t>(t.require_column("eta_s"));
        const std::size_t c_price = static_cast<std::size_t>(t.require_column("price_cent"));
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            auto it = by_session.find(t.rows[r][c_sid]);
            if (it == by_session.end()) {
                throw DataError(t.context(r, c_sid) + ": plan references unknown session '" + t.rows[r][c_sid] + "'");
            }
            PlanOption p;
            p.mode = static_cast<int>(parse_int(t.rows[r][c_mode], t.context(r, c_mode)));
            if (p.mode < 1 || p.mode > kNumModes) {
                throw DataError(t.context(r, c_mode) + ": mode out of range 1..11");
            }
            p.display_rank = static_cast<int>(parse_int(t.rows[r][c_rank], t.context(r, c_rank)));
            if (p.display_rank < 1) throw DataError(t.context(r, c_rank) + ": display_rank must be >= 1");
            p.distance_m = parse_double(t.rows[r][c_dist], t.context(r, c_dist));
            if (p.distance_m < 0) throw DataError(t.context(r, c_dist) + ": distance must be >= 0");
            p.eta_s = parse_double(t.rows[r][c_eta], t.context(r, c_eta));
            if (p.eta_s < 0) throw DataError(t.context(r, c_eta) + ": eta must be >= 0");
            p.price_cent = detail::parse_price(t.rows[r][c_price], t.context(r, c_price));
            TripSession& s = sessions[it->second];
            for (const auto& q : s.plans) {
                if (q.display_rank == p.display_rank) {
                    throw DataError(t.context(r, c_rank) + ": duplicate display_rank in session '" +
                                    s.query.session_id + "'");
                }
            }
            s.plans.push_back(p);
        }
    }
    for (auto& s : sessions) {
        if (s.plans.empty()) {
            throw DataError(plans_path + ": session '" + s.query.session_id + "' has no plans");
        }
        std::sort(s.plans.begin(), s.plans.end(),
                  [](const PlanOption& a, const PlanOption& b) { return a.display_rank < b.display_rank; });
    }

    // clicks; a session may have several click rows upstream, only the first
    // (earliest timestamp, file order on ties) is kept
    if (!clicks_path.empty()) {
        const CsvTable t = read_csv(clicks_path);
        const std::size_t c_sid = static_cast<std::size_t>(t.require_column("session_id"));
        const std::size_t c_ts = static_cast<std::size_t>(t.require_column("timestamp"));
        const std::size_t c_mode = static_cast<std::size_t>(t.require_column("click_mode"));
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            auto it = by_session.find(t.rows[r][c_sid]);
            if (it == by_session.end()) {
                throw DataError(t.context(r, c_sid) + ": click references unknown session '" + t.rows[r][c_sid] + "'");
            }
            const int mode = static_cast<int>(parse_int(t.rows[r][c_mode], t.context(r, c_mode)));
            if (mode < 1 || mode > kNumModes) {
                throw DataError(t.context(r, c_mode) + ": click_mode out of range 1..11");
            }
            TripSession& s = sessions[it->second];
            if (!s.has_mode(mode)) {
                throw DataError(t.context(r, c_mode) + ": click_mode " + format_int(mode) +
                                " not in the displayed plan list of session '" + s.query.session_id + "'");
            }
            const std::int64_t ts = parse_int(t.rows[r][c_ts], t.context(r, c_ts));
            if (!s.click_timestamp || ts < *s.click_timestamp) {
                s.label = mode;
                s.click_timestamp = ts;
            }
        }
    }

    std::sort(sessions.begin(), sessions.end(), [](const TripSession& a, const TripSession& b) {
        if (a.query.timestamp != b.query.timestamp) return a.query.timestamp < b.query.timestamp;
        return a.query.session_id < b.query.session_id;
    });
    return sessions;
}

/// train = timestamp < cutoff, validation = the rest. Input must be sorted by
/// timestamp; warns (stderr) when the cutoff leaves one side empty.
inline std::pair<std::vector<TripSession>, std::vector<TripSession>> split_by_time(
    const std::vector<TripSession>& sessions, std::int64_t cutoff) {
    std::pair<std::vector<TripSession>, std::vector<TripSession>> out;
    for (const auto& s : sessions) {
        (s.query.timestamp < cutoff ? out.first : out.second).push_back(s);
    }
    if (!sessions.empty() && (out.first.empty() || out.second.empty())) {
        std::cerr << "warning: split cutoff " << cutoff << " is outside the data time range; "
                  << (out.first.empty() ? "train" : "validation") << " split is empty\n";
    }
    return out;
}

struct ClassStats {
    std::size_t count = 0;
    double ratio = 0.0;
};

inline std::map<int, ClassStats> class_distribution(const std::vector<TripSession>& sessions) {
    if (sessions.empty()) throw DataError("class_distribution: empty session list");
    std::map<int, ClassStats> out;
    for (const auto& s : sessions) out[s.label].count += 1;
    for (auto& [label, st] : out) {
        st.ratio = static_cast<double>(st.count) / static_cast<double>(sessions.size());
    }
    return out;
}

/// Canonical order for the query table: (timestamp, session_id) ascending.
inline std::vector<const TripSession*> canonical_order(const std::vector<TripSession>& sessions) {
    std::vector<const TripSession*> ordered;
    ordered.reserve(sessions.size());
    for (const auto& s : sessions) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](const TripSession* a, const TripSession* b) {
        if (a->query.timestamp != b->query.timestamp) return a->query.timestamp < b->query.timestamp;
        return a->query.session_id < b->query.session_id;
    });
    return ordered;
}

/// Writes queries/plans/clicks in canonical form: sessions by (timestamp,
/// session_id), plans by display_rank, numbers in shortest round-trip
/// notation.
inline void write_sessions(const std::vector<TripSession>& sessions,
                           const std::string& queries_path, const std::string& plans_path,
                           const std::string& clicks_path) {
    CsvWriter queries(queries_path);
    queries.raw_line("session_id,profile_id,timestamp,o_lng,o_lat,d_lng,d_lat");
    CsvWriter plans(plans_path);
    plans.raw_line("session_id,display_rank,mode,distance_m,eta_s,price_cent");
    CsvWriter clicks(clicks_path);
    clicks.raw_line("session_id,timestamp,click_mode");

    for (const TripSession* s : canonical_order(sessions)) {
        queries.row({s->query.session_id, s->query.profile_id, format_int(s->query.timestamp),
                     format_double(s->query.origin.lng), format_double(s->query.origin.lat),
                     format_double(s->query.destination.lng), format_double(s->query.destination.lat)});
        for (const auto& p : s->plans) {
            plans.row({s->query.session_id, format_int(p.display_rank), format_int(p.mode),
                       format_double(p.distance_m), format_double(p.eta_s), format_double(p.price_cent)});
        }
        if (s->label != 0) {
            const std::int64_t ts = s->click_timestamp ? *s->click_timestamp : s->query.timestamp;
            clicks.row({s->query.session_id, format_int(ts), format_int(s->label)});
        }
    }
    queries.close();
    plans.close();
    clicks.close();
}

/// Writes a profile table, rows ordered by profile_id.
inline void write_profiles(const std::vector<UserProfile>& profiles, const std::string& path) {
    std::map<std::string, const UserProfile*> rows;
    std::size_t dim = 0;
    for (const auto& p : profiles) {
        rows[p.profile_id] = &p;
        dim = std::max(dim, p.attributes.size());
    }
    CsvWriter out(path);
    std::string header = "profile_id";
    for (std::size_t i = 0; i < dim; ++i) header += ",p" + format_int(static_cast<std::int64_t>(i));
    out.raw_line(header);
    for (const auto& [id, p] : rows) {
        std::vector<std::string> fields{id};
        for (std::size_t i = 0; i < dim; ++i) {
            fields.push_back(i < p->attributes.size() ? format_int(p->attributes[i]) : "0");
        }
        out.row(fields);
    }
    out.close();
}

/// Writes the four tables in canonical form; the profile table holds the
/// profiles referenced by the sessions. load_dataset of the output
/// reproduces the same sessions; rewriting the output is byte-identical.
inline void write_dataset(const std::vector<TripSession>& sessions,
                          const std::string& queries_path, const std::string& plans_path,
                          const std::string& clicks_path, const std::string& profiles_path) {
    write_sessions(sessions, queries_path, plans_path, clicks_path);
    std::vector<UserProfile> profiles;
    std::map<std::string, bool> seen;
    for (const TripSession* s : canonical_order(sessions)) {
        if (s->profile && !seen[s->profile->profile_id]) {
            seen[s->profile->profile_id] = true;
            profiles.push_back(*s->profile);
        }
    }
    write_profiles(profiles, profiles_path);
}

} // namespace modechoice
