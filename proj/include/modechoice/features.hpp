#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "modechoice/csv.hpp"
#include "modechoice/datamodel.hpp"
#include "modechoice/geo.hpp"

namespace modechoice::features {

inline constexpr int kNumPoiCategories = 33;

/// Sentinel for absent numeric values (mode not displayed, undefined speed,
/// unseen cell distance). The boosted-tree learner routes these through each
/// split's stored default direction.
inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

struct TimeFeatures {
    int hour = 0;     // 0..23 local
    int weekday = 0;  // 0 = Monday .. 6 = Sunday
    int is_weekend = 0;
};

/// Hour and weekday in the configured local offset. Day 0 of the epoch was a
/// Thursday.
inline TimeFeatures time_features(const QueryRecord& q, int utc_offset_s) {
    const std::int64_t local = q.timestamp + utc_offset_s;
    std::int64_t days = local / 86400;
    std::int64_t rem = local - days * 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    TimeFeatures out;
    out.hour = static_cast<int>(rem / 3600);
    out.weekday = static_cast<int>(((days % 7) + 7 + 3) % 7);
    out.is_weekend = out.weekday >= 5 ? 1 : 0;
    return out;
}

enum class Network { bus = 0, metro = 1 };

/// Station coordinates per network with exact k-nearest and radius queries
/// (great-circle metric).
class StationIndex {
public:
    void add(Network net, GeoPoint p) { nets_[idx(net)].push_back(p); }

    const std::vector<GeoPoint>& stations(Network net) const { return nets_[idx(net)]; }

    /// k smallest distances in meters, ascending; fewer when the network has
    /// fewer stations.
    std::vector<double> k_nearest(Network net, const GeoPoint& p, std::size_t k) const {
        const auto& pts = nets_[idx(net)];
        std::vector<double> d(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) d[i] = haversine_m(p, pts[i]);
        const std::size_t kk = std::min(k, d.size());
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
        d.resize(kk);
        return d;
    }

    std::size_t count_within(Network net, const GeoPoint& p, double radius_m) const {
        const auto& pts = nets_[idx(net)];
        std::size_t n = 0;
        for (const auto& s : pts) {
            if (haversine_m(p, s) <= radius_m) ++n;
        }
        return n;
    }

    static StationIndex load_csv(const std::string& path) {
        StationIndex out;
        const CsvTable t = read_csv(path);
        const auto c_net = static_cast<std::size_t>(t.require_column("network"));
        const auto c_lng = static_cast<std::size_t>(t.require_column("lng"));
        const auto c_lat = static_cast<std::size_t>(t.require_column("lat"));
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const std::string& net = t.rows[r][c_net];
            const GeoPoint p{parse_double(t.rows[r][c_lng], t.context(r, c_lng)),
                             parse_double(t.rows[r][c_lat], t.context(r, c_lat))};
            if (net == "bus") out.add(Network::bus, p);
            else if (net == "metro") out.add(Network::metro, p);
            else throw DataError(t.context(r, c_net) + ": unknown network '" + net + "'");
        }
        return out;
    }

private:
    static std::size_t idx(Network net) { return static_cast<std::size_t>(net); }
    std::array<std::vector<GeoPoint>, 2> nets_;
};

/// POI counts per geohash cell over the 33 categories; absent cells read as
/// all zero.
struct PoiTable {
    std::unordered_map<std::string, std::array<double, kNumPoiCategories>> cells;

    std::array<double, kNumPoiCategories> lookup(const std::string& cell) const {
        auto it = cells.find(cell);
        if (it != cells.end()) return it->second;
        return std::array<double, kNumPoiCategories>{};
    }

    static PoiTable load_csv(const std::string& path) {
        PoiTable out;
        const CsvTable t = read_csv(path);
        const auto c_cell = static_cast<std::size_t>(t.require_column("cell"));
        std::array<std::size_t, kNumPoiCategories> cols{};
        for (int c = 0; c < kNumPoiCategories; ++c) {
            cols[static_cast<std::size_t>(c)] = static_cast<std::size_t>(t.require_column("c" + format_int(c)));
        }
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            auto& counts = out.cells[t.rows[r][c_cell]];
            for (int c = 0; c < kNumPoiCategories; ++c) {
                const auto col = cols[static_cast<std::size_t>(c)];
                counts[static_cast<std::size_t>(c)] = parse_double(t.rows[r][col], t.context(r, col));
                if (counts[static_cast<std::size_t>(c)] < 0) throw DataError(t.context(r, col) + ": POI counts must be >= 0");
            }
        }
        return out;
    }
};

/// Origin/destination visit counts per geohash cell. Built from the training
/// split only; unseen cells read as 0.
struct VisitFrequency {
    int precision = 6;
    std::unordered_map<std::string, double> origin_counts;
    std::unordered_map<std::string, double> dest_counts;

    static VisitFrequency build(const std::vector<TripSession>& train_sessions, int precision) {
        VisitFrequency out;
        out.precision = precision;
        for (const auto& s : train_sessions) {
            out.origin_counts[geohash_encode(s.query.origin.lng, s.query.origin.lat, precision)] += 1.0;
            out.dest_counts[geohash_encode(s.query.destination.lng, s.query.destination.lat, precision)] += 1.0;
        }
        return out;
    }

    double origin(const std::string& cell) const {
        auto it = origin_counts.find(cell);
        return it == origin_counts.end() ? 0.0 : it->second;
    }
    double dest(const std::string& cell) const {
        auto it = dest_counts.find(cell);
        return it == dest_counts.end() ? 0.0 : it->second;
    }
};

/// Read-only inputs of featurization. Everything here is built from the
/// training split or from external GIS layers, never from validation data.
struct FeatureArtifacts {
    StationIndex stations;
    PoiTable poi;
    VisitFrequency frequency;
    std::vector<NamedPlace> landmarks;
    int geohash_precision = 6;
    int utc_offset_s = 8 * 3600;
    std::size_t profile_dim = 66;
};

struct FeatureTable {
    std::vector<std::string> column_names;
    std::vector<std::string> column_families;
    std::vector<std::string> session_ids;
    std::vector<int> labels;
    std::vector<double> values;  // row-major
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;

    double at(std::size_t r, std::size_t c) const { return values[r * n_cols + c]; }
    double& at(std::size_t r, std::size_t c) { return values[r * n_cols + c]; }
    const double* row(std::size_t r) const { return values.data() + r * n_cols; }

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < column_names.size(); ++i) {
            if (column_names[i] == name) return static_cast<int>(i);
        }
        return -1;
    }
};

namespace detail {

struct Agg {
    double mx = -std::numeric_limits<double>::infinity();
    double mn = std::numeric_limits<double>::infinity();
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    int max_mode = 0, min_mode = 0;

    void add(double v, int mode) {
        if (v > mx || (v == mx && mode < max_mode)) {
            mx = v;
            max_mode = mode;
        }
        if (v < mn || (v == mn && mode < min_mode)) {
            mn = v;
            min_mode = mode;
        }
        sum += v;
        sq += v * v;
        ++n;
    }
    double mean() const { return sum / static_cast<double>(n); }
    // population convention; a single plan has std 0
    double stddev() const {
        const double m = mean();
        return std::sqrt(std::max(0.0, sq / static_cast<double>(n) - m * m));
    }
};

} // namespace detail

/// The per-mode block (distance, price, eta, price*eta, speed, present flag
/// for each of the 11 modes) followed by descriptive statistics over the
/// displayed plans and the arg-mode summary (which mode ranked first, had
/// the longest/shortest distance and eta, the highest/lowest price).
struct PlanFeatures {
    std::vector<double> values;

    static std::vector<std::pair<std::string, std::string>> schema() {
        std::vector<std::pair<std::string, std::string>> s;
        for (int m = 1; m <= kNumModes; ++m) {
            const std::string suffix = std::string("_") + ModeCatalog::name(m);
            s.push_back({"dist" + suffix, "plan"});
            s.push_back({"price" + suffix, "plan"});
            s.push_back({"eta" + suffix, "plan"});
            s.push_back({"price_eta" + suffix, "plan"});
            s.push_back({"speed" + suffix, "plan"});
            s.push_back({"present" + suffix, "plan"});
        }
        for (const char* var : {"dist", "price", "eta", "speed"}) {
            for (const char* stat : {"max", "min", "mean", "std"}) {
                s.push_back({std::string(var) + "_" + stat, "plan_agg"});
            }
        }
        for (const char* name : {"first_mode", "longest_dist_mode", "shortest_dist_mode", "longest_eta_mode",
                                 "shortest_eta_mode", "highest_price_mode", "lowest_price_mode"}) {
            s.push_back({name, "plan_arg"});
        }
        return s;
    }
};

inline PlanFeatures plan_mode_features(const std::vector<PlanOption>& plans) {
    if (plans.empty()) throw DataError("plan_mode_features: empty plan list");
    PlanFeatures out;
    out.values.assign(PlanFeatures::schema().size(), missing_value());

    detail::Agg dist, price, eta, speed;
    int first_mode = 0, first_rank = std::numeric_limits<int>::max();
    for (const auto& p : plans) {
        const std::size_t base = static_cast<std::size_t>(p.mode - 1) * 6;
        const double spd = p.eta_s > 0.0 ? p.distance_m / p.eta_s : missing_value();
        out.values[base + 0] = p.distance_m;
        out.values[base + 1] = p.price_cent;
        out.values[base + 2] = p.eta_s;
        out.values[base + 3] = p.price_cent * p.eta_s;
        out.values[base + 4] = spd;
        out.values[base + 5] = 1.0;
        dist.add(p.distance_m, p.mode);
        price.add(p.price_cent, p.mode);
        eta.add(p.eta_s, p.mode);
        if (!is_missing(spd)) speed.add(spd, p.mode);
        if (p.display_rank < first_rank) {
            first_rank = p.display_rank;
            first_mode = p.mode;
        }
    }
    for (int m = 0; m < kNumModes; ++m) {
        const std::size_t base = static_cast<std::size_t>(m) * 6;
        if (is_missing(out.values[base + 5])) out.values[base + 5] = 0.0;
    }

    std::size_t i = static_cast<std::size_t>(kNumModes) * 6;
    for (const detail::Agg* a : {&dist, &price, &eta, &speed}) {
        if (a->n > 0) {
            out.values[i + 0] = a->mx;
            out.values[i + 1] = a->mn;
            out.values[i + 2] = a->mean();
            out.values[i + 3] = a->stddev();
        }
        i += 4;
    }
    out.values[i + 0] = first_mode;
    out.values[i + 1] = dist.max_mode;
    out.values[i + 2] = dist.min_mode;
    out.values[i + 3] = eta.max_mode;
    out.values[i + 4] = eta.min_mode;
    out.values[i + 5] = price.max_mode;
    out.values[i + 6] = price.min_mode;
    return out;
}

/// Distances to the 5 nearest stations plus the station count within 1500 m,
/// per network. Missing stations pad with the sentinel.
struct StationFeatures {
    static constexpr double kRadiusM = 1500.0;
    std::array<double, 5> bus_nearest;
    double bus_count = 0;
    std::array<double, 5> metro_nearest;
    double metro_count = 0;
};

inline StationFeatures station_features(const GeoPoint& point, const StationIndex& idx) {
    StationFeatures out;
    for (const Network net : {Network::bus, Network::metro}) {
        if (idx.stations(net).empty()) {
            throw DataError("station_features: empty station index for network " +
                            std::string(net == Network::bus ? "bus" : "metro"));
        }
        const auto nearest = idx.k_nearest(net, point, 5);
        auto& slot = net == Network::bus ? out.bus_nearest : out.metro_nearest;
        for (std::size_t i = 0; i < 5; ++i) slot[i] = i < nearest.size() ? nearest[i] : missing_value();
        const double count = static_cast<double>(idx.count_within(net, point, StationFeatures::kRadiusM));
        (net == Network::bus ? out.bus_count : out.metro_count) = count;
    }
    return out;
}

/// Assembles the full fixed-width table. Column order is deterministic and
/// identical across splits; the schema depends only on the artifacts
/// (landmark list and profile width).
inline FeatureTable build_feature_table(const std::vector<TripSession>& sessions,
                                        const FeatureArtifacts& artifacts) {
    FeatureTable t;
    auto push_col = [&](const std::string& name, const std::string& family) {
        t.column_names.push_back(name);
        t.column_families.push_back(family);
    };
    for (const char* c : {"hour", "weekday", "is_weekend"}) push_col(c, "time");
    for (const char* c : {"o_lng", "o_lat", "d_lng", "d_lat"}) push_col(c, "location");
    for (const auto& [name, family] : PlanFeatures::schema()) push_col(name, family);
    for (const char* side : {"o", "d"}) {
        for (const char* net : {"bus", "metro"}) {
            for (int i = 1; i <= 5; ++i) {
                push_col(std::string(side) + "_" + net + "_near" + format_int(i), "station");
            }
            push_col(std::string(side) + "_" + net + "_n1500", "station");
        }
    }
    for (const char* side : {"o", "d"}) {
        for (int c = 0; c < kNumPoiCategories; ++c) {
            push_col(std::string(side) + "_poi_c" + format_int(c), "poi");
        }
    }
    push_col("o_visit_freq", "frequency");
    push_col("d_visit_freq", "frequency");
    for (const auto& lm : artifacts.landmarks) {
        push_col("o_dist_" + lm.name, "landmark");
        push_col("d_dist_" + lm.name, "landmark");
    }
    for (std::size_t i = 0; i < artifacts.profile_dim; ++i) {
        push_col("p" + format_int(static_cast<std::int64_t>(i)), "profile");
    }

    t.n_cols = t.column_names.size();
    t.n_rows = sessions.size();
    t.values.assign(t.n_rows * t.n_cols, 0.0);
    t.labels.resize(t.n_rows);
    t.session_ids.resize(t.n_rows);

    for (std::size_t r = 0; r < sessions.size(); ++r) {
        const TripSession& s = sessions[r];
        double* row = t.values.data() + r * t.n_cols;
        std::size_t c = 0;

        const TimeFeatures tf = time_features(s.query, artifacts.utc_offset_s);
        row[c++] = tf.hour;
        row[c++] = tf.weekday;
        row[c++] = tf.is_weekend;
        row[c++] = s.query.origin.lng;
        row[c++] = s.query.origin.lat;
        row[c++] = s.query.destination.lng;
        row[c++] = s.query.destination.lat;

        const PlanFeatures pf = plan_mode_features(s.plans);
        for (double v : pf.values) row[c++] = v;

        for (const GeoPoint* point : {&s.query.origin, &s.query.destination}) {
            const StationFeatures sf = station_features(*point, artifacts.stations);
            for (double v : sf.bus_nearest) row[c++] = v;
            row[c++] = sf.bus_count;
            for (double v : sf.metro_nearest) row[c++] = v;
            row[c++] = sf.metro_count;
        }

        const std::string o_cell =
            geohash_encode(s.query.origin.lng, s.query.origin.lat, artifacts.geohash_precision);
        const std::string d_cell =
            geohash_encode(s.query.destination.lng, s.query.destination.lat, artifacts.geohash_precision);
        for (double v : artifacts.poi.lookup(o_cell)) row[c++] = v;
        for (double v : artifacts.poi.lookup(d_cell)) row[c++] = v;
        row[c++] = artifacts.frequency.origin(o_cell);
        row[c++] = artifacts.frequency.dest(d_cell);

        for (const auto& lm : artifacts.landmarks) {
            row[c++] = haversine_m(s.query.origin, lm.pos);
            row[c++] = haversine_m(s.query.destination, lm.pos);
        }

        if (s.profile) {
            if (s.profile->attributes.size() != artifacts.profile_dim) {
                throw DataError("session '" + s.query.session_id + "': profile width " +
                                format_int(static_cast<std::int64_t>(s.profile->attributes.size())) +
                                " does not match configured width " +
                                format_int(static_cast<std::int64_t>(artifacts.profile_dim)));
            }
            for (const std::uint8_t v : s.profile->attributes) row[c++] = v;
        } else {
            for (std::size_t i = 0; i < artifacts.profile_dim; ++i) row[c++] = 0.0;
        }

        if (c != t.n_cols) throw NumericError("feature row width mismatch");
        t.labels[r] = s.label;
        t.session_ids[r] = s.query.session_id;
    }
    return t;
}

/// CSV persistence: header row of column names prefixed by session_id and
/// label; missing values are empty fields. The sidecar schema file lists
/// column order and family tags.
inline void save_feature_table(const FeatureTable& t, const std::string& csv_path,
                               const std::string& schema_path) {
    CsvWriter out(csv_path);
    {
        std::string header = "session_id,label";
        for (const auto& n : t.column_names) header += "," + n;
        out.raw_line(header);
    }
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        std::vector<std::string> fields{t.session_ids[r], format_int(t.labels[r])};
        for (std::size_t c = 0; c < t.n_cols; ++c) {
            const double v = t.at(r, c);
            fields.push_back(is_missing(v) ? std::string() : format_double(v));
        }
        out.row(fields);
    }
    out.close();

    CsvWriter schema(schema_path);
    schema.raw_line("index,name,family");
    for (std::size_t c = 0; c < t.n_cols; ++c) {
        schema.row({format_int(static_cast<std::int64_t>(c)), t.column_names[c], t.column_families[c]});
    }
    schema.close();
}

inline FeatureTable load_feature_table(const std::string& csv_path, const std::string& schema_path) {
    const CsvTable csv = read_csv(csv_path);
    if (csv.header.size() < 2 || csv.header[0] != "session_id" || csv.header[1] != "label") {
        throw DataError(csv_path + ": expected leading session_id,label columns");
    }
    FeatureTable t;
    t.n_cols = csv.header.size() - 2;
    t.n_rows = csv.rows.size();
    t.column_names.assign(csv.header.begin() + 2, csv.header.end());
    t.column_families.assign(t.n_cols, "");
    const CsvTable schema = read_csv(schema_path);
    const auto c_idx = static_cast<std::size_t>(schema.require_column("index"));
    const auto c_name = static_cast<std::size_t>(schema.require_column("name"));
    const auto c_family = static_cast<std::size_t>(schema.require_column("family"));
    for (std::size_t r = 0; r < schema.rows.size(); ++r) {
        const auto i = static_cast<std::size_t>(parse_int(schema.rows[r][c_idx], schema.context(r, c_idx)));
        if (i >= t.n_cols || schema.rows[r][c_name] != t.column_names[i]) {
            throw DataError(schema_path + ": schema does not match table header");
        }
        t.column_families[i] = schema.rows[r][c_family];
    }
    t.values.assign(t.n_rows * t.n_cols, 0.0);
    t.labels.resize(t.n_rows);
    t.session_ids.resize(t.n_rows);
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        t.session_ids[r] = csv.rows[r][0];
        t.labels[r] = static_cast<int>(parse_int(csv.rows[r][1], csv.context(r, 1)));
        for (std::size_t c = 0; c < t.n_cols; ++c) {
            const std::string& field = csv.rows[r][c + 2];
            t.at(r, c) = field.empty() ? missing_value() : parse_double(field, csv.context(r, c + 2));
        }
    }
    return t;
}

} // namespace modechoice::features
