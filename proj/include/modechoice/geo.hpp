#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "modechoice/errors.hpp"

namespace modechoice {

inline constexpr double kEarthRadiusM = 6371000.0;

struct GeoPoint {
    double lng = 0.0;
    double lat = 0.0;
};

struct NamedPlace {
    std::string name;
    GeoPoint pos;
};

/// Great-circle distance in meters on a sphere of radius 6,371,000 m.
inline double haversine_m(const GeoPoint& a, const GeoPoint& b) {
    constexpr double deg = 3.141592653589793238462643383279502884 / 180.0;
    const double lat1 = a.lat * deg, lat2 = b.lat * deg;
    const double dlat = (b.lat - a.lat) * deg;
    const double dlng = (b.lng - a.lng) * deg;
    const double s1 = std::sin(dlat / 2.0);
    const double s2 = std::sin(dlng / 2.0);
    const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Standard base-32 geohash of a coordinate. Longitude bit first, so
/// encode(p, k) is a prefix of encode(p, k+1).
inline std::string geohash_encode(double lng, double lat, int precision) {
    if (precision < 1) throw ConfigError("geohash precision must be >= 1");
    if (lng < -180.0 || lng > 180.0 || lat < -90.0 || lat > 90.0) {
        throw DataError("geohash: coordinate out of range: lng=" + std::to_string(lng) +
                        " lat=" + std::to_string(lat));
    }
    static constexpr char kBase32[] = "0123456789bcdefghjkmnpqrstuvwxyz";
    double lng_lo = -180.0, lng_hi = 180.0;
    double lat_lo = -90.0, lat_hi = 90.0;
    std::string out;
    out.reserve(static_cast<std::size_t>(precision));
    int bit = 0;
    int ch = 0;
    bool lng_turn = true;
    while (static_cast<int>(out.size()) < precision) {
        if (lng_turn) {
            const double mid = (lng_lo + lng_hi) / 2.0;
            if (lng >= mid) {
                ch = (ch << 1) | 1;
                lng_lo = mid;
            } else {
                ch <<= 1;
                lng_hi = mid;
            }
        } else {
            const double mid = (lat_lo + lat_hi) / 2.0;
            if (lat >= mid) {
                ch = (ch << 1) | 1;
                lat_lo = mid;
            } else {
                ch <<= 1;
                lat_hi = mid;
            }
        }
        lng_turn = !lng_turn;
        if (++bit == 5) {
            out.push_back(kBase32[ch]);
            bit = 0;
            ch = 0;
        }
    }
    return out;
}

} // namespace modechoice
