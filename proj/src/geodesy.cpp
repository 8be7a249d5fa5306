#include "mtm/geodesy.hpp"

#include "mtm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mtm {

namespace {

constexpr double kSqrt3 = std::numbers::sqrt3;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

double wrap_lon_delta(double d) {
    while (d >= 180.0) {
        d -= 360.0;
    }
    while (d < -180.0) {
        d += 360.0;
    }
    return d;
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') {
        return c - '0';
    }
    if (c >= 'a' && c <= 'f') {
        return c - 'a' + 10;
    }
    return -1;
}

std::string fmt(const LatLon& p) {
    std::ostringstream os;
    os << "(" << p.lat << ", " << p.lon << ")";
    return os.str();
}

}  // namespace

double hex_edge_for_area(double area_km2) {
    if (!(area_km2 > 0.0) || !std::isfinite(area_km2)) {
        throw DomainError("cell area must be positive and finite");
    }
    return std::sqrt(2.0 * area_km2 / (3.0 * kSqrt3));
}

void validate(const LatLon& p) {
    if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || p.lat < -90.0 || p.lat > 90.0 || p.lon < -180.0 ||
        p.lon > 180.0) {
        throw DomainError("coordinate out of range " + fmt(p));
    }
}

StudyArea::StudyArea(double lat_min_, double lat_max_, double lon_min_, double lon_max_)
    : lat_min(lat_min_), lat_max(lat_max_), lon_min(lon_min_), lon_max(lon_max_) {
    validate(LatLon{lat_min, lon_min});
    validate(LatLon{lat_max, lon_max});
    if (!(lat_min < lat_max) || !(lon_min < lon_max)) {
        throw ConfigError("study area must satisfy lat_min < lat_max and lon_min < lon_max");
    }
}

StudyArea StudyArea::around(const LatLon& centre, double width_km, double height_km) {
    const double dlat = rad2deg(height_km / 2.0 / kEarthRadiusKm);
    const double dlon = rad2deg(width_km / 2.0 / (kEarthRadiusKm * std::cos(deg2rad(centre.lat))));
    return StudyArea(centre.lat - dlat, centre.lat + dlat, centre.lon - dlon, centre.lon + dlon);
}

GridSpec::GridSpec(const LatLon& ref, int res, double edge) : resolution(res), edge_km(edge), ref_point(ref) {
    validate();
}

void GridSpec::validate() const {
    mtm::validate(ref_point);
    if (!(edge_km > 0.0) || !std::isfinite(edge_km)) {
        throw ConfigError("grid edge length must be positive");
    }
    if (resolution < 0 || resolution > 15) {
        throw ConfigError("grid resolution must be in [0, 15]");
    }
}

std::string CellId::hash() const {
    if (resolution < 0 || resolution > 15 || std::abs(q) >= kAxialOffset || std::abs(r) >= kAxialOffset) {
        throw DomainError("cell id outside the encodable range");
    }
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(15, '0');
    out[0] = '8';
    out[1] = kDigits[resolution];
    auto put = [&](std::size_t pos, std::uint32_t v) {
        for (int i = 5; i >= 0; --i) {
            out[pos + static_cast<std::size_t>(i)] = kDigits[v & 0xf];
            v >>= 4;
        }
    };
    put(2, static_cast<std::uint32_t>(q + kAxialOffset));
    put(8, static_cast<std::uint32_t>(r + kAxialOffset));
    out[14] = 'f';
    return out;
}

CellId CellId::from_hash(std::string_view hash) {
    if (hash.size() != 15) {
        throw ParseError("cell hash must be 15 characters: '" + std::string(hash) + "'");
    }
    if (hash[0] != '8' || hash[14] != 'f') {
        throw ParseError("cell hash must start with '8' and end with 'f': '" + std::string(hash) + "'");
    }
    std::uint32_t fields[2] = {0, 0};
    for (std::size_t i = 1; i < 14; ++i) {
        if (hex_digit(hash[i]) < 0) {
            throw ParseError("cell hash must be lowercase hex: '" + std::string(hash) + "'");
        }
    }
    for (int f = 0; f < 2; ++f) {
        for (std::size_t i = 0; i < 6; ++i) {
            fields[f] = fields[f] * 16 + static_cast<std::uint32_t>(hex_digit(hash[2 + 6 * f + i]));
        }
    }
    CellId c;
    c.resolution = hex_digit(hash[1]);
    c.q = static_cast<std::int32_t>(fields[0]) - kAxialOffset;
    c.r = static_cast<std::int32_t>(fields[1]) - kAxialOffset;
    if (std::abs(c.q) >= kAxialOffset || std::abs(c.r) >= kAxialOffset) {
        throw ParseError("cell hash axial coordinate out of range: '" + std::string(hash) + "'");
    }
    return c;
}

PlanarPoint project(const LatLon& p, const GridSpec& g) {
    const double cos_ref = std::cos(deg2rad(g.ref_point.lat));
    return {g.earth_radius_km * cos_ref * deg2rad(wrap_lon_delta(p.lon - g.ref_point.lon)),
            g.earth_radius_km * deg2rad(p.lat - g.ref_point.lat)};
}

LatLon unproject(const PlanarPoint& p, const GridSpec& g) {
    const double cos_ref = std::cos(deg2rad(g.ref_point.lat));
    double lon = g.ref_point.lon + rad2deg(p.x / (g.earth_radius_km * cos_ref));
    if (lon > 180.0) {
        lon -= 360.0;
    } else if (lon < -180.0) {
        lon += 360.0;
    }
    return {g.ref_point.lat + rad2deg(p.y / g.earth_radius_km), lon};
}

PlanarPoint cell_center_planar(const CellId& c, const GridSpec& g) {
    return {g.edge_km * 1.5 * c.q, g.edge_km * kSqrt3 * (c.r + c.q / 2.0)};
}

std::pair<std::int32_t, std::int32_t> cube_round(double q, double r) {
    const double s = -q - r;
    double rq = std::round(q);
    double rr = std::round(r);
    const double rs = std::round(s);
    const double dq = std::abs(rq - q);
    const double dr = std::abs(rr - r);
    const double ds = std::abs(rs - s);
    if (dq > dr && dq > ds) {
        rq = -rr - rs;
    } else if (dr > ds) {
        rr = -rq - rs;
    }
    return {static_cast<std::int32_t>(rq), static_cast<std::int32_t>(rr)};
}

CellId latlon_to_cell(const LatLon& p, const GridSpec& g) {
    validate(p);
    if (std::abs(p.lat - g.ref_point.lat) > 60.0) {
        throw DomainError("point " + fmt(p) + " too far from the grid reference latitude");
    }
    const PlanarPoint xy = project(p, g);
    const double fq = (2.0 / 3.0) * xy.x / g.edge_km;
    const double fr = (-xy.x / 3.0 + kSqrt3 / 3.0 * xy.y) / g.edge_km;
    const auto [q, r] = cube_round(fq, fr);
    CellId c;
    c.q = q;
    c.r = r;
    c.resolution = g.resolution;
    if (std::abs(c.q) >= kAxialOffset || std::abs(c.r) >= kAxialOffset) {
        throw DomainError("point " + fmt(p) + " falls outside the encodable grid");
    }
    return c;
}

LatLon cell_to_centroid(const CellId& c, const GridSpec& g) {
    return unproject(cell_center_planar(c, g), g);
}

std::array<PlanarPoint, 6> cell_vertices_planar(const CellId& c, const GridSpec& g) {
    const PlanarPoint centre = cell_center_planar(c, g);
    std::array<PlanarPoint, 6> out{};
    for (int i = 0; i < 6; ++i) {
        const double angle = std::numbers::pi / 3.0 * i;
        out[static_cast<std::size_t>(i)] = {centre.x + g.edge_km * std::cos(angle),
                                            centre.y + g.edge_km * std::sin(angle)};
    }
    return out;
}

std::array<LatLon, 7> cell_boundary(const CellId& c, const GridSpec& g) {
    const auto vertices = cell_vertices_planar(c, g);
    std::array<LatLon, 7> ring{};
    for (std::size_t i = 0; i < 6; ++i) {
        ring[i] = unproject(vertices[i], g);
    }
    ring[6] = ring[0];
    return ring;
}

bool hex_contains(const CellId& c, const PlanarPoint& p, const GridSpec& g, double scale) {
    const PlanarPoint centre = cell_center_planar(c, g);
    const double s = g.edge_km * scale;
    const double dx = std::abs(p.x - centre.x);
    const double dy = std::abs(p.y - centre.y);
    return dy <= kSqrt3 / 2.0 * s && kSqrt3 * dx + dy <= kSqrt3 * s;
}

double haversine_km(const LatLon& a, const LatLon& b) {
    const double phi1 = deg2rad(a.lat);
    const double phi2 = deg2rad(b.lat);
    const double dphi = phi2 - phi1;
    const double dlambda = deg2rad(b.lon - a.lon);
    const double h = std::sin(dphi / 2.0) * std::sin(dphi / 2.0) +
                     std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2.0) * std::sin(dlambda / 2.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

std::pair<double, double> relative_coords(const LatLon& p, const StudyArea& area) {
    const LatLon ref = area.ref_point();
    return {p.lat - ref.lat, p.lon - ref.lon};
}

std::vector<CellId> cells_in_area(const StudyArea& area, const GridSpec& g) {
    const PlanarPoint lo = project({area.lat_min, area.lon_min}, g);
    const PlanarPoint hi = project({area.lat_max, area.lon_max}, g);
    const double s = g.edge_km;
    const auto q_lo = static_cast<std::int32_t>(std::floor(lo.x / (1.5 * s))) - 1;
    const auto q_hi = static_cast<std::int32_t>(std::ceil(hi.x / (1.5 * s))) + 1;
    std::vector<CellId> out;
    for (std::int32_t q = q_lo; q <= q_hi; ++q) {
        const auto r_lo = static_cast<std::int32_t>(std::floor(lo.y / (kSqrt3 * s) - q / 2.0)) - 1;
        const auto r_hi = static_cast<std::int32_t>(std::ceil(hi.y / (kSqrt3 * s) - q / 2.0)) + 1;
        for (std::int32_t r = r_lo; r <= r_hi; ++r) {
            CellId c;
            c.q = q;
            c.r = r;
            c.resolution = g.resolution;
            if (area.contains(cell_to_centroid(c, g))) {
                out.push_back(c);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace mtm
