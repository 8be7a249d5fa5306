#pragma once

// Hexagonal spatial indexing over a study area.
//
// Cells are flat-top hexagons in axial (q, r) coordinates laid over a local
// equirectangular projection centred on the study-area reference point:
//
//     x = R * cos(lat_ref) * dlon_rad,   y = R * dlat_rad        (km)
//     centre(q, r) = (1.5 * s * q,  sqrt(3) * s * (r + q / 2))
//
// where s is the hexagon edge (= circumradius). Cell identities are rendered
// as 15-character hashes shaped like H3 indexes:
//
//     '8' | resolution (1 hex digit) | q + 0x800000 (6) | r + 0x800000 (6) | 'f'

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mtm {

inline constexpr double kEarthRadiusKm = 6371.0088;

/// Nominal cell area at the default resolution, km^2.
inline constexpr double kDefaultCellAreaKm2 = 0.74;

/// Edge of a regular hexagon with area A: A = (3 * sqrt(3) / 2) * s^2.
double hex_edge_for_area(double area_km2);

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const LatLon&, const LatLon&) = default;
};

/// Throws DomainError unless both fields are finite and in range.
void validate(const LatLon& p);

struct StudyArea {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;

    StudyArea() = default;
    StudyArea(double lat_min_, double lat_max_, double lon_min_, double lon_max_);

    LatLon ref_point() const { return {(lat_min + lat_max) / 2.0, (lon_min + lon_max) / 2.0}; }
    bool contains(const LatLon& p) const {
        return p.lat >= lat_min && p.lat <= lat_max && p.lon >= lon_min && p.lon <= lon_max;
    }

    /// Square-ish box of the given side (km) around a centre point.
    static StudyArea around(const LatLon& centre, double width_km, double height_km);
};

struct GridSpec {
    int resolution = 8;
    double edge_km = hex_edge_for_area(kDefaultCellAreaKm2);
    LatLon ref_point{};
    double earth_radius_km = kEarthRadiusKm;

    GridSpec() = default;
    explicit GridSpec(const LatLon& ref, int res = 8, double edge = hex_edge_for_area(kDefaultCellAreaKm2));
    explicit GridSpec(const StudyArea& area) : GridSpec(area.ref_point()) {}

    void validate() const;
};

struct CellId {
    std::int32_t q = 0;
    std::int32_t r = 0;
    int resolution = 8;

    friend bool operator==(const CellId&, const CellId&) = default;
    /// Same order as the hash strings.
    friend std::strong_ordering operator<=>(const CellId& a, const CellId& b) {
        if (auto c = a.resolution <=> b.resolution; c != 0) {
            return c;
        }
        if (auto c = a.q <=> b.q; c != 0) {
            return c;
        }
        return a.r <=> b.r;
    }

    std::string hash() const;
    static CellId from_hash(std::string_view hash);
};

struct CellIdHasher {
    std::size_t operator()(const CellId& c) const noexcept {
        return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.q)) << 32) ^
                                          static_cast<std::uint32_t>(c.r) ^
                                          (static_cast<std::uint64_t>(c.resolution) << 58));
    }
};

inline constexpr std::int32_t kAxialOffset = 0x800000;

/// Planar point in the local projection, km.
struct PlanarPoint {
    double x = 0.0;
    double y = 0.0;
};

PlanarPoint project(const LatLon& p, const GridSpec& g);
LatLon unproject(const PlanarPoint& p, const GridSpec& g);

/// Centre of an axial cell in the projected plane.
PlanarPoint cell_center_planar(const CellId& c, const GridSpec& g);

/// Cube rounding of fractional axial coordinates.
std::pair<std::int32_t, std::int32_t> cube_round(double q, double r);

CellId latlon_to_cell(const LatLon& p, const GridSpec& g);
LatLon cell_to_centroid(const CellId& c, const GridSpec& g);

/// Six hexagon vertices, counter-clockwise from angle 0 in the projected
/// plane.
std::array<PlanarPoint, 6> cell_vertices_planar(const CellId& c, const GridSpec& g);

/// Exterior ring as lon/lat: six vertices plus the closing repeat of the first.
std::array<LatLon, 7> cell_boundary(const CellId& c, const GridSpec& g);

/// True when the projected point lies inside (or on) the hexagon of c.
bool hex_contains(const CellId& c, const PlanarPoint& p, const GridSpec& g, double scale = 1.0);

/// Great-circle distance on a sphere of radius kEarthRadiusKm.
double haversine_km(const LatLon& a, const LatLon& b);

/// (p.lat - ref.lat, p.lon - ref.lon) in degrees.
std::pair<double, double> relative_coords(const LatLon& p, const StudyArea& area);

/// Every cell whose centroid lies inside the study area, sorted by hash.
std::vector<CellId> cells_in_area(const StudyArea& area, const GridSpec& g);

}  // namespace mtm
