#include "mtm/errors.hpp"
#include "mtm/geodesy.hpp"
#include "mtm/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace mtm;

TEST_CASE("haversine matches the equatorial arc of one degree") {
    const double d = haversine_km({0.0, 0.0}, {0.0, 1.0});
    CHECK(std::fabs(d - 111.1951) / 111.1951 < 1e-6);
    // Exact arc on the same sphere.
    CHECK(d == doctest::Approx(kEarthRadiusKm * std::numbers::pi / 180.0).epsilon(1e-12));
    CHECK(haversine_km({35.0, 139.0}, {35.0, 139.0}) == 0.0);
    CHECK(haversine_km({10.0, 20.0}, {-5.0, 40.0}) == doctest::Approx(haversine_km({-5.0, 40.0}, {10.0, 20.0})));
}

TEST_CASE("hexagon edge reproduces the nominal cell area") {
    const double s = hex_edge_for_area(0.74);
    CHECK(1.5 * std::sqrt(3.0) * s * s == doctest::Approx(0.74).epsilon(1e-14));
    CHECK_THROWS_AS(hex_edge_for_area(0.0), DomainError);
}

TEST_CASE("coordinate validation") {
    CHECK_THROWS_AS(validate(LatLon{91.0, 0.0}), DomainError);
    CHECK_THROWS_AS(validate(LatLon{0.0, 181.0}), DomainError);
    CHECK_THROWS_AS(validate(LatLon{std::nan(""), 0.0}), DomainError);
    CHECK_NOTHROW(validate(LatLon{-90.0, 180.0}));
}

TEST_CASE("cell hashes round-trip and keep their shape") {
    for (const CellId c : {CellId{0, 0, 8}, CellId{-5, 17, 8}, CellId{123, -456, 8}, CellId{-0x7fffff, 0x7fffff, 8}}) {
        const std::string h = c.hash();
        CHECK(h.size() == 15);
        CHECK(h.front() == '8');
        CHECK(h.back() == 'f');
        CHECK(CellId::from_hash(h) == c);
    }
    CHECK(CellId{0, 0, 8}.hash() == "88800000800000f");
    CHECK_THROWS_AS(CellId::from_hash("88800000800000"), ParseError);
    CHECK_THROWS_AS(CellId::from_hash("98800000800000f"), ParseError);
    CHECK_THROWS_AS(CellId::from_hash("888000008000g0f"), ParseError);
}

TEST_CASE("hash order equals cell order") {
    Rng rng(5);
    std::vector<CellId> cells;
    for (int i = 0; i < 200; ++i) {
        cells.push_back({static_cast<std::int32_t>(rng.integer(-300, 300)),
                         static_cast<std::int32_t>(rng.integer(-300, 300)), 8});
    }
    for (std::size_t i = 1; i < cells.size(); ++i) {
        CHECK((cells[i - 1] < cells[i]) == (cells[i - 1].hash() < cells[i].hash()));
    }
}

TEST_CASE("point containment: every point lies in the hexagon of its cell") {
    const GridSpec g(LatLon{35.68, 139.69});
    Rng rng(11);
    for (int i = 0; i < 5000; ++i) {
        const LatLon p{35.68 + rng.uniform(-0.2, 0.2), 139.69 + rng.uniform(-0.2, 0.2)};
        const CellId c = latlon_to_cell(p, g);
        CHECK(hex_contains(c, project(p, g), g, 1.0 + 1e-9));
        // The centroid maps back to the same cell.
        CHECK(latlon_to_cell(cell_to_centroid(c, g), g) == c);
    }
}

TEST_CASE("neighbouring centres are sqrt(3) edges apart") {
    const GridSpec g(LatLon{35.68, 139.69});
    const PlanarPoint a = cell_center_planar({3, 4, 8}, g);
    for (const auto& [dq, dr] : {std::pair{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}}) {
        const PlanarPoint b = cell_center_planar({3 + dq, 4 + dr, 8}, g);
        CHECK(std::hypot(a.x - b.x, a.y - b.y) == doctest::Approx(std::sqrt(3.0) * g.edge_km).epsilon(1e-12));
    }
}

TEST_CASE("cell boundary is a closed ring of six vertices at edge distance") {
    const GridSpec g(LatLon{35.68, 139.69});
    const CellId c{-7, 2, 8};
    const auto ring = cell_boundary(c, g);
    CHECK(ring.front() == ring.back());
    const PlanarPoint centre = cell_center_planar(c, g);
    for (const PlanarPoint& v : cell_vertices_planar(c, g)) {
        CHECK(std::hypot(v.x - centre.x, v.y - centre.y) == doctest::Approx(g.edge_km).epsilon(1e-12));
    }
}

TEST_CASE("projection round-trips") {
    const GridSpec g(LatLon{35.68, 139.69});
    const LatLon p{35.71, 139.62};
    const LatLon q = unproject(project(p, g), g);
    CHECK(q.lat == doctest::Approx(p.lat).epsilon(1e-12));
    CHECK(q.lon == doctest::Approx(p.lon).epsilon(1e-12));
}

TEST_CASE("cells in an area are unique, sorted and have centroids inside") {
    const StudyArea area = StudyArea::around({35.68, 139.69}, 10.0, 10.0);
    const GridSpec g(area);
    const auto cells = cells_in_area(area, g);
    CHECK(cells.size() > 100);
    // Roughly area / cell area.
    CHECK(static_cast<double>(cells.size()) == doctest::Approx(100.0 / 0.74).epsilon(0.1));
    std::set<std::string> hashes;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(area.contains(cell_to_centroid(cells[i], g)));
        hashes.insert(cells[i].hash());
        if (i > 0) {
            CHECK(cells[i - 1].hash() < cells[i].hash());
        }
    }
    CHECK(hashes.size() == cells.size());
}

TEST_CASE("relative coordinates are offsets from the area centre") {
    const StudyArea area(35.0, 36.0, 139.0, 140.0);
    const auto [dlat, dlon] = relative_coords({35.75, 139.25}, area);
    CHECK(dlat == doctest::Approx(0.25));
    CHECK(dlon == doctest::Approx(-0.25));
}
