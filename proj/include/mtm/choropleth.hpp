#pragma once

// GeoJSON FeatureCollection of hexagon polygons carrying one value per cell.

#include "mtm/geodesy.hpp"

#include <map>
#include <string>

namespace mtm {

struct ChoroplethStyle {
    std::string layer;   // e.g. "truth" or "prediction"
    std::string task;
    std::string palette = "viridis";
};

/// Features sorted by hash; each polygon is the closed 7-point ring of the
/// cell. Properties: cell_hash, value.
std::string choropleth_geojson(const std::map<CellId, double>& values, const GridSpec& grid,
                               const ChoroplethStyle& style = {});
void export_choropleth(const std::map<CellId, double>& values, const GridSpec& grid, const std::string& path,
                       const ChoroplethStyle& style = {});

/// Reads back the (cell, value) pairs. ParseError on malformed input.
std::map<CellId, double> import_choropleth(const std::string& path);

}  // namespace mtm
