#include "mtm/choropleth.hpp"

#include "mtm/csv.hpp"
#include "mtm/errors.hpp"

#include <json.hpp>

namespace mtm {

using nlohmann::ordered_json;

std::string choropleth_geojson(const std::map<CellId, double>& values, const GridSpec& grid,
                               const ChoroplethStyle& style) {
    ordered_json fc;
    fc["type"] = "FeatureCollection";
    fc["properties"] = {{"layer", style.layer}, {"task", style.task}, {"palette", style.palette}};
    ordered_json features = ordered_json::array();
    for (const auto& [cell, value] : values) {
        ordered_json ring = ordered_json::array();
        for (const LatLon& p : cell_boundary(cell, grid)) {
            ring.push_back({p.lon, p.lat});
        }
        ordered_json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Polygon"}, {"coordinates", ordered_json::array({ring})}};
        f["properties"] = {{"cell_hash", cell.hash()}, {"value", value}};
        features.push_back(std::move(f));
    }
    fc["features"] = std::move(features);
    return fc.dump(1) + "\n";
}

void export_choropleth(const std::map<CellId, double>& values, const GridSpec& grid, const std::string& path,
                       const ChoroplethStyle& style) {
    write_file(path, choropleth_geojson(values, grid, style));
}

std::map<CellId, double> import_choropleth(const std::string& path) {
    std::map<CellId, double> out;
    try {
        const auto doc = nlohmann::json::parse(read_file(path));
        if (doc.at("type") != "FeatureCollection") {
            throw ParseError(path + ": not a FeatureCollection");
        }
        for (const auto& f : doc.at("features")) {
            const auto& props = f.at("properties");
            const CellId c = CellId::from_hash(props.at("cell_hash").get<std::string>());
            out[c] = props.at("value").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return out;
}

}  // namespace mtm
