#pragma once

// Seeded synthetic country: admin hierarchy, population, land cover and agent
// GPS traces whose statistics follow those attributes.
//
// Draw order (part of the determinism contract):
//   world rng = Rng(derive_seed(seed, "world"))
//     1. municipality seed cells, then prefecture seeds (subset of
//        municipality seeds), then region seeds (subset of prefecture seeds)
//     2. per city: centre cell, amplitude, spread
//     3. per water blob: centre cell, radius
//     4. smooth-noise waves for built and tree cover
//   agent rng = Rng(derive_seed(seed, agent_id)) for agent ids 0..n-1

#include "mtm/geodesy.hpp"
#include "mtm/timeutil.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mtm {

struct WorldSpec {
    std::uint64_t seed = 123;
    StudyArea bbox = StudyArea::around({35.68, 139.69}, 60.0, 60.0);
    int n_regions = 4;
    int n_prefectures = 10;
    int n_municipalities = 40;
    int n_city_seeds = 6;
    int n_water_blobs = 3;
    int n_agents = 2000;
    int n_days = 28;
    Date start_date{std::chrono::year{2023}, std::chrono::month{2}, std::chrono::day{1}};
    double gravity_beta = 2.0;
    double p_travel = 0.15;
    HolidayCalendar holidays;

    void validate() const;
};

struct CellRecord {
    int municipality_id = 0;
    int prefecture_id = 0;
    int region_id = 0;
    std::int64_t population = 0;
    // Fractions are quantized to 1e-6 so that the CSV export round-trips.
    double built_frac = 0.0;
    double tree_frac = 0.0;
    double water_frac = 0.0;

    friend bool operator==(const CellRecord&, const CellRecord&) = default;
};

class SyntheticWorld {
public:
    SyntheticWorld() = default;
    SyntheticWorld(StudyArea area, GridSpec grid, std::vector<CellId> cells, std::vector<CellRecord> records,
                   int n_regions, int n_prefectures, int n_municipalities);

    const StudyArea& area() const { return area_; }
    const GridSpec& grid() const { return grid_; }
    /// Sorted by hash.
    const std::vector<CellId>& cells() const { return cells_; }
    const std::vector<CellRecord>& records() const { return records_; }
    std::size_t size() const { return cells_.size(); }

    int n_regions() const { return n_regions_; }
    int n_prefectures() const { return n_prefectures_; }
    int n_municipalities() const { return n_municipalities_; }

    bool contains(const CellId& c) const { return index_.contains(c); }
    /// Throws DomainError for cells outside the world.
    std::size_t index_of(const CellId& c) const;
    const CellRecord& at(const CellId& c) const { return records_[index_of(c)]; }
    const CellRecord* find(const CellId& c) const;

    /// Parent maps; -1 where a child id has no cell.
    const std::vector<int>& prefecture_of_municipality() const { return muni_to_pref_; }
    const std::vector<int>& region_of_prefecture() const { return pref_to_region_; }

    friend bool operator==(const SyntheticWorld& a, const SyntheticWorld& b) {
        return a.cells_ == b.cells_ && a.records_ == b.records_;
    }

private:
    StudyArea area_{};
    GridSpec grid_{};
    std::vector<CellId> cells_;
    std::vector<CellRecord> records_;
    std::unordered_map<CellId, std::size_t, CellIdHasher> index_;
    int n_regions_ = 0;
    int n_prefectures_ = 0;
    int n_municipalities_ = 0;
    std::vector<int> muni_to_pref_;
    std::vector<int> pref_to_region_;
};

SyntheticWorld build_world(const WorldSpec& spec);

struct TracePoint {
    Timestamp t = 0;
    LatLon p{};
};

struct AgentTrace {
    std::string agent_id;
    std::vector<TracePoint> points;
};

std::string agent_token(int agent_index);

/// Emits one trace per agent in id order.
void simulate_traces(const SyntheticWorld& world, const WorldSpec& spec,
                     const std::function<void(const AgentTrace&)>& sink);
std::vector<AgentTrace> simulate_traces(const SyntheticWorld& world, const WorldSpec& spec);

/// Home cell of an agent as drawn by the simulator (first draw of its rng).
CellId agent_home(const SyntheticWorld& world, const WorldSpec& spec, int agent_index);

/// Ground-truth CSV: cell_hash,lat,lon,region_id,prefecture_id,
/// municipality_id,population,built_frac,tree_frac,water_frac; sorted by hash.
void write_ground_truth(const SyntheticWorld& world, const std::string& path);
SyntheticWorld read_ground_truth(const std::string& path, const StudyArea& area);

/// Traces CSV: agent_id,timestamp_iso8601,lat,lon.
class TraceWriter {
public:
    explicit TraceWriter(const std::string& path);
    void write(const AgentTrace& trace);

private:
    std::ofstream out_;
};

std::vector<AgentTrace> read_traces(const std::string& path);

}  // namespace mtm
