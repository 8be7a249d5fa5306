#pragma once

#include "mtm/pipeline.hpp"
#include "mtm/worldgen.hpp"

#include <filesystem>
#include <string>

namespace mtm::test {

/// About 500 cells, 6 prefectures; small enough for brute-force oracles.
inline WorldSpec small_spec() {
    WorldSpec s;
    s.bbox = StudyArea::around({35.68, 139.69}, 20.0, 20.0);
    s.n_regions = 3;
    s.n_prefectures = 6;
    s.n_municipalities = 12;
    s.n_city_seeds = 3;
    s.n_water_blobs = 2;
    s.n_agents = 120;
    s.n_days = 28;
    s.holidays.add(parse_date("2023-02-11"));
    s.holidays.add(parse_date("2023-02-23"));
    return s;
}

inline const SyntheticWorld& small_world() {
    static const SyntheticWorld w = build_world(small_spec());
    return w;
}

inline const std::vector<Trajectory>& small_corpus() {
    static const std::vector<Trajectory> c = [] {
        const WorldSpec spec = small_spec();
        const auto traces = simulate_traces(small_world(), spec);
        const auto points = points_from_traces(traces);
        return filter_trajectories(checkins_to_trajectories(points_to_checkins(points, small_world().grid()), 7));
    }();
    return c;
}

inline std::string temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("mtm_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

}  // namespace mtm::test
