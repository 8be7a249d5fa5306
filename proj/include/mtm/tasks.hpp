#pragma once

// Ground-truth labels for the downstream region and trajectory tasks.

#include "mtm/geodesy.hpp"
#include "mtm/model.hpp"
#include "mtm/pipeline.hpp"
#include "mtm/timeutil.hpp"
#include "mtm/worldgen.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mtm {

enum class TaskInput { region, trajectory };
enum class AdminLevel { region, prefecture, municipality };
enum class LandCover { built, tree, water };
/// crossing: the border crossing itself lands on a rest day.
/// presence: any rest-day check-in outside the trajectory's most frequent
/// unit (ties to the smaller id).
enum class TravelRule { crossing, presence };
enum class GreeneryWeighting { occurrence, unique_cells };

struct TaskSpec {
    std::string name;
    TaskInput input = TaskInput::region;
    HeadSpec output;
};

/// Headline roster: centroid, population, region, prefecture, municipality,
/// built, tree, geo_diversity, trip_length, travel_prefecture,
/// travel_region, greenery.
const std::vector<std::string>& default_tasks();
/// Default roster plus the water negative control.
const std::vector<std::string>& all_tasks();

/// ConfigError for an unknown name.
TaskSpec task_spec(std::string_view name, const SyntheticWorld& world);

std::pair<double, double> label_centroid(const CellId& cell, const SyntheticWorld& world);

/// Cells ranked by (population, hash) and cut into 10 equal-count bins;
/// labels follow the input order. ConfigError for fewer than 10 cells.
std::vector<int> label_population_decile(std::span<const CellId> cells, const SyntheticWorld& world);

/// DomainError for a cell outside the world.
int label_admin(const CellId& cell, const SyntheticWorld& world, AdminLevel level);
double label_landcover(const CellId& cell, const SyntheticWorld& world, LandCover kind);

int traj_geo_diversity(const Trajectory& traj, const SyntheticWorld& world);
/// Mean great-circle distance between centroids of consecutive check-ins.
/// DomainError for fewer than 2 check-ins.
double traj_trip_length(const Trajectory& traj, const GridSpec& grid);
bool traj_travel(const Trajectory& traj, const SyntheticWorld& world, const HolidayCalendar& calendar,
                 AdminLevel level, TravelRule rule = TravelRule::crossing);
double traj_greenery(const Trajectory& traj, const SyntheticWorld& world,
                     GreeneryWeighting weighting = GreeneryWeighting::occurrence);

/// Labels for a batch of samples: ids are cell hashes (region tasks) or
/// trajectory ids.
struct LabelTable {
    TaskSpec task;
    std::vector<std::string> ids;
    std::vector<int> classes;    // classification
    std::vector<double> values;  // regression, ids.size() x dim

    std::size_t size() const { return ids.size(); }
};

LabelTable region_labels(const TaskSpec& task, std::span<const CellId> cells, const SyntheticWorld& world);
LabelTable trajectory_labels(const TaskSpec& task, std::span<const Trajectory> trajs, const SyntheticWorld& world,
                             const HolidayCalendar& calendar);

/// CSV "sample_id,label" (regression with D > 1: label_0,...,label_{D-1}).
void write_label_table(const LabelTable& table, const std::string& path);
LabelTable read_label_table(const TaskSpec& task, const std::string& path);

}  // namespace mtm
