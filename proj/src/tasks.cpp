#include "mtm/tasks.hpp"

#include "mtm/csv.hpp"
#include "mtm/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

namespace mtm {

const std::vector<std::string>& default_tasks() {
    static const std::vector<std::string> names = {
        "centroid",      "population",  "region",    "prefecture",        "municipality",  "built",
        "tree",          "geo_diversity", "trip_length", "travel_prefecture", "travel_region", "greenery"};
    return names;
}

const std::vector<std::string>& all_tasks() {
    static const std::vector<std::string> names = [] {
        auto v = default_tasks();
        v.push_back("water");
        return v;
    }();
    return names;
}

TaskSpec task_spec(std::string_view name, const SyntheticWorld& world) {
    const std::string n(name);
    const auto region = [&](HeadSpec h) { return TaskSpec{n, TaskInput::region, h}; };
    const auto traj = [&](HeadSpec h) { return TaskSpec{n, TaskInput::trajectory, h}; };
    if (name == "centroid") {
        return region(HeadSpec::regression(2));
    }
    if (name == "population") {
        return region(HeadSpec::classification(10));
    }
    if (name == "region") {
        return region(HeadSpec::classification(world.n_regions()));
    }
    if (name == "prefecture") {
        return region(HeadSpec::classification(world.n_prefectures()));
    }
    if (name == "municipality") {
        return region(HeadSpec::classification(world.n_municipalities()));
    }
    if (name == "built" || name == "tree" || name == "water") {
        return region(HeadSpec::regression(1));
    }
    if (name == "geo_diversity" || name == "trip_length" || name == "greenery") {
        return traj(HeadSpec::regression(1));
    }
    if (name == "travel_prefecture" || name == "travel_region") {
        return traj(HeadSpec::classification(2));
    }
    throw ConfigError("unknown task '" + n + "'");
}

std::pair<double, double> label_centroid(const CellId& cell, const SyntheticWorld& world) {
    world.index_of(cell);
    return relative_coords(cell_to_centroid(cell, world.grid()), world.area());
}

std::vector<int> label_population_decile(std::span<const CellId> cells, const SyntheticWorld& world) {
    const std::size_t n = cells.size();
    if (n < 10) {
        throw ConfigError("population deciles need at least 10 cells, got " + std::to_string(n));
    }
    std::vector<std::size_t> order(n);
    std::vector<std::int64_t> pop(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
        pop[i] = world.at(cells[i]).population;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pop[a] != pop[b]) {
            return pop[a] < pop[b];
        }
        return cells[a] < cells[b];
    });
    std::vector<int> labels(n);
    for (std::size_t rank = 0; rank < n; ++rank) {
        labels[order[rank]] = static_cast<int>(rank * 10 / n);
    }
    return labels;
}

int label_admin(const CellId& cell, const SyntheticWorld& world, AdminLevel level) {
    const CellRecord* rec = world.find(cell);
    if (!rec) {
        throw DomainError("cell " + cell.hash() + " has no ground-truth label");
    }
    switch (level) {
        case AdminLevel::region:
            return rec->region_id;
        case AdminLevel::prefecture:
            return rec->prefecture_id;
        case AdminLevel::municipality:
            break;
    }
    return rec->municipality_id;
}

double label_landcover(const CellId& cell, const SyntheticWorld& world, LandCover kind) {
    const CellRecord& rec = world.at(cell);
    switch (kind) {
        case LandCover::built:
            return rec.built_frac;
        case LandCover::tree:
            return rec.tree_frac;
        case LandCover::water:
            break;
    }
    return rec.water_frac;
}

namespace {

std::vector<CellId> cells_of(const Trajectory& t) {
    std::vector<CellId> out;
    out.reserve(t.size());
    for (const auto& h : t.hashes) {
        out.push_back(CellId::from_hash(h));
    }
    return out;
}

}  // namespace

int traj_geo_diversity(const Trajectory& traj, const SyntheticWorld& world) {
    std::set<int> prefs;
    for (const CellId& c : cells_of(traj)) {
        prefs.insert(label_admin(c, world, AdminLevel::prefecture));
    }
    return static_cast<int>(prefs.size());
}

double traj_trip_length(const Trajectory& traj, const GridSpec& grid) {
    if (traj.size() < 2) {
        throw DomainError("trip length needs at least 2 check-ins");
    }
    const std::vector<CellId> cells = cells_of(traj);
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
        if (cells[i] != cells[i + 1]) {
            sum += haversine_km(cell_to_centroid(cells[i], grid), cell_to_centroid(cells[i + 1], grid));
        }
    }
    return sum / static_cast<double>(cells.size() - 1);
}

bool traj_travel(const Trajectory& traj, const SyntheticWorld& world, const HolidayCalendar& calendar,
                 AdminLevel level, TravelRule rule) {
    if (traj.times.size() != traj.hashes.size()) {
        throw ContractViolation("trajectory times and hashes differ in length");
    }
    const std::vector<CellId> cells = cells_of(traj);
    std::vector<int> units;
    units.reserve(cells.size());
    for (const CellId& c : cells) {
        units.push_back(label_admin(c, world, level));
    }
    if (rule == TravelRule::crossing) {
        for (std::size_t i = 0; i + 1 < units.size(); ++i) {
            if (units[i] != units[i + 1] && calendar.is_rest_day(traj.times[i + 1])) {
                return true;
            }
        }
        return false;
    }
    std::map<int, std::size_t> freq;
    for (int u : units) {
        ++freq[u];
    }
    int home = 0;
    std::size_t best = 0;
    for (const auto& [u, f] : freq) {
        if (f > best) {
            best = f;
            home = u;
        }
    }
    for (std::size_t i = 0; i < units.size(); ++i) {
        if (units[i] != home && calendar.is_rest_day(traj.times[i])) {
            return true;
        }
    }
    return false;
}

double traj_greenery(const Trajectory& traj, const SyntheticWorld& world, GreeneryWeighting weighting) {
    std::vector<CellId> cells = cells_of(traj);
    if (cells.empty()) {
        throw DomainError("greenery of an empty trajectory");
    }
    if (weighting == GreeneryWeighting::unique_cells) {
        std::sort(cells.begin(), cells.end());
        cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    }
    double sum = 0.0;
    for (const CellId& c : cells) {
        sum += world.at(c).tree_frac;
    }
    return sum / static_cast<double>(cells.size());
}

LabelTable region_labels(const TaskSpec& task, std::span<const CellId> cells, const SyntheticWorld& world) {
    if (task.input != TaskInput::region) {
        throw ContractViolation("task " + task.name + " does not take regions");
    }
    LabelTable t{task, {}, {}, {}};
    for (const CellId& c : cells) {
        t.ids.push_back(c.hash());
    }
    if (task.name == "population") {
        t.classes = label_population_decile(cells, world);
        return t;
    }
    for (const CellId& c : cells) {
        if (task.name == "centroid") {
            const auto [dlat, dlon] = label_centroid(c, world);
            t.values.push_back(dlat);
            t.values.push_back(dlon);
        } else if (task.name == "region") {
            t.classes.push_back(label_admin(c, world, AdminLevel::region));
        } else if (task.name == "prefecture") {
            t.classes.push_back(label_admin(c, world, AdminLevel::prefecture));
        } else if (task.name == "municipality") {
            t.classes.push_back(label_admin(c, world, AdminLevel::municipality));
        } else if (task.name == "built") {
            t.values.push_back(label_landcover(c, world, LandCover::built));
        } else if (task.name == "tree") {
            t.values.push_back(label_landcover(c, world, LandCover::tree));
        } else if (task.name == "water") {
            t.values.push_back(label_landcover(c, world, LandCover::water));
        } else {
            throw ConfigError("no region label builder for task " + task.name);
        }
    }
    return t;
}

LabelTable trajectory_labels(const TaskSpec& task, std::span<const Trajectory> trajs, const SyntheticWorld& world,
                             const HolidayCalendar& calendar) {
    if (task.input != TaskInput::trajectory) {
        throw ContractViolation("task " + task.name + " does not take trajectories");
    }
    LabelTable t{task, {}, {}, {}};
    for (const Trajectory& tr : trajs) {
        t.ids.push_back(tr.traj_id);
        if (task.name == "geo_diversity") {
            t.values.push_back(traj_geo_diversity(tr, world));
        } else if (task.name == "trip_length") {
            t.values.push_back(traj_trip_length(tr, world.grid()));
        } else if (task.name == "greenery") {
            t.values.push_back(traj_greenery(tr, world));
        } else if (task.name == "travel_prefecture") {
            t.classes.push_back(traj_travel(tr, world, calendar, AdminLevel::prefecture) ? 1 : 0);
        } else if (task.name == "travel_region") {
            t.classes.push_back(traj_travel(tr, world, calendar, AdminLevel::region) ? 1 : 0);
        } else {
            throw ConfigError("no trajectory label builder for task " + task.name);
        }
    }
    return t;
}

void write_label_table(const LabelTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write label table " + path);
    }
    const int dim = table.task.output.dim;
    const bool cls = table.task.output.kind == HeadKind::classification;
    out << "sample_id";
    if (cls || dim == 1) {
        out << ",label";
    } else {
        for (int j = 0; j < dim; ++j) {
            out << ",label_" << j;
        }
    }
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < table.size(); ++i) {
        out << table.ids[i];
        if (cls) {
            out << ',' << table.classes[i];
        } else {
            for (int j = 0; j < dim; ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", table.values[i * static_cast<std::size_t>(dim) +
                                                                      static_cast<std::size_t>(j)]);
                out << ',' << buf;
            }
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed writing label table " + path);
    }
}

LabelTable read_label_table(const TaskSpec& task, const std::string& path) {
    CsvReader reader(path);
    std::vector<std::string_view> f;
    const bool cls = task.output.kind == HeadKind::classification;
    const std::size_t width = 1 + (cls ? 1 : static_cast<std::size_t>(task.output.dim));
    if (!reader.next(f) || f.size() != width || f[0] != "sample_id") {
        throw ParseError(path + ": label table header does not match task " + task.name);
    }
    LabelTable t{task, {}, {}, {}};
    while (reader.next(f)) {
        if (f.size() != width) {
            throw ParseError(reader.where() + ": wrong number of columns");
        }
        t.ids.emplace_back(f[0]);
        if (cls) {
            t.classes.push_back(parse_int(f[1], reader.where()));
        } else {
            for (std::size_t j = 1; j < width; ++j) {
                t.values.push_back(parse_double(f[j], reader.where()));
            }
        }
    }
    return t;
}

}  // namespace mtm
