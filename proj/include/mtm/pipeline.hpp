#pragma once

// Raw GPS points -> check-ins -> monthly trajectories -> filtered corpus ->
// pretrain/validation/test splits.

#include "mtm/geodesy.hpp"
#include "mtm/timeutil.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mtm {

struct AgentTrace;

inline constexpr Timestamp kCheckInWindowSeconds = 10 * 60;
inline constexpr std::size_t kMinCheckIns = 10;
inline constexpr std::size_t kMinUniqueCells = 3;

struct GpsPoint {
    std::string user;
    Timestamp t = 0;
    LatLon p{};
};

struct CheckIn {
    std::string user;
    CellId cell{};
    Timestamp t_start = 0;
    Timestamp t_end = 0;
};

struct Trajectory {
    std::string traj_id;
    std::string month;  // YYYY-MM
    std::vector<std::string> hashes;
    std::vector<Timestamp> times;

    std::size_t size() const { return hashes.size(); }
    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct SplitSet {
    std::vector<std::string> pretrain;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

std::vector<GpsPoint> points_from_traces(std::span<const AgentTrace> traces);

/// Clusters consecutive points of one user in one cell; a cluster closes when
/// the cell changes or a point arrives more than 10 minutes after the
/// cluster's first point. Input must be sorted by (user, t); otherwise
/// ContractViolation.
std::vector<CheckIn> points_to_checkins(std::span<const GpsPoint> points, const GridSpec& grid);

/// Groups check-ins by (user, UTC calendar month). The trajectory id is a
/// salted hash of (user, month); the user token is not carried over. Output
/// is sorted by traj_id.
std::vector<Trajectory> checkins_to_trajectories(std::span<const CheckIn> checkins, std::uint64_t salt);

std::string trajectory_id(std::string_view user, std::string_view month, std::uint64_t salt);

bool passes_filter(const Trajectory& t);
std::size_t unique_cells(const Trajectory& t);

/// Keeps trajectories with at least 10 check-ins and 3 unique cells.
std::vector<Trajectory> filter_trajectories(std::vector<Trajectory> trajs);

/// Seeded shuffle, then contiguous cut at 70% / 85%.
SplitSet split_corpus(std::span<const Trajectory> trajs, std::uint64_t seed);

/// Trajectories whose id is in `ids`, in the order of `ids`.
std::vector<Trajectory> select(std::span<const Trajectory> trajs, std::span<const std::string> ids);

/// One record per line: traj_id TAB month TAB hashes TAB times, arrays
/// space-separated (hashes are 15-char strings, times ISO-8601 UTC).
void write_corpus(std::span<const Trajectory> trajs, const std::string& path);
std::vector<Trajectory> read_corpus(const std::string& path);

/// traj_id TAB split-name, split names pretrain/validation/test.
void write_split(const SplitSet& split, const std::string& path);
SplitSet read_split(const std::string& path);

}  // namespace mtm
