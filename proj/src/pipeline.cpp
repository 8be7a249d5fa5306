#include "mtm/pipeline.hpp"

#include "mtm/csv.hpp"
#include "mtm/errors.hpp"
#include "mtm/rng.hpp"
#include "mtm/worldgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace mtm {

std::vector<GpsPoint> points_from_traces(std::span<const AgentTrace> traces) {
    std::vector<GpsPoint> out;
    for (const AgentTrace& tr : traces) {
        for (const TracePoint& p : tr.points) {
            out.push_back({tr.agent_id, p.t, p.p});
        }
    }
    return out;
}

std::vector<CheckIn> points_to_checkins(std::span<const GpsPoint> points, const GridSpec& grid) {
    std::vector<CheckIn> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const GpsPoint& pt = points[i];
        if (i > 0) {
            const GpsPoint& prev = points[i - 1];
            if (pt.user < prev.user || (pt.user == prev.user && pt.t < prev.t)) {
                throw ContractViolation("GPS points must be sorted by (user, timestamp)");
            }
        }
        const CellId cell = latlon_to_cell(pt.p, grid);
        if (!out.empty()) {
            CheckIn& open = out.back();
            if (open.user == pt.user && open.cell == cell && pt.t - open.t_start <= kCheckInWindowSeconds) {
                open.t_end = pt.t;
                continue;
            }
        }
        out.push_back({pt.user, cell, pt.t, pt.t});
    }
    return out;
}

std::string trajectory_id(std::string_view user, std::string_view month, std::uint64_t salt) {
    std::uint64_t h = fnv1a64(user, splitmix64(salt));
    h = fnv1a64("\x1f", h);
    h = fnv1a64(month, h);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(splitmix64(h)));
    return buf;
}

std::vector<Trajectory> checkins_to_trajectories(std::span<const CheckIn> checkins, std::uint64_t salt) {
    std::map<std::pair<std::string, std::string>, std::vector<const CheckIn*>> groups;
    for (const CheckIn& c : checkins) {
        groups[{c.user, month_key(c.t_start)}].push_back(&c);
    }
    std::vector<Trajectory> out;
    out.reserve(groups.size());
    for (auto& [key, items] : groups) {
        std::stable_sort(items.begin(), items.end(),
                         [](const CheckIn* a, const CheckIn* b) { return a->t_start < b->t_start; });
        Trajectory t;
        t.traj_id = trajectory_id(key.first, key.second, salt);
        t.month = key.second;
        for (const CheckIn* c : items) {
            t.hashes.push_back(c->cell.hash());
            t.times.push_back(c->t_start);
        }
        out.push_back(std::move(t));
    }
    std::sort(out.begin(), out.end(), [](const Trajectory& a, const Trajectory& b) { return a.traj_id < b.traj_id; });
    return out;
}

std::size_t unique_cells(const Trajectory& t) {
    return std::unordered_set<std::string>(t.hashes.begin(), t.hashes.end()).size();
}

bool passes_filter(const Trajectory& t) { return t.size() >= kMinCheckIns && unique_cells(t) >= kMinUniqueCells; }

std::vector<Trajectory> filter_trajectories(std::vector<Trajectory> trajs) {
    std::erase_if(trajs, [](const Trajectory& t) { return !passes_filter(t); });
    return trajs;
}

SplitSet split_corpus(std::span<const Trajectory> trajs, std::uint64_t seed) {
    if (trajs.size() < 3) {
        throw ConfigError("corpus needs at least 3 trajectories to split, got " + std::to_string(trajs.size()));
    }
    std::vector<std::size_t> order(trajs.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order);
    const auto n = static_cast<double>(trajs.size());
    const auto cut1 = static_cast<std::size_t>(std::llround(0.70 * n));
    const auto cut2 = static_cast<std::size_t>(std::llround(0.85 * n));
    SplitSet s;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::string& id = trajs[order[i]].traj_id;
        (i < cut1 ? s.pretrain : i < cut2 ? s.validation : s.test).push_back(id);
    }
    return s;
}

std::vector<Trajectory> select(std::span<const Trajectory> trajs, std::span<const std::string> ids) {
    std::unordered_map<std::string_view, const Trajectory*> by_id;
    for (const Trajectory& t : trajs) {
        by_id.emplace(t.traj_id, &t);
    }
    std::vector<Trajectory> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw DomainError("trajectory " + id + " not in corpus");
        }
        out.push_back(*it->second);
    }
    return out;
}

void write_corpus(std::span<const Trajectory> trajs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write corpus " + path);
    }
    for (const Trajectory& t : trajs) {
        out << t.traj_id << '\t' << t.month << '\t';
        for (std::size_t i = 0; i < t.hashes.size(); ++i) {
            out << (i ? " " : "") << t.hashes[i];
        }
        out << '\t';
        for (std::size_t i = 0; i < t.times.size(); ++i) {
            out << (i ? " " : "") << format_iso8601(t.times[i]);
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed writing corpus " + path);
    }
}

std::vector<Trajectory> read_corpus(const std::string& path) {
    CsvReader reader(path, '\t');
    std::vector<Trajectory> out;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        if (f.size() != 4) {
            throw ParseError(reader.where() + ": expected 4 tab-separated fields");
        }
        Trajectory t;
        t.traj_id = std::string(f[0]);
        t.month = std::string(f[1]);
        for (std::string_view h : split(f[2], ' ')) {
            CellId::from_hash(h);
            t.hashes.emplace_back(h);
        }
        for (std::string_view ts : split(f[3], ' ')) {
            t.times.push_back(parse_iso8601(ts));
        }
        if (t.hashes.size() != t.times.size()) {
            throw ParseError(reader.where() + ": hashes and times differ in length");
        }
        out.push_back(std::move(t));
    }
    return out;
}

void write_split(const SplitSet& split, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write split " + path);
    }
    for (const auto& id : split.pretrain) {
        out << id << "\tpretrain\n";
    }
    for (const auto& id : split.validation) {
        out << id << "\tvalidation\n";
    }
    for (const auto& id : split.test) {
        out << id << "\ttest\n";
    }
}

SplitSet read_split(const std::string& path) {
    CsvReader reader(path, '\t');
    SplitSet s;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        if (f.size() != 2) {
            throw ParseError(reader.where() + ": expected traj_id and split name");
        }
        if (f[1] == "pretrain") {
            s.pretrain.emplace_back(f[0]);
        } else if (f[1] == "validation") {
            s.validation.emplace_back(f[0]);
        } else if (f[1] == "test") {
            s.test.emplace_back(f[0]);
        } else {
            throw ParseError(reader.where() + ": unknown split '" + std::string(f[1]) + "'");
        }
    }
    return s;
}

}  // namespace mtm
