#include "mtm/worldgen.hpp"

#include "mtm/csv.hpp"
#include "mtm/errors.hpp"
#include "mtm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>

namespace mtm {

namespace {

constexpr std::int64_t kMicro = 1'000'000;

// Sum of random plane waves mapped into [0, 1].
class SmoothField {
public:
    SmoothField(Rng& rng, int n_waves, double min_wavelength_km, double max_wavelength_km) {
        for (int i = 0; i < n_waves; ++i) {
            Wave w;
            w.wavelength = rng.uniform(min_wavelength_km, max_wavelength_km);
            w.angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
            w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            waves_.push_back(w);
        }
    }

    double operator()(const PlanarPoint& p) const {
        double sum = 0.0;
        for (const Wave& w : waves_) {
            sum += std::sin(2.0 * std::numbers::pi * (p.x * std::cos(w.angle) + p.y * std::sin(w.angle)) /
                                w.wavelength +
                            w.phase);
        }
        return 0.5 + 0.5 * sum / static_cast<double>(waves_.size());
    }

private:
    struct Wave {
        double wavelength = 1.0;
        double angle = 0.0;
        double phase = 0.0;
    };
    std::vector<Wave> waves_;
};

std::size_t nearest(const LatLon& p, const std::vector<LatLon>& seeds) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const double d = haversine_km(p, seeds[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

void WorldSpec::validate() const {
    if (n_regions < 1 || n_prefectures < 1 || n_municipalities < 1 || n_city_seeds < 1 || n_agents < 0 ||
        n_days < 0 || n_water_blobs < 0) {
        throw ConfigError("world counts must be >= 1");
    }
    if (!(n_regions <= n_prefectures && n_prefectures <= n_municipalities)) {
        throw ConfigError("world counts must satisfy n_regions <= n_prefectures <= n_municipalities");
    }
    if (!(p_travel >= 0.0 && p_travel <= 1.0)) {
        throw ConfigError("p_travel must be a probability");
    }
    if (!std::isfinite(gravity_beta) || gravity_beta < 0.0) {
        throw ConfigError("gravity_beta must be finite and non-negative");
    }
    if (!start_date.ok()) {
        throw ConfigError("invalid start date");
    }
}

SyntheticWorld::SyntheticWorld(StudyArea area, GridSpec grid, std::vector<CellId> cells,
                               std::vector<CellRecord> records, int n_regions, int n_prefectures,
                               int n_municipalities)
    : area_(area),
      grid_(grid),
      cells_(std::move(cells)),
      records_(std::move(records)),
      n_regions_(n_regions),
      n_prefectures_(n_prefectures),
      n_municipalities_(n_municipalities) {
    if (cells_.size() != records_.size()) {
        throw ContractViolation("world cell and record tables differ in length");
    }
    if (!std::is_sorted(cells_.begin(), cells_.end())) {
        throw ContractViolation("world cells must be sorted by hash");
    }
    index_.reserve(cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        index_.emplace(cells_[i], i);
    }
    muni_to_pref_.assign(static_cast<std::size_t>(n_municipalities_), -1);
    pref_to_region_.assign(static_cast<std::size_t>(n_prefectures_), -1);
    for (const CellRecord& rec : records_) {
        if (rec.municipality_id < 0 || rec.municipality_id >= n_municipalities_ || rec.prefecture_id < 0 ||
            rec.prefecture_id >= n_prefectures_ || rec.region_id < 0 || rec.region_id >= n_regions_) {
            throw ContractViolation("admin id out of range");
        }
        int& pref = muni_to_pref_[static_cast<std::size_t>(rec.municipality_id)];
        int& region = pref_to_region_[static_cast<std::size_t>(rec.prefecture_id)];
        if ((pref != -1 && pref != rec.prefecture_id) || (region != -1 && region != rec.region_id)) {
            throw ContractViolation("admin hierarchy does not nest");
        }
        pref = rec.prefecture_id;
        region = rec.region_id;
    }
}

std::size_t SyntheticWorld::index_of(const CellId& c) const {
    const auto it = index_.find(c);
    if (it == index_.end()) {
        throw DomainError("cell " + c.hash() + " is not part of the world");
    }
    return it->second;
}

const CellRecord* SyntheticWorld::find(const CellId& c) const {
    const auto it = index_.find(c);
    return it == index_.end() ? nullptr : &records_[it->second];
}

SyntheticWorld build_world(const WorldSpec& spec) {
    spec.validate();
    const GridSpec grid(spec.bbox);
    std::vector<CellId> cells = cells_in_area(spec.bbox, grid);
    if (cells.size() < static_cast<std::size_t>(spec.n_municipalities) ||
        cells.size() < static_cast<std::size_t>(spec.n_city_seeds)) {
        throw ConfigError("study area holds " + std::to_string(cells.size()) +
                          " cells, too few for the requested seed counts");
    }
    const std::size_t n = cells.size();
    std::vector<LatLon> centroid(n);
    std::vector<PlanarPoint> planar(n);
    for (std::size_t i = 0; i < n; ++i) {
        centroid[i] = cell_to_centroid(cells[i], grid);
        planar[i] = cell_center_planar(cells[i], grid);
    }

    Rng rng(derive_seed(spec.seed, "world"));

    // 1. Admin hierarchy by nested Voronoi assignment.
    const auto muni_seed_cells = rng.sample_without_replacement(n, static_cast<std::size_t>(spec.n_municipalities));
    const auto pref_seed_munis = rng.sample_without_replacement(muni_seed_cells.size(),
                                                                static_cast<std::size_t>(spec.n_prefectures));
    const auto region_seed_prefs =
        rng.sample_without_replacement(pref_seed_munis.size(), static_cast<std::size_t>(spec.n_regions));

    std::vector<LatLon> muni_seeds;
    for (std::size_t idx : muni_seed_cells) {
        muni_seeds.push_back(centroid[idx]);
    }
    std::vector<LatLon> pref_seeds;
    for (std::size_t m : pref_seed_munis) {
        pref_seeds.push_back(muni_seeds[m]);
    }
    std::vector<LatLon> region_seeds;
    for (std::size_t p : region_seed_prefs) {
        region_seeds.push_back(pref_seeds[p]);
    }
    std::vector<int> muni_to_pref(muni_seeds.size());
    for (std::size_t m = 0; m < muni_seeds.size(); ++m) {
        muni_to_pref[m] = static_cast<int>(nearest(muni_seeds[m], pref_seeds));
    }
    std::vector<int> pref_to_region(pref_seeds.size());
    for (std::size_t p = 0; p < pref_seeds.size(); ++p) {
        pref_to_region[p] = static_cast<int>(nearest(pref_seeds[p], region_seeds));
    }

    // 2. Cities.
    struct City {
        std::size_t cell = 0;
        double amplitude = 0.0;
        double sigma_km = 0.0;
    };
    std::vector<City> cities;
    for (int k = 0; k < spec.n_city_seeds; ++k) {
        City c;
        c.cell = static_cast<std::size_t>(rng.index(n));
        c.amplitude = std::exp(rng.uniform(std::log(1e3), std::log(1e5)));
        c.sigma_km = rng.uniform(2.0, 15.0);
        cities.push_back(c);
    }

    // 3. Water blobs.
    struct Blob {
        std::size_t cell = 0;
        double radius_km = 0.0;
    };
    std::vector<Blob> blobs;
    for (int k = 0; k < spec.n_water_blobs; ++k) {
        Blob b;
        b.cell = static_cast<std::size_t>(rng.index(n));
        b.radius_km = rng.uniform(1.5, 4.0);
        blobs.push_back(b);
    }

    // 4. Land-cover noise.
    const SmoothField built_noise(rng, 4, 8.0, 25.0);
    const SmoothField tree_noise(rng, 4, 6.0, 20.0);

    std::vector<double> pop_raw(n, 0.0);
    std::vector<std::int64_t> water_u(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double pop = 0.0;
        for (const City& c : cities) {
            const double d = haversine_km(centroid[i], centroid[c.cell]);
            pop += c.amplitude * std::exp(-d * d / (2.0 * c.sigma_km * c.sigma_km));
        }
        double wet = 0.0;
        for (const Blob& b : blobs) {
            const double d = haversine_km(centroid[i], centroid[b.cell]);
            wet = std::max(wet, std::exp(-d * d / (2.0 * b.radius_km * b.radius_km)));
        }
        const double water = clamp01((wet - 0.35) / 0.4);
        water_u[i] = std::llround(water * kMicro);
        const double dry = 1.0 - static_cast<double>(water_u[i]) / kMicro;
        pop_raw[i] = pop * dry * dry;
    }
    const double pop_max = std::max(1.0, *std::max_element(pop_raw.begin(), pop_raw.end()));

    std::vector<CellRecord> records(n);
    for (std::size_t i = 0; i < n; ++i) {
        CellRecord& rec = records[i];
        rec.municipality_id = static_cast<int>(nearest(centroid[i], muni_seeds));
        rec.prefecture_id = muni_to_pref[static_cast<std::size_t>(rec.municipality_id)];
        rec.region_id = pref_to_region[static_cast<std::size_t>(rec.prefecture_id)];
        rec.population = std::llround(pop_raw[i]);

        const double urban = std::pow(pop_raw[i] / pop_max, 0.4);
        const double b = clamp01(urban * (0.75 + 0.5 * built_noise(planar[i])));
        const double t = clamp01((1.0 - b) * (0.35 + 0.65 * tree_noise(planar[i])));
        const std::int64_t avail_u = kMicro - water_u[i];
        const auto built_u = static_cast<std::int64_t>(std::floor(static_cast<double>(avail_u) * b));
        const auto tree_u = static_cast<std::int64_t>(std::floor(static_cast<double>(avail_u - built_u) * t));
        rec.water_frac = static_cast<double>(water_u[i]) / kMicro;
        rec.built_frac = static_cast<double>(built_u) / kMicro;
        rec.tree_frac = static_cast<double>(tree_u) / kMicro;
    }
    return SyntheticWorld(spec.bbox, grid, std::move(cells), std::move(records), spec.n_regions,
                          spec.n_prefectures, spec.n_municipalities);
}

// ---------------------------------------------------------------------------
// Trace simulation

std::string agent_token(int agent_index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "u%07d", agent_index);
    return buf;
}

namespace {

constexpr double kTravelSpeedKmh = 30.0;
constexpr Timestamp kMinTravelSeconds = 300;

struct SimContext {
    const SyntheticWorld& world;
    const WorldSpec& spec;
    std::vector<LatLon> centroid;
    std::vector<double> population_cdf;

    SimContext(const SyntheticWorld& w, const WorldSpec& s) : world(w), spec(s) {
        centroid.reserve(w.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            centroid.push_back(cell_to_centroid(w.cells()[i], w.grid()));
            acc += static_cast<double>(w.records()[i].population);
            population_cdf.push_back(acc);
        }
    }

    // Gravity weights pop_j / (1 + d_ij)^beta from origin i, restricted to the
    // origin's prefecture (inside = true) or to every other prefecture.
    std::vector<double> gravity_cdf(std::size_t origin, bool inside) const {
        const int pref = world.records()[origin].prefecture_id;
        std::vector<double> cdf(world.size());
        double acc = 0.0;
        for (std::size_t j = 0; j < world.size(); ++j) {
            const CellRecord& rec = world.records()[j];
            if (j != origin && (rec.prefecture_id == pref) == inside && rec.population > 0) {
                const double d = haversine_km(centroid[origin], centroid[j]);
                acc += static_cast<double>(rec.population) / std::pow(1.0 + d, spec.gravity_beta);
            }
            cdf[j] = acc;
        }
        return cdf;
    }
};

std::size_t draw_home(const SimContext& ctx, Rng& rng) {
    const std::size_t idx = sample_cumulative(ctx.population_cdf, rng);
    if (idx < ctx.world.size()) {
        return idx;
    }
    return static_cast<std::size_t>(rng.index(ctx.world.size()));
}

LatLon point_in_cell(const SimContext& ctx, std::size_t cell, Rng& rng) {
    const GridSpec& g = ctx.world.grid();
    const CellId& c = ctx.world.cells()[cell];
    const PlanarPoint centre = cell_center_planar(c, g);
    const double s = g.edge_km;
    for (;;) {
        const PlanarPoint p{centre.x + rng.uniform(-s, s), centre.y + rng.uniform(-s, s)};
        if (!hex_contains(c, p, g, 0.95)) {
            continue;
        }
        const LatLon ll = unproject(p, g);
        if (ctx.world.area().contains(ll)) {
            return ll;
        }
    }
}

void emit_visit(const SimContext& ctx, std::size_t cell, Timestamp start, Timestamp end, Rng& rng,
                AgentTrace& trace) {
    const int n_points = static_cast<int>(rng.integer(2, 6));
    std::vector<Timestamp> times;
    for (int i = 0; i < n_points; ++i) {
        times.push_back(rng.integer(start, std::max(start, end)));
    }
    std::sort(times.begin(), times.end());
    for (Timestamp t : times) {
        if (!trace.points.empty() && t <= trace.points.back().t) {
            t = trace.points.back().t + 1;
        }
        trace.points.push_back({t, point_in_cell(ctx, cell, rng)});
    }
}

Timestamp travel_seconds(const SimContext& ctx, std::size_t a, std::size_t b) {
    const double hours = haversine_km(ctx.centroid[a], ctx.centroid[b]) / kTravelSpeedKmh;
    return std::max(kMinTravelSeconds, static_cast<Timestamp>(std::llround(hours * 3600.0)));
}

AgentTrace simulate_agent(const SimContext& ctx, int agent_index) {
    const WorldSpec& spec = ctx.spec;
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(agent_index)));
    AgentTrace trace;
    trace.agent_id = agent_token(agent_index);

    const std::size_t home = draw_home(ctx, rng);
    const std::vector<double> local_cdf = ctx.gravity_cdf(home, true);
    std::optional<std::vector<double>> away_cdf;
    const bool can_travel = ctx.world.n_prefectures() > 1;

    for (int day = 0; day < spec.n_days; ++day) {
        const Date date{std::chrono::sys_days{spec.start_date} + std::chrono::days{day}};
        const Timestamp midnight = midnight_of(date);
        const Timestamp day_end = midnight + 86399;
        const bool travel_day = spec.holidays.is_rest_day(date) && can_travel && rng.bernoulli(spec.p_travel);
        if (travel_day && !away_cdf) {
            away_cdf = ctx.gravity_cdf(home, false);
        }
        const std::vector<double>& cdf = travel_day ? *away_cdf : local_cdf;
        const int n_trips = 1 + rng.poisson(2.0);

        const Timestamp depart = midnight + rng.integer(6 * 3600 + 1800, 9 * 3600);
        const Timestamp morning_dwell = rng.integer(600, 7200);
        emit_visit(ctx, home, depart - morning_dwell, depart, rng, trace);

        Timestamp t = depart;
        std::size_t here = home;
        for (int k = 0; k < n_trips; ++k) {
            if (t > midnight + 21 * 3600) {
                break;
            }
            const std::size_t dest = sample_cumulative(cdf, rng);
            if (dest >= ctx.world.size()) {
                break;
            }
            t += travel_seconds(ctx, here, dest);
            const Timestamp dwell = rng.integer(600, 7200);
            emit_visit(ctx, dest, t, std::min(t + dwell, day_end), rng, trace);
            t += dwell;
            here = dest;
        }
        t += travel_seconds(ctx, here, home);
        const Timestamp evening_dwell = rng.integer(600, 7200);
        if (t + 60 < day_end) {
            emit_visit(ctx, home, t, std::min(t + evening_dwell, day_end), rng, trace);
        }
    }
    return trace;
}

}  // namespace

void simulate_traces(const SyntheticWorld& world, const WorldSpec& spec,
                     const std::function<void(const AgentTrace&)>& sink) {
    spec.validate();
    if (world.size() == 0) {
        throw ConfigError("cannot simulate traces on an empty world");
    }
    const SimContext ctx(world, spec);
    for (int a = 0; a < spec.n_agents; ++a) {
        sink(simulate_agent(ctx, a));
    }
}

std::vector<AgentTrace> simulate_traces(const SyntheticWorld& world, const WorldSpec& spec) {
    std::vector<AgentTrace> out;
    simulate_traces(world, spec, [&](const AgentTrace& t) { out.push_back(t); });
    return out;
}

CellId agent_home(const SyntheticWorld& world, const WorldSpec& spec, int agent_index) {
    const SimContext ctx(world, spec);
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(agent_index)));
    return world.cells()[draw_home(ctx, rng)];
}

// ---------------------------------------------------------------------------
// Files

namespace {

const char* const kGroundTruthHeader =
    "cell_hash,lat,lon,region_id,prefecture_id,municipality_id,population,built_frac,tree_frac,water_frac";

}  // namespace

void write_ground_truth(const SyntheticWorld& world, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write ground truth " + path);
    }
    out << kGroundTruthHeader << '\n';
    char buf[256];
    for (std::size_t i = 0; i < world.size(); ++i) {
        const CellId& c = world.cells()[i];
        const CellRecord& r = world.records()[i];
        const LatLon ll = cell_to_centroid(c, world.grid());
        std::snprintf(buf, sizeof(buf), "%s,%.9f,%.9f,%d,%d,%d,%lld,%.6f,%.6f,%.6f\n", c.hash().c_str(), ll.lat,
                      ll.lon, r.region_id, r.prefecture_id, r.municipality_id,
                      static_cast<long long>(r.population), r.built_frac, r.tree_frac, r.water_frac);
        out << buf;
    }
    if (!out) {
        throw IoError("failed writing ground truth " + path);
    }
}

SyntheticWorld read_ground_truth(const std::string& path, const StudyArea& area) {
    CsvReader reader(path);
    reader.expect_header(kGroundTruthHeader);
    std::vector<CellId> cells;
    std::vector<CellRecord> records;
    int n_regions = 0;
    int n_prefs = 0;
    int n_munis = 0;
    std::vector<std::string_view> f;
    GridSpec grid(area);
    bool first = true;
    while (reader.next(f)) {
        if (f.size() != 10) {
            throw ParseError(reader.where() + ": expected 10 columns");
        }
        const CellId c = CellId::from_hash(f[0]);
        if (first) {
            grid.resolution = c.resolution;
            first = false;
        }
        CellRecord r;
        r.region_id = parse_int(f[3], reader.where());
        r.prefecture_id = parse_int(f[4], reader.where());
        r.municipality_id = parse_int(f[5], reader.where());
        r.population = parse_int64(f[6], reader.where());
        r.built_frac = parse_double(f[7], reader.where());
        r.tree_frac = parse_double(f[8], reader.where());
        r.water_frac = parse_double(f[9], reader.where());
        n_regions = std::max(n_regions, r.region_id + 1);
        n_prefs = std::max(n_prefs, r.prefecture_id + 1);
        n_munis = std::max(n_munis, r.municipality_id + 1);
        cells.push_back(c);
        records.push_back(r);
    }
    return SyntheticWorld(area, grid, std::move(cells), std::move(records), n_regions, n_prefs, n_munis);
}

TraceWriter::TraceWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) {
        throw IoError("cannot write traces " + path);
    }
    out_ << "agent_id,timestamp_iso8601,lat,lon\n";
}

void TraceWriter::write(const AgentTrace& trace) {
    char buf[128];
    for (const TracePoint& p : trace.points) {
        std::snprintf(buf, sizeof(buf), ",%s,%.7f,%.7f\n", format_iso8601(p.t).c_str(), p.p.lat, p.p.lon);
        out_ << trace.agent_id << buf;
    }
    if (!out_) {
        throw IoError("failed writing traces");
    }
}

std::vector<AgentTrace> read_traces(const std::string& path) {
    CsvReader reader(path);
    reader.expect_header("agent_id,timestamp_iso8601,lat,lon");
    std::vector<AgentTrace> out;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        if (f.size() != 4) {
            throw ParseError(reader.where() + ": expected 4 columns");
        }
        if (out.empty() || out.back().agent_id != f[0]) {
            out.push_back(AgentTrace{std::string(f[0]), {}});
        }
        TracePoint p;
        p.t = parse_iso8601(f[1]);
        p.p = {parse_double(f[2], reader.where()), parse_double(f[3], reader.where())};
        validate(p.p);
        out.back().points.push_back(p);
    }
    return out;
}

}  // namespace mtm
