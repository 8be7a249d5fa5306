#include "mtm/checkpoint.hpp"
#include "mtm/config.hpp"
#include "mtm/errors.hpp"
#include "mtm/geodesy.hpp"
#include "mtm/metrics.hpp"
#include "mtm/pipeline.hpp"
#include "mtm/tasks.hpp"
#include "mtm/tokenizer.hpp"
#include "mtm/workflow.hpp"
#include "mtm/worldgen.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;

namespace {

mtm::GridSpec grid_at(double ref_lat, double ref_lon) { return mtm::GridSpec(mtm::LatLon{ref_lat, ref_lon}); }

mtm::Trajectory as_trajectory(const std::vector<std::string>& hashes) {
    mtm::Trajectory t;
    t.traj_id = "py";
    t.hashes = hashes;
    t.times.assign(hashes.size(), 0);
    return t;
}

py::dict encoding_dict(const mtm::Encoding& e) {
    py::dict d;
    d["ids"] = e.ids;
    d["attention_mask"] = e.attention_mask;
    d["labels"] = e.labels;
    d["hash_spans"] = e.hash_spans;
    return d;
}

py::object r2_or_none(const mtm::RegressionMetrics& r) {
    return r.r2_defined ? py::object(py::float_(r.r2)) : py::object(py::none());
}

class World {
public:
    World(const std::string& config_text, std::uint64_t seed)
        : spec_(spec_of(config_text, seed)), world_(mtm::build_world(spec_)) {}

    std::size_t size() const { return world_.size(); }
    std::vector<std::string> cells() const {
        std::vector<std::string> out;
        for (const auto& c : world_.cells()) {
            out.push_back(c.hash());
        }
        return out;
    }
    py::dict record(const std::string& hash) const {
        const mtm::CellRecord& r = world_.at(mtm::CellId::from_hash(hash));
        py::dict d;
        d["region_id"] = r.region_id;
        d["prefecture_id"] = r.prefecture_id;
        d["municipality_id"] = r.municipality_id;
        d["population"] = r.population;
        d["built_frac"] = r.built_frac;
        d["tree_frac"] = r.tree_frac;
        d["water_frac"] = r.water_frac;
        return d;
    }
    py::object region_labels(const std::string& task) const {
        const mtm::TaskSpec spec = mtm::task_spec(task, world_);
        const mtm::LabelTable t = mtm::region_labels(spec, world_.cells(), world_);
        if (spec.output.kind == mtm::HeadKind::classification) {
            return py::cast(t.classes);
        }
        return py::cast(t.values);
    }
    std::string latlon_to_cell(double lat, double lon) const {
        return mtm::latlon_to_cell({lat, lon}, world_.grid()).hash();
    }
    int n_regions() const { return world_.n_regions(); }
    int n_prefectures() const { return world_.n_prefectures(); }
    int n_municipalities() const { return world_.n_municipalities(); }

private:
    static mtm::WorldSpec spec_of(const std::string& config_text, std::uint64_t seed) {
        const mtm::Config cfg = mtm::Config::parse(config_text);
        cfg.require_known(mtm::known_config_keys());
        return mtm::world_spec_from(cfg, seed);
    }

    mtm::WorldSpec spec_;
    mtm::SyntheticWorld world_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "C++ core of the mtm package";
    py::register_exception<mtm::Error>(m, "Error", PyExc_RuntimeError);

    m.def(
        "latlon_to_cell",
        [](double lat, double lon, double ref_lat, double ref_lon) {
            return mtm::latlon_to_cell({lat, lon}, grid_at(ref_lat, ref_lon)).hash();
        },
        py::arg("lat"), py::arg("lon"), py::arg("ref_lat") = 35.68, py::arg("ref_lon") = 139.69);
    m.def(
        "cell_to_latlon",
        [](const std::string& hash, double ref_lat, double ref_lon) {
            const mtm::LatLon p = mtm::cell_to_centroid(mtm::CellId::from_hash(hash), grid_at(ref_lat, ref_lon));
            return std::pair{p.lat, p.lon};
        },
        py::arg("hash"), py::arg("ref_lat") = 35.68, py::arg("ref_lon") = 139.69);
    m.def(
        "cell_boundary",
        [](const std::string& hash, double ref_lat, double ref_lon) {
            std::vector<std::pair<double, double>> ring;
            for (const auto& p : mtm::cell_boundary(mtm::CellId::from_hash(hash), grid_at(ref_lat, ref_lon))) {
                ring.emplace_back(p.lon, p.lat);
            }
            return ring;
        },
        py::arg("hash"), py::arg("ref_lat") = 35.68, py::arg("ref_lon") = 139.69,
        "Closed (lon, lat) ring of the hexagon.");
    m.def(
        "haversine_km",
        [](double lat1, double lon1, double lat2, double lon2) {
            return mtm::haversine_km({lat1, lon1}, {lat2, lon2});
        },
        py::arg("lat1"), py::arg("lon1"), py::arg("lat2"), py::arg("lon2"));

    py::class_<mtm::Vocab>(m, "Vocab")
        .def(py::init<>())
        .def_static("load", &mtm::Vocab::load, py::arg("path"))
        .def("save", &mtm::Vocab::save, py::arg("path"))
        .def("__len__", &mtm::Vocab::size)
        .def_property_readonly("tokens", &mtm::Vocab::tokens)
        .def("id", &mtm::Vocab::id, py::arg("token"))
        .def("encode_hash", [](const mtm::Vocab& v, const std::string& h) { return mtm::encode_hash(h, v); })
        .def("decode", [](const mtm::Vocab& v, const std::vector<int>& ids) { return mtm::decode_pieces(ids, v); })
        .def_property_readonly("content_hash", &mtm::Vocab::content_hash);

    m.def(
        "train_vocab",
        [](const std::vector<std::string>& hashes, std::size_t size) { return mtm::train_vocab(hashes, size); },
        py::arg("hashes"), py::arg("size"));
    m.def(
        "encode_trajectory",
        [](const std::vector<std::string>& hashes, const mtm::Vocab& v, std::size_t max_len) {
            return encoding_dict(mtm::encode_trajectory(as_trajectory(hashes), v, max_len));
        },
        py::arg("hashes"), py::arg("vocab"), py::arg("max_len") = mtm::kMaxSeqLen);
    m.def(
        "mask_trajectory",
        [](const std::vector<std::string>& hashes, const mtm::Vocab& v, std::uint64_t seed, double ratio,
           std::size_t max_len) {
            mtm::MaskingOptions opts;
            opts.ratio = ratio;
            return encoding_dict(mtm::mask_whole_hash(mtm::encode_trajectory(as_trajectory(hashes), v, max_len), seed,
                                                      opts, v.size()));
        },
        py::arg("hashes"), py::arg("vocab"), py::arg("seed"), py::arg("ratio") = 0.2,
        py::arg("max_len") = mtm::kMaxSeqLen);
    m.def("masked_hash_count", &mtm::masked_hash_count, py::arg("n_hashes"), py::arg("ratio") = 0.2);

    m.def("perplexity", &mtm::perplexity, py::arg("mean_ce"));
    m.def(
        "classification_metrics",
        [](const std::vector<int>& preds, const std::vector<int>& labels) {
            const auto c = mtm::classification_metrics(preds, labels);
            py::dict d;
            d["n"] = c.n;
            d["accuracy"] = c.accuracy;
            d["precision"] = c.precision;
            d["recall"] = c.recall;
            d["f1"] = c.f1;
            return d;
        },
        py::arg("preds"), py::arg("labels"));
    m.def(
        "regression_metrics",
        [](const std::vector<double>& preds, const std::vector<double>& targets, std::size_t dim) {
            const auto r = mtm::regression_metrics(preds, targets, dim);
            py::dict d;
            d["n"] = r.n;
            d["mae"] = r.mae;
            d["rmse"] = r.rmse;
            d["mape"] = r.mape;
            d["r2"] = r2_or_none(r);
            return d;
        },
        py::arg("preds"), py::arg("targets"), py::arg("dim") = 1);

    py::class_<World>(m, "World")
        .def(py::init<const std::string&, std::uint64_t>(), py::arg("config_text") = "", py::arg("seed") = 123)
        .def("__len__", &World::size)
        .def("cells", &World::cells)
        .def("record", &World::record, py::arg("hash"))
        .def("region_labels", &World::region_labels, py::arg("task"))
        .def("latlon_to_cell", &World::latlon_to_cell, py::arg("lat"), py::arg("lon"))
        .def_property_readonly("n_regions", &World::n_regions)
        .def_property_readonly("n_prefectures", &World::n_prefectures)
        .def_property_readonly("n_municipalities", &World::n_municipalities);

    m.def("command_names", &mtm::command_names);
    m.def("default_config_text", &mtm::default_config_text);
    m.def(
        "run_command",
        [](const std::string& command, const std::string& out_dir, const std::string& config_text,
           std::optional<std::uint64_t> seed, const std::string& task, const std::string& mode,
           const std::string& preset) {
            mtm::RunSettings s;
            s.config = mtm::Config::parse(config_text);
            s.seed = seed;
            s.out_dir = out_dir;
            s.task = task;
            s.mode = mode;
            s.preset = preset;
            py::gil_scoped_release release;
            mtm::run_command(command, s);
        },
        py::arg("command"), py::arg("out_dir"), py::arg("config_text") = "", py::arg("seed") = py::none(),
        py::arg("task") = "", py::arg("mode") = "", py::arg("preset") = "");
    m.def(
        "load_checkpoint_info",
        [](const std::string& path) {
            const mtm::Checkpoint c = mtm::load_checkpoint(path);
            py::dict d;
            d["n_layers"] = c.params.config.n_layers;
            d["d_model"] = c.params.config.d_model;
            d["vocab_size"] = c.params.config.vocab_size;
            d["n_params"] = c.params.data.size();
            d["epoch"] = c.meta.epoch;
            d["seed"] = c.meta.seed;
            d["head"] = mtm::to_string(c.params.head.kind);
            d["extra"] = c.meta.extra;
            return d;
        },
        py::arg("path"));
}
