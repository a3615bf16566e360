#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "eegdm/downstream.hpp"
#include "eegdm/eegb.hpp"
#include "eegdm/pretrain.hpp"

namespace py = pybind11;
using namespace eegdm;

namespace {

Mat numpy_to_mat(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ConfigError("expected a 2-D array");
    Mat m(a.shape(0), a.shape(1));
    auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = r(i, j);
    return m;
}

py::array_t<double> mat_to_numpy(const Mat& m) {
    py::array_t<double> a({m.rows(), m.cols()});
    auto w = a.mutable_unchecked<2>();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) w(i, j) = m(i, j);
    return a;
}

MatF numpy_to_matf(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ConfigError("expected a 2-D array");
    MatF m(a.shape(0), a.shape(1));
    auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = r(i, j);
    return m;
}

py::array_t<float> matf_to_numpy(const MatF& m) {
    py::array_t<float> a({m.rows(), m.cols()});
    auto w = a.mutable_unchecked<2>();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) w(i, j) = m(i, j);
    return a;
}

py::array_t<double> vec_to_numpy(const Vec& v) {
    py::array_t<double> a(std::vector<py::ssize_t>{py::ssize_t(v.size())});
    auto w = a.mutable_unchecked<1>();
    for (Eigen::Index i = 0; i < v.size(); ++i) w(i) = v(i);
    return a;
}

RunConfig config_from_json_str(const std::string& s) {
    return parse_run_config(nlohmann::json::parse(s));
}

FinetuneConfig finetune_config(const RunConfig& cfg, uint64_t seed) {
    FinetuneConfig f;
    f.epochs = cfg.downstream.epochs;
    f.lr = cfg.downstream.lr;
    f.batch_size = cfg.downstream.batch_size;
    f.freeze_encoder = cfg.downstream.freeze_encoder;
    if (cfg.downstream.finetune_views) f.view_specs = cfg.augment_views;
    f.seed = seed;
    return f;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Self-supervised EEG representation learning with a conditional latent "
              "diffusion model";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<Recording>(m, "Recording")
        .def(py::init([](py::array_t<float, py::array::c_style | py::array::forcecast> data,
                         double sampling_rate, const std::string& id,
                         const std::string& subject_id, std::optional<int> label) {
                 Recording r;
                 r.data = numpy_to_matf(data);
                 r.sampling_rate = sampling_rate;
                 r.id = id;
                 r.subject_id = subject_id;
                 r.label = label;
                 for (int c = 0; c < r.channels(); ++c)
                     r.channel_names.push_back("ch" + std::to_string(c));
                 r.validate();
                 return r;
             }),
             py::arg("data"), py::arg("sampling_rate"), py::arg("id") = "rec",
             py::arg("subject_id") = "subj", py::arg("label") = std::nullopt)
        .def_readonly("id", &Recording::id)
        .def_readonly("subject_id", &Recording::subject_id)
        .def_readonly("sampling_rate", &Recording::sampling_rate)
        .def_readonly("channel_names", &Recording::channel_names)
        .def_readonly("label", &Recording::label)
        .def_property_readonly("data", [](const Recording& r) { return matf_to_numpy(r.data); })
        .def_property_readonly("channels", &Recording::channels)
        .def_property_readonly("duration", &Recording::duration);

    py::class_<Sample>(m, "Sample")
        .def(py::init([](py::array_t<float, py::array::c_style | py::array::forcecast> data,
                         std::optional<int> label, const std::string& subject_id) {
                 Sample s;
                 s.data = numpy_to_matf(data);
                 s.label = label;
                 s.subject_id = subject_id;
                 s.source_recording = "py";
                 return s;
             }),
             py::arg("data"), py::arg("label") = std::nullopt, py::arg("subject_id") = "subj")
        .def_readonly("source_recording", &Sample::source_recording)
        .def_readonly("subject_id", &Sample::subject_id)
        .def_readonly("offset", &Sample::offset)
        .def_readonly("label", &Sample::label)
        .def_property_readonly("data", [](const Sample& s) { return matf_to_numpy(s.data); });

    m.def("segment", &segment, py::arg("recording"), py::arg("sample_length"), py::arg("stride"));

    m.def(
        "synth_generate",
        [](int channels, int duration, double sampling_rate, int classes,
           int recordings_per_class, int test_recordings_per_class, int subjects,
           std::optional<std::vector<std::vector<double>>> class_freqs, double amplitude,
           std::optional<double> snr_db, uint64_t seed) {
            SynthConfig cfg;
            cfg.channels = channels;
            cfg.duration = duration;
            cfg.sampling_rate = sampling_rate;
            cfg.classes = classes;
            cfg.recordings_per_class = recordings_per_class;
            cfg.test_recordings_per_class = test_recordings_per_class;
            cfg.subjects = subjects;
            cfg.class_freqs = class_freqs ? *class_freqs : default_class_freqs(classes);
            cfg.amplitude = amplitude;
            cfg.snr_db = snr_db;
            return synth_generate(cfg, seed);
        },
        py::arg("channels") = 2, py::arg("duration") = 1024, py::arg("sampling_rate") = 128.0,
        py::arg("classes") = 2, py::arg("recordings_per_class") = 4,
        py::arg("test_recordings_per_class") = 1, py::arg("subjects") = 2,
        py::arg("class_freqs") = std::nullopt, py::arg("amplitude") = 1.0,
        py::arg("snr_db") = std::optional<double>(6.0), py::arg("seed") = 0);

    m.def("save_recording", &save_recording, py::arg("recording"), py::arg("path"));
    m.def("load_recording", &load_recording, py::arg("path"));

    py::class_<AugmentSpec>(m, "AugmentSpec")
        .def(py::init([](const std::string& kind, double mask_fraction, double scale_low,
                         double scale_high, uint64_t seed) {
                 AugmentSpec spec;
                 spec.kind = augment_kind_from_string(kind);
                 spec.mask_fraction = mask_fraction;
                 spec.scale_low = scale_low;
                 spec.scale_high = scale_high;
                 spec.seed = seed;
                 return spec;
             }),
             py::arg("kind"), py::arg("mask_fraction") = 0.1, py::arg("scale_low") = 0.5,
             py::arg("scale_high") = 2.0, py::arg("seed") = 0)
        .def_property_readonly("kind",
                               [](const AugmentSpec& s) { return augment_kind_to_string(s.kind); })
        .def_readonly("mask_fraction", &AugmentSpec::mask_fraction)
        .def_readonly("scale_low", &AugmentSpec::scale_low)
        .def_readonly("scale_high", &AugmentSpec::scale_high)
        .def_readonly("seed", &AugmentSpec::seed);

    m.def("apply_augment", &apply, py::arg("sample"), py::arg("spec"));
    m.def(
        "make_views",
        [](const Sample& s, const std::vector<AugmentSpec>& specs) {
            return make_views(s, specs).views;
        },
        py::arg("sample"), py::arg("specs"));

    py::class_<PcaBasis>(m, "PcaBasis")
        .def_readonly("window", &PcaBasis::window)
        .def_readonly("components", &PcaBasis::components)
        .def_readonly("scale_coeffs", &PcaBasis::scale_coeffs)
        .def_property_readonly("basis", [](const PcaBasis& b) { return mat_to_numpy(b.basis); })
        .def_property_readonly("mean", [](const PcaBasis& b) { return vec_to_numpy(b.mean); })
        .def_property_readonly("eigenvalues",
                               [](const PcaBasis& b) { return vec_to_numpy(b.eigenvalues); })
        .def_property_readonly("coeff_scale",
                               [](const PcaBasis& b) { return vec_to_numpy(b.coeff_scale); })
        .def(
            "project",
            [](const PcaBasis& b, const Sample& s) { return mat_to_numpy(pca_project(s, b).data); },
            py::arg("sample"))
        .def(
            "reconstruct",
            [](const PcaBasis& b,
               py::array_t<double, py::array::c_style | py::array::forcecast> latent,
               int channels) {
                LatentBlock block;
                block.data = numpy_to_mat(latent);
                block.channels = channels;
                if (int(block.data.rows()) % channels != 0)
                    throw ConfigError("latent rows not divisible by channels");
                block.n_windows = int(block.data.rows()) / channels;
                block.k = int(block.data.cols());
                return matf_to_numpy(pca_reconstruct(block, b).data);
            },
            py::arg("latent"), py::arg("channels") = 1);

    m.def(
        "fit_pca",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> windows, int components,
           bool scale_coeffs) { return pca_fit(numpy_to_mat(windows), components, scale_coeffs); },
        py::arg("windows"), py::arg("components"), py::arg("scale_coeffs") = true);

    m.def(
        "collect_windows",
        [](const std::vector<Sample>& samples, int window) {
            return mat_to_numpy(collect_windows(samples, window));
        },
        py::arg("samples"), py::arg("window"));

    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_static("linear", &NoiseSchedule::linear, py::arg("t_max"),
                    py::arg("beta_start") = 1e-4, py::arg("beta_end") = 2e-2)
        .def_readonly("t_max", &NoiseSchedule::t_max)
        .def_property_readonly("beta", [](const NoiseSchedule& s) { return vec_to_numpy(s.beta); })
        .def_property_readonly("alpha_bar",
                               [](const NoiseSchedule& s) { return vec_to_numpy(s.alpha_bar); })
        .def_property_readonly("beta_tilde",
                               [](const NoiseSchedule& s) { return vec_to_numpy(s.beta_tilde); });

    m.def(
        "forward_sample",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> z0, int t,
           py::array_t<double, py::array::c_style | py::array::forcecast> eps,
           const NoiseSchedule& sched) {
            return mat_to_numpy(forward_sample_rows(numpy_to_mat(z0), t, numpy_to_mat(eps), sched));
        },
        py::arg("z0"), py::arg("t"), py::arg("eps"), py::arg("schedule"));

    py::class_<MetricsReport>(m, "MetricsReport")
        .def_readonly("balanced_accuracy", &MetricsReport::balanced_accuracy)
        .def_readonly("auroc", &MetricsReport::auroc)
        .def_readonly("weighted_f1", &MetricsReport::weighted_f1)
        .def_readonly("cohens_kappa", &MetricsReport::cohens_kappa)
        .def_readonly("confusion", &MetricsReport::confusion)
        .def_readonly("n_eval", &MetricsReport::n_eval)
        .def_readonly("warnings", &MetricsReport::warnings)
        .def("to_json", &MetricsReport::to_json_string);

    py::class_<Checkpoint>(m, "Checkpoint")
        .def_readonly("step", &Checkpoint::step)
        .def_readonly("seed", &Checkpoint::seed)
        .def_property_readonly("config_json",
                               [](const Checkpoint& c) { return c.config.dump(); })
        .def_property_readonly("pca", [](const Checkpoint& c) { return c.pca; })
        .def_property_readonly("has_head", [](const Checkpoint& c) { return c.head.has_value(); })
        .def(
            "encode",
            [](Checkpoint& c, const Sample& s) {
                return vec_to_numpy(encode(ViewSet{{s}}, c.encoder));
            },
            py::arg("sample"))
        .def(
            "encode_views",
            [](Checkpoint& c, const std::vector<Sample>& views) {
                ViewSet vs;
                vs.views = views;
                return vec_to_numpy(encode(vs, c.encoder));
            },
            py::arg("views"))
        .def(
            "generate",
            [](Checkpoint& c, int count, std::optional<py::array_t<double>> cond, double scale,
               uint64_t seed, int channels, int n_windows, int stride) {
                LatentGeometry geom;
                geom.channels = channels;
                geom.n_windows = n_windows;
                geom.k = c.pca.components;
                SampleOptions opt;
                opt.count = count;
                if (cond) {
                    Mat cm = numpy_to_mat(
                        py::array_t<double, py::array::c_style | py::array::forcecast>(*cond));
                    if (cm.rows() != 1) throw ConfigError("cond must be a 1 x d row");
                    opt.cond = cm.row(0).transpose();
                }
                opt.guidance_scale = scale;
                opt.seed = seed;
                opt.stride = stride;
                std::vector<LatentBlock> latents = sample_latents(opt, geom, c.dit, c.schedule);
                std::vector<py::array_t<float>> out;
                for (const auto& s : reconstruct_signal(latents, c.pca))
                    out.push_back(matf_to_numpy(s.data));
                return out;
            },
            py::arg("count") = 1, py::arg("cond") = std::nullopt, py::arg("scale") = 2.0,
            py::arg("seed") = 0, py::arg("channels") = 1, py::arg("n_windows") = 4,
            py::arg("stride") = 1)
        .def(
            "evaluate",
            [](Checkpoint& c, const std::vector<Sample>& eval_set) {
                if (!c.head) throw ConfigError("checkpoint has no prediction head");
                return evaluate(c.encoder, *c.head, eval_set);
            },
            py::arg("eval_set"));

    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    m.def(
        "run_pretrain",
        [](const std::string& config_json, uint64_t seed, const std::string& out_dir) {
            return pretrain_run(config_from_json_str(config_json), seed, out_dir);
        },
        py::arg("config_json"), py::arg("seed"), py::arg("out_dir"));

    m.def(
        "run_finetune",
        [](const std::string& checkpoint_path, const std::string& config_json, uint64_t seed) {
            RunConfig cfg = config_from_json_str(config_json);
            Checkpoint ckpt = load_checkpoint(checkpoint_path);
            DatasetBundle bundle = assemble_dataset(cfg);
            std::vector<Sample> train = bundle.train;
            if (cfg.downstream.split == "fraction") {
                std::vector<int> idx =
                    stratified_fraction_indices(bundle.train, cfg.downstream.fraction, seed);
                train.clear();
                for (int i : idx) train.push_back(bundle.train[i]);
            }
            FinetuneResult ft = finetune(ckpt.encoder, train, finetune_config(cfg, seed));
            ckpt.encoder = std::move(ft.encoder);
            ckpt.head = std::move(ft.head);
            return ckpt;
        },
        py::arg("checkpoint_path"), py::arg("config_json"), py::arg("seed"));

    m.def(
        "run_evaluate",
        [](Checkpoint& ckpt, const std::string& config_json) {
            if (!ckpt.head) throw ConfigError("checkpoint has no prediction head");
            RunConfig cfg = config_from_json_str(config_json);
            DatasetBundle bundle = assemble_dataset(cfg);
            if (bundle.test.empty()) throw ConfigError("dataset has no test split");
            return evaluate(ckpt.encoder, *ckpt.head, bundle.test);
        },
        py::arg("checkpoint"), py::arg("config_json"));

    m.def(
        "run_loso",
        [](const std::string& checkpoint_path, const std::string& config_json) {
            RunConfig cfg = config_from_json_str(config_json);
            Checkpoint ckpt = load_checkpoint(checkpoint_path);
            DatasetBundle bundle = assemble_dataset(cfg);
            std::vector<Sample> all = bundle.train;
            all.insert(all.end(), bundle.test.begin(), bundle.test.end());
            LosoResult res = run_loso(ckpt.encoder, all, finetune_config(cfg, 0), cfg.train.seeds);
            py::dict out;
            out["subjects"] = res.subjects;
            py::dict agg;
            for (const auto& [name, ms] : res.aggregate)
                agg[name.c_str()] = py::make_tuple(ms.first, ms.second);
            out["aggregate"] = agg;
            return out;
        },
        py::arg("checkpoint_path"), py::arg("config_json"));

    m.def(
        "export_embeddings",
        [](const std::string& checkpoint_path, const std::string& config_json,
           const std::string& out_path, int per_class_limit, uint64_t seed) {
            RunConfig cfg = config_from_json_str(config_json);
            Checkpoint ckpt = load_checkpoint(checkpoint_path);
            DatasetBundle bundle = assemble_dataset(cfg);
            std::vector<Sample> all = bundle.train;
            all.insert(all.end(), bundle.test.begin(), bundle.test.end());
            export_embeddings(ckpt.encoder, all, out_path, per_class_limit, seed);
        },
        py::arg("checkpoint_path"), py::arg("config_json"), py::arg("out_path"),
        py::arg("per_class_limit") = 0, py::arg("seed") = 0);

    m.attr("__version__") = "0.1.0";
}
