#include "eegdm/downstream.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

#include "eegdm/diffusion.hpp"

namespace eegdm {

namespace {

int infer_classes(const std::vector<Sample>& train, int configured) {
    std::set<int> distinct;
    int max_label = -1;
    for (const auto& s : train) {
        if (!s.label) throw ConfigError("fine-tuning requires labeled samples");
        distinct.insert(*s.label);
        max_label = std::max(max_label, *s.label);
    }
    int n_classes = configured > 0 ? configured : max_label + 1;
    for (const auto& s : train)
        if (*s.label < 0 || *s.label >= n_classes) throw ConfigError("label id out of range");
    if (distinct.size() < 2) throw ConfigError("degenerate label set");
    return n_classes;
}

// Patch matrix for a list of samples, each expanded into its view set when
// specs are given; rows come back grouped per sample.
struct ViewBatchLayout {
    Mat patches;
    int seq_len = 0;
    int views = 1;
};

ViewBatchLayout build_view_patches(const std::vector<const Sample*>& samples,
                                   const EncoderConfig& cfg,
                                   const std::vector<AugmentSpec>& specs, uint64_t seed) {
    const int C = samples[0]->channels();
    const int T = samples[0]->length();
    if (T % cfg.patch_window != 0) throw ConfigError("window does not tile sample");
    const int seq = C * (T / cfg.patch_window);
    const int m = specs.empty() ? 1 : 1 + int(specs.size());

    ViewBatchLayout out;
    out.seq_len = seq;
    out.views = m;
    out.patches = Mat(int(samples.size()) * m * seq, cfg.patch_window);
    for (size_t i = 0; i < samples.size(); ++i) {
        if (samples[i]->channels() != C || samples[i]->length() != T)
            throw ConfigError("samples must share geometry");
        std::vector<AugmentSpec> seeded;
        for (size_t v = 0; v < specs.size(); ++v)
            seeded.push_back(specs[v].with_seed(mix_seed(seed, uint64_t(i), uint64_t(v))));
        ViewSet views =
            seeded.empty() ? ViewSet{{*samples[i]}} : make_views(*samples[i], seeded);
        for (int v = 0; v < m; ++v)
            out.patches.middleRows((int(i) * m + v) * seq, seq) =
                patchify(views.views[v].data, cfg.patch_window);
    }
    return out;
}

}  // namespace

FinetuneResult finetune(const EncoderParams& pretrained, const std::vector<Sample>& train,
                        const FinetuneConfig& cfg) {
    if (train.empty()) throw ConfigError("empty training set");
    const int n_classes = infer_classes(train, cfg.n_classes);
    const int d = pretrained.cfg.embed_dim;

    FinetuneResult result;
    result.encoder = pretrained;
    result.n_classes = n_classes;
    result.head.w = Mat::Zero(n_classes, d);
    result.head.b = Mat::Zero(1, n_classes);

    Adam opt(cfg.lr);
    Rng shuffle_rng(mix_seed(cfg.seed, 0xf17e));
    const int n = int(train.size());
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    // frozen mode trains the head on representations computed once
    Mat cached;
    if (cfg.freeze_encoder) {
        std::vector<const Sample*> ptrs;
        for (const auto& s : train) ptrs.push_back(&s);
        cached = encode_samples(result.encoder, ptrs);
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int bsz = std::min(cfg.batch_size, n - start);
            std::vector<int> labels(bsz);
            for (int i = 0; i < bsz; ++i) labels[i] = *train[order[start + i]].label;

            ad::Graph g;
            Bindings bindings;
            ad::Var w_head = bindings.bind(g, result.head.w);
            ad::Var b_head = bindings.bind(g, result.head.b);

            ad::Var features;
            if (cfg.freeze_encoder) {
                Mat feats(bsz, d);
                for (int i = 0; i < bsz; ++i) feats.row(i) = cached.row(order[start + i]);
                features = g.constant(std::move(feats));
            } else {
                std::vector<const Sample*> ptrs;
                for (int i = 0; i < bsz; ++i) ptrs.push_back(&train[order[start + i]]);
                ViewBatchLayout vb = build_view_patches(
                    ptrs, result.encoder.cfg, cfg.view_specs,
                    mix_seed(cfg.seed, uint64_t(epoch), uint64_t(start)));
                EncoderVars enc = bind_encoder(g, result.encoder, bindings);
                ad::Var pooled =
                    encoder_pooled(g, enc, g.constant(std::move(vb.patches)), vb.seq_len);
                features = ad::mean_pool_rows(g, pooled, vb.views);
            }

            // logits = features * w^T + b
            ad::Var w_t = g.make(w_head->val.transpose(), {w_head}, [w = w_head.get()](ad::Node& nd) {
                ad::accumulate(*w, nd.grad.transpose());
            });
            ad::Var logits = ad::linear(g, features, w_t, b_head);
            ad::Var loss = ad::cross_entropy_logits(g, logits, labels);
            if (!std::isfinite(loss->val(0, 0))) throw NumericError("training divergence");
            g.backward(loss);
            opt.step(bindings.grads());
            epoch_loss += loss->val(0, 0);
            ++batches;
        }
        result.loss_curve.push_back(epoch_loss / std::max(1, batches));
    }
    return result;
}

MetricsReport evaluate(EncoderParams& encoder, const LinearHead& head,
                       const std::vector<Sample>& eval_set) {
    if (eval_set.empty()) throw ConfigError("empty eval set");
    const int n = int(eval_set.size());
    const int n_classes = head.n_classes();

    std::vector<int> labels(n), preds(n);
    Mat probs(n, n_classes);
    const int chunk = 256;
    for (int start = 0; start < n; start += chunk) {
        const int bsz = std::min(chunk, n - start);
        std::vector<const Sample*> ptrs;
        for (int i = 0; i < bsz; ++i) {
            const Sample& s = eval_set[start + i];
            if (!s.label) throw ConfigError("evaluation requires labeled samples");
            labels[start + i] = *s.label;
            ptrs.push_back(&s);
        }
        Mat e = encode_samples(encoder, ptrs);
        Mat logits = e * head.w.transpose();
        logits.rowwise() += head.b.row(0);
        Mat p = ad::softmax_rows(logits);
        for (int i = 0; i < bsz; ++i) {
            probs.row(start + i) = p.row(i);
            int arg = 0;
            for (int c = 1; c < n_classes; ++c)
                if (logits(i, c) > logits(i, arg)) arg = c;
            preds[start + i] = arg;
        }
    }
    return compute_metrics(labels, preds, probs, n_classes);
}

LosoResult run_loso(const EncoderParams& pretrained, const std::vector<Sample>& dataset,
                    const FinetuneConfig& cfg, const std::vector<uint64_t>& seeds) {
    std::vector<std::string> subjects = subject_ids(dataset);
    if (subjects.size() < 2) throw ConfigError("LOSO requires at least two subjects");
    if (seeds.empty()) throw ConfigError("LOSO requires at least one seed");

    // canonical sample order inside each fold, so the caller's subject or
    // sample ordering cannot leak into the fold results
    std::vector<const Sample*> ordered;
    for (const auto& s : dataset) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](const Sample* a, const Sample* b) {
        return std::tie(a->subject_id, a->source_recording, a->offset) <
               std::tie(b->subject_id, b->source_recording, b->offset);
    });

    LosoResult result;
    result.subjects = subjects;
    for (const auto& subject : subjects) {
        std::vector<Sample> train, eval_set;
        for (const Sample* s : ordered)
            (s->subject_id == subject ? eval_set : train).push_back(*s);
        if (train.empty() || eval_set.empty())
            throw ConfigError("LOSO fold has an empty split for subject " + subject);

        std::vector<MetricsReport> fold;
        for (uint64_t seed : seeds) {
            FinetuneConfig fold_cfg = cfg;
            // seed tied to the subject identity so fold order cannot matter
            fold_cfg.seed = mix_seed(seed, hash_string(subject));
            FinetuneResult ft = finetune(pretrained, train, fold_cfg);
            fold.push_back(evaluate(ft.encoder, ft.head, eval_set));
        }
        result.reports.push_back(std::move(fold));
    }

    auto aggregate = [&](const std::string& name, auto getter) {
        std::vector<double> values;
        for (const auto& fold : result.reports)
            for (const auto& rep : fold) values.push_back(getter(rep));
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= double(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= double(values.size());
        result.aggregate[name] = {mean, std::sqrt(var)};
    };
    aggregate("balanced_accuracy", [](const MetricsReport& r) { return r.balanced_accuracy; });
    aggregate("auroc", [](const MetricsReport& r) { return r.auroc; });
    aggregate("weighted_f1", [](const MetricsReport& r) { return r.weighted_f1; });
    aggregate("cohens_kappa", [](const MetricsReport& r) { return r.cohens_kappa; });
    return result;
}

void export_embeddings(EncoderParams& encoder, const std::vector<Sample>& dataset,
                       const std::string& path, int per_class_limit, uint64_t seed) {
    if (dataset.empty()) throw ConfigError("empty dataset");

    std::vector<int> chosen;
    if (per_class_limit > 0) {
        std::map<int, std::vector<int>> by_class;
        for (size_t i = 0; i < dataset.size(); ++i)
            by_class[dataset[i].label.value_or(-1)].push_back(int(i));
        for (auto& [label, idx] : by_class) {
            Rng rng(mix_seed(seed, uint64_t(label) + 0x17));
            for (int i = int(idx.size()) - 1; i > 0; --i)
                std::swap(idx[i], idx[rng.uniform_int(0, i)]);
            for (int i = 0; i < std::min<int>(per_class_limit, int(idx.size())); ++i)
                chosen.push_back(idx[i]);
        }
        std::sort(chosen.begin(), chosen.end());
    } else {
        for (size_t i = 0; i < dataset.size(); ++i) chosen.push_back(int(i));
    }

    std::vector<const Sample*> ptrs;
    for (int i : chosen) ptrs.push_back(&dataset[i]);
    Mat e = encode_samples(encoder, ptrs);

    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path);
    out << "sample_id,label";
    for (int j = 0; j < e.cols(); ++j) out << ",e_" << (j + 1);
    out << "\n";
    out.precision(17);
    for (size_t r = 0; r < ptrs.size(); ++r) {
        const Sample& s = *ptrs[r];
        out << s.source_recording << ":" << s.offset << ",";
        if (s.label) out << *s.label;
        for (int j = 0; j < e.cols(); ++j) out << "," << e(int(r), j);
        out << "\n";
    }
}

double pearson(const Vec& a, const Vec& b) {
    if (a.size() != b.size() || a.size() < 2) throw ConfigError("pearson needs equal-length inputs");
    double ma = a.mean(), mb = b.mean();
    Vec da = a.array() - ma, db = b.array() - mb;
    double va = da.squaredNorm(), vb = db.squaredNorm();
    if (va < 1e-20 || vb < 1e-20) throw NumericError("constant input to pearson");
    return da.dot(db) / std::sqrt(va * vb);
}

Vec magnitude_spectrum(const Vec& x) {
    const int n = int(x.size());
    const int bins = n / 2;
    Vec out(bins);
    for (int k = 1; k <= bins; ++k) {
        double re = 0.0, im = 0.0;
        for (int t = 0; t < n; ++t) {
            double arg = -2.0 * M_PI * double(k) * double(t) / double(n);
            re += x(t) * std::cos(arg);
            im += x(t) * std::sin(arg);
        }
        out(k - 1) = std::sqrt(re * re + im * im);
    }
    return out;
}

GenerationQuality generation_quality(EncoderParams& encoder, DiTParams& dit,
                                     const PcaBasis& basis, const NoiseSchedule& sched,
                                     const std::vector<Sample>& eval_samples,
                                     const std::vector<AugmentSpec>& view_specs,
                                     double guidance_scale, uint64_t seed, int stride,
                                     std::vector<Sample>* out_generated) {
    if (eval_samples.empty()) throw ConfigError("empty eval set");

    const Sample& first = eval_samples.front();
    LatentGeometry geom;
    geom.channels = first.channels();
    geom.n_windows = first.length() / basis.window;
    geom.k = basis.components;

    std::vector<std::optional<Vec>> conds;
    for (size_t i = 0; i < eval_samples.size(); ++i) {
        std::vector<AugmentSpec> seeded;
        for (size_t v = 0; v < view_specs.size(); ++v)
            seeded.push_back(view_specs[v].with_seed(mix_seed(seed, uint64_t(i), uint64_t(v))));
        ViewSet views = seeded.empty() ? ViewSet{{eval_samples[i]}}
                                       : make_views(eval_samples[i], seeded);
        conds.push_back(encode(views, encoder));
    }

    std::vector<LatentBlock> latents = sample_latents_each(
        conds, guidance_scale, mix_seed(seed, 0x93e), stride, geom, dit, sched);
    std::vector<Sample> generated = reconstruct_signal(latents, basis);

    GenerationQuality q;
    q.n_samples = int(eval_samples.size());
    double sum_t = 0.0, sum_f = 0.0;
    int counted = 0;
    for (size_t i = 0; i < eval_samples.size(); ++i) {
        const MatF& orig = eval_samples[i].data;
        const MatF& gen = generated[i].data;
        for (int c = 0; c < orig.rows(); ++c) {
            Vec a = orig.row(c).cast<double>().transpose();
            Vec b = gen.row(c).cast<double>().transpose();
            double va = (a.array() - a.mean()).square().sum();
            double vb = (b.array() - b.mean()).square().sum();
            if (va < 1e-20 || vb < 1e-20) {
                ++q.skipped_channels;
                continue;
            }
            sum_t += pearson(a, b);
            sum_f += pearson(magnitude_spectrum(a), magnitude_spectrum(b));
            ++counted;
        }
    }
    if (counted == 0) throw NumericError("all channels were constant");
    q.pearson_time = sum_t / counted;
    q.pearson_freq = sum_f / counted;
    if (out_generated) *out_generated = std::move(generated);
    return q;
}

}  // namespace eegdm
