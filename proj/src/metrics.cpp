#include "eegdm/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"

namespace eegdm {

std::vector<std::vector<long>> confusion_matrix(const std::vector<int>& labels,
                                                const std::vector<int>& preds, int n_classes) {
    if (labels.size() != preds.size()) throw ConfigError("label/prediction count mismatch");
    std::vector<std::vector<long>> conf(n_classes, std::vector<long>(n_classes, 0));
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes || preds[i] < 0 || preds[i] >= n_classes)
            throw ConfigError("class id out of range");
        ++conf[labels[i]][preds[i]];
    }
    return conf;
}

double balanced_accuracy(const std::vector<std::vector<long>>& conf,
                         std::vector<std::string>* warnings) {
    double sum = 0.0;
    int counted = 0;
    for (size_t c = 0; c < conf.size(); ++c) {
        long support = std::accumulate(conf[c].begin(), conf[c].end(), 0L);
        if (support == 0) {
            if (warnings)
                warnings->push_back("class " + std::to_string(c) +
                                    " absent from eval set; excluded from balanced accuracy");
            continue;
        }
        sum += double(conf[c][c]) / double(support);
        ++counted;
    }
    return counted > 0 ? sum / counted : 0.0;
}

double cohens_kappa(const std::vector<std::vector<long>>& conf) {
    const int k = int(conf.size());
    long n = 0;
    for (const auto& row : conf) n += std::accumulate(row.begin(), row.end(), 0L);
    if (n == 0) return 0.0;

    double po = 0.0, pe = 0.0;
    for (int c = 0; c < k; ++c) po += double(conf[c][c]);
    po /= double(n);
    for (int c = 0; c < k; ++c) {
        long row = std::accumulate(conf[c].begin(), conf[c].end(), 0L);
        long col = 0;
        for (int r = 0; r < k; ++r) col += conf[r][c];
        pe += double(row) * double(col);
    }
    pe /= double(n) * double(n);
    if (std::abs(1.0 - pe) < 1e-15) return 0.0;
    return (po - pe) / (1.0 - pe);
}

double weighted_f1(const std::vector<std::vector<long>>& conf) {
    const int k = int(conf.size());
    long n = 0;
    for (const auto& row : conf) n += std::accumulate(row.begin(), row.end(), 0L);
    if (n == 0) return 0.0;

    double out = 0.0;
    for (int c = 0; c < k; ++c) {
        long support = std::accumulate(conf[c].begin(), conf[c].end(), 0L);
        if (support == 0) continue;
        long col = 0;
        for (int r = 0; r < k; ++r) col += conf[r][c];
        double tp = double(conf[c][c]);
        double prec = col > 0 ? tp / double(col) : 0.0;
        double rec = tp / double(support);
        double f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        out += f1 * double(support) / double(n);
    }
    return out;
}

double auroc_binary(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ConfigError("score/label count mismatch");
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // midranks over tied scores
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double mid = 0.5 * double(i + j) + 1.0;  // ranks are 1-based
        for (size_t r = i; r <= j; ++r) rank[order[r]] = mid;
        i = j + 1;
    }

    double rank_pos = 0.0;
    long n_pos = 0, n_neg = 0;
    for (size_t r = 0; r < n; ++r) {
        if (labels[r] == 1) {
            rank_pos += rank[r];
            ++n_pos;
        } else {
            ++n_neg;
        }
    }
    if (n_pos == 0 || n_neg == 0) throw ConfigError("AUROC needs both classes present");
    return (rank_pos - 0.5 * double(n_pos) * double(n_pos + 1)) / (double(n_pos) * double(n_neg));
}

double auroc_macro_ovr(const Mat& probs, const std::vector<int>& labels,
                       std::vector<std::string>* warnings) {
    const int k = int(probs.cols());
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < k; ++c) {
        long pos = 0;
        for (int lab : labels)
            if (lab == c) ++pos;
        if (pos == 0 || pos == long(labels.size())) {
            if (warnings)
                warnings->push_back("class " + std::to_string(c) +
                                    " lacks positives or negatives; excluded from AUROC");
            continue;
        }
        std::vector<double> scores(labels.size());
        std::vector<int> bin(labels.size());
        for (size_t i = 0; i < labels.size(); ++i) {
            scores[i] = probs(int(i), c);
            bin[i] = labels[i] == c ? 1 : 0;
        }
        sum += auroc_binary(scores, bin);
        ++counted;
    }
    if (counted == 0) {
        if (warnings) warnings->push_back("AUROC undefined; reported as 0.5");
        return 0.5;
    }
    return sum / counted;
}

MetricsReport compute_metrics(const std::vector<int>& labels, const std::vector<int>& preds,
                              const Mat& probs, int n_classes) {
    if (labels.empty()) throw ConfigError("empty eval set");
    MetricsReport rep;
    rep.n_eval = int(labels.size());
    rep.confusion = confusion_matrix(labels, preds, n_classes);
    rep.balanced_accuracy = balanced_accuracy(rep.confusion, &rep.warnings);
    rep.cohens_kappa = cohens_kappa(rep.confusion);
    rep.weighted_f1 = weighted_f1(rep.confusion);
    if (n_classes == 2) {
        bool both = false;
        long pos = 0;
        for (int lab : labels)
            if (lab == 1) ++pos;
        both = pos > 0 && pos < long(labels.size());
        if (both) {
            std::vector<double> scores(labels.size());
            for (size_t i = 0; i < labels.size(); ++i) scores[i] = probs(int(i), 1);
            rep.auroc = auroc_binary(scores, labels);
        } else {
            rep.warnings.push_back("AUROC undefined; reported as 0.5");
            rep.auroc = 0.5;
        }
    } else {
        rep.auroc = auroc_macro_ovr(probs, labels, &rep.warnings);
    }
    return rep;
}

std::string MetricsReport::to_json_string() const {
    nlohmann::ordered_json j;
    j["balanced_accuracy"] = balanced_accuracy;
    j["auroc"] = auroc;
    j["weighted_f1"] = weighted_f1;
    j["cohens_kappa"] = cohens_kappa;
    j["confusion_matrix"] = confusion;
    j["n_eval"] = n_eval;
    j["warnings"] = warnings;
    return j.dump(2);
}

}  // namespace eegdm
