#ifndef EEGDM_METRICS_HPP
#define EEGDM_METRICS_HPP

#include <string>
#include <vector>

#include "eegdm/common.hpp"

namespace eegdm {

struct MetricsReport {
    double balanced_accuracy = 0.0;
    double auroc = 0.0;
    double weighted_f1 = 0.0;
    double cohens_kappa = 0.0;
    std::vector<std::vector<long>> confusion;  // [true][pred]
    int n_eval = 0;
    std::vector<std::string> warnings;

    std::string to_json_string() const;
};

std::vector<std::vector<long>> confusion_matrix(const std::vector<int>& labels,
                                                const std::vector<int>& preds, int n_classes);

// Mean of per-class recalls; zero-support classes are excluded and reported.
double balanced_accuracy(const std::vector<std::vector<long>>& conf,
                         std::vector<std::string>* warnings = nullptr);

// (p_o - p_e) / (1 - p_e); defined as 0 when p_e == 1.
double cohens_kappa(const std::vector<std::vector<long>>& conf);

double weighted_f1(const std::vector<std::vector<long>>& conf);

// Mann-Whitney rank statistic with midranks for ties. labels are 0/1.
double auroc_binary(const std::vector<double>& scores, const std::vector<int>& labels);

// Macro one-vs-rest over classes present with both positives and negatives.
double auroc_macro_ovr(const Mat& probs, const std::vector<int>& labels,
                       std::vector<std::string>* warnings = nullptr);

MetricsReport compute_metrics(const std::vector<int>& labels, const std::vector<int>& preds,
                              const Mat& probs, int n_classes);

}  // namespace eegdm

#endif
