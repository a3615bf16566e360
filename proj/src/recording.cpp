#include "eegdm/recording.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace eegdm {

void Recording::validate() const {
    if (sampling_rate <= 0.0) throw ConfigError("sampling_rate must be positive");
    if (data.rows() < 1 || data.cols() < 1) throw ConfigError("recording must have C >= 1 and T >= 1");
    if (!channel_names.empty() && int(channel_names.size()) != channels())
        throw ConfigError("channel_names size does not match channel count");
    if (!all_finite(data)) throw NumericError("recording contains non-finite values");
}

std::vector<Sample> segment(const Recording& rec, int sample_length, int stride) {
    const int T = rec.duration();
    if (sample_length > T) throw ConfigError("sample length exceeds recording");
    if (sample_length < 1) throw ConfigError("sample length must be positive");
    if (stride < 1) throw ConfigError("stride must be >= 1");

    const int count = (T - sample_length) / stride + 1;
    std::vector<Sample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        Sample s;
        s.offset = i * stride;
        s.data = rec.data.middleCols(s.offset, sample_length);
        s.source_recording = rec.id;
        s.subject_id = rec.subject_id;
        s.label = rec.label;
        out.push_back(std::move(s));
    }
    return out;
}

Recording resample_linear(const Recording& rec, double target_rate) {
    if (target_rate <= 0.0) throw ConfigError("target rate must be positive");
    if (target_rate == rec.sampling_rate) return rec;

    const int T = rec.duration();
    const double ratio = rec.sampling_rate / target_rate;
    const int new_T = std::max(1, int(std::floor(double(T - 1) / ratio)) + 1);

    Recording out = rec;
    out.sampling_rate = target_rate;
    out.data = MatF(rec.channels(), new_T);
    for (int c = 0; c < rec.channels(); ++c) {
        for (int i = 0; i < new_T; ++i) {
            double pos = i * ratio;
            int lo = std::min(int(pos), T - 1);
            int hi = std::min(lo + 1, T - 1);
            double frac = pos - lo;
            out.data(c, i) = float((1.0 - frac) * rec.data(c, lo) + frac * rec.data(c, hi));
        }
    }
    return out;
}

void zscore_channels(Recording& rec) {
    const int T = rec.duration();
    for (int c = 0; c < rec.channels(); ++c) {
        double mean = 0.0;
        for (int t = 0; t < T; ++t) mean += rec.data(c, t);
        mean /= T;
        double var = 0.0;
        for (int t = 0; t < T; ++t) {
            double d = rec.data(c, t) - mean;
            var += d * d;
        }
        var /= T;
        double inv = var > 1e-20 ? 1.0 / std::sqrt(var) : 0.0;
        for (int t = 0; t < T; ++t) rec.data(c, t) = float((rec.data(c, t) - mean) * inv);
    }
}

std::vector<int> stratified_fraction_indices(const std::vector<Sample>& samples, double fraction,
                                             uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0) throw ConfigError("fraction must be in (0, 1]");
    const int n = int(samples.size());
    if (n == 0) return {};

    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < n; ++i) {
        int label = samples[i].label.value_or(0);
        by_class[label].push_back(i);
    }

    const int total = int(std::ceil(fraction * n));
    // largest-remainder apportionment of the per-class quotas
    std::vector<std::pair<int, double>> remainders;  // (class index order, remainder)
    std::vector<int> labels;
    std::vector<int> quota;
    int assigned = 0;
    for (auto& [label, idx] : by_class) {
        double share = fraction * double(idx.size());
        int base = int(std::floor(share));
        base = std::min(base, int(idx.size()));
        labels.push_back(label);
        quota.push_back(base);
        remainders.push_back({int(labels.size()) - 1, share - std::floor(share)});
        assigned += base;
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    int extra = total - assigned;
    size_t r = 0, stalled = 0;
    while (extra > 0 && stalled < remainders.size()) {
        int ci = remainders[r].first;
        int cap = int(by_class[labels[ci]].size());
        if (quota[ci] < cap) {
            ++quota[ci];
            --extra;
            stalled = 0;
        } else {
            ++stalled;
        }
        r = (r + 1) % remainders.size();
    }

    std::vector<int> selected;
    int ci = 0;
    for (auto& [label, idx] : by_class) {
        std::vector<int> shuffled = idx;
        Rng rng(mix_seed(seed, uint64_t(label) + 0x51ull));
        for (int i = int(shuffled.size()) - 1; i > 0; --i)
            std::swap(shuffled[i], shuffled[rng.uniform_int(0, i)]);
        for (int i = 0; i < quota[ci]; ++i) selected.push_back(shuffled[i]);
        ++ci;
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

std::vector<std::string> subject_ids(const std::vector<Sample>& samples) {
    std::set<std::string> seen;
    for (const auto& s : samples) seen.insert(s.subject_id);
    return {seen.begin(), seen.end()};
}

}  // namespace eegdm
