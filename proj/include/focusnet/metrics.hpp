#pragma once

#include <string>
#include <vector>

#include "focusnet/model.hpp"
#include "focusnet/tensor.hpp"

namespace focusnet {

struct ConfusionCounts {
    long long tp = 0;
    long long fp = 0;
    long long tn = 0;
    long long fn = 0;

    long long total() const { return tp + fp + tn + fn; }

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }
};

// SE/SP/AC/JI/DI with a degenerate flag per 0/0 metric (reported as 1.0).
struct MetricsEntry {
    double se = 0, sp = 0, ac = 0, ji = 0, di = 0;
    bool se_degenerate = false;
    bool sp_degenerate = false;
    bool ji_degenerate = false;
    bool di_degenerate = false;

    std::vector<double> values() const { return {se, sp, ac, ji, di}; }
};

struct MetricsReport {
    ConfusionCounts aggregate;
    MetricsEntry micro;  // pooled pixel counts
    MetricsEntry macro;  // mean of per-image entries
    std::vector<std::pair<std::string, MetricsEntry>> per_image;
    std::vector<ConfusionCounts> per_image_counts;
};

// 1 where prob > threshold, strict inequality.
TensorF binarize(const TensorF& prob, double threshold);

ConfusionCounts confusion(const TensorF& pred, const TensorF& gt);

MetricsEntry metrics_from_confusion(const ConfusionCounts& c);

// Fixed-width table, 4-decimal half-up rounding, columns in paper order.
std::string format_table(const std::vector<std::pair<std::string, std::vector<double>>>& rows,
                         const std::vector<std::string>& columns);

std::string report_csv(const MetricsReport& report);

struct SegmentationSample;
struct DatasetManifest;

MetricsReport evaluate(FocusNetParams<float>& model, const DatasetManifest& data, double threshold,
                       int batch_size = 8);

}  // namespace focusnet
