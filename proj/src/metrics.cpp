#include "focusnet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "focusnet/data.hpp"

namespace focusnet {

TensorF binarize(const TensorF& prob, double threshold) {
    if (threshold <= 0.0 || threshold >= 1.0) {
        throw ParamError("binarize threshold must be in (0,1), got " + std::to_string(threshold));
    }
    TensorF out(prob.shape);
    for (std::size_t i = 0; i < prob.data.size(); ++i) {
        out.data[i] = prob.data[i] > static_cast<float>(threshold) ? 1.0f : 0.0f;
    }
    return out;
}

ConfusionCounts confusion(const TensorF& pred, const TensorF& gt) {
    if (!pred.same_shape(gt)) {
        throw ShapeError("confusion shape mismatch: " + shape_str(pred.shape) + " vs " +
                         shape_str(gt.shape));
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const float p = pred.data[i];
        const float g = gt.data[i];
        if ((p != 0.0f && p != 1.0f) || (g != 0.0f && g != 1.0f)) {
            throw ParamError("confusion requires binary masks");
        }
        if (p == 1.0f && g == 1.0f)
            ++c.tp;
        else if (p == 1.0f)
            ++c.fp;
        else if (g == 1.0f)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

MetricsEntry metrics_from_confusion(const ConfusionCounts& c) {
    if (c.total() <= 0) throw ParamError("metrics_from_confusion: empty counts");
    MetricsEntry m;
    auto ratio = [](long long num, long long den, bool* degenerate) {
        if (den == 0) {
            *degenerate = true;
            return 1.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.se = ratio(c.tp, c.tp + c.fn, &m.se_degenerate);
    m.sp = ratio(c.tn, c.tn + c.fp, &m.sp_degenerate);
    m.ac = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    m.ji = ratio(c.tp, c.tp + c.fp + c.fn, &m.ji_degenerate);
    m.di = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, &m.di_degenerate);
    return m;
}

namespace {

// Half-up rounding at 4 decimals, matching the tables' precision.
std::string fmt4(double v) {
    const double rounded = std::floor(v * 10000.0 + 0.5) / 10000.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", rounded);
    return buf;
}

}  // namespace

std::string format_table(const std::vector<std::pair<std::string, std::vector<double>>>& rows,
                         const std::vector<std::string>& columns) {
    std::size_t name_width = std::string("Model").size();
    for (const auto& [name, values] : rows) {
        if (values.size() != columns.size()) {
            throw ParamError("format_table: row '" + name + "' has " +
                             std::to_string(values.size()) + " values for " +
                             std::to_string(columns.size()) + " columns");
        }
        name_width = std::max(name_width, name.size());
    }
    std::ostringstream os;
    os << "Model";
    os << std::string(name_width - 5, ' ');
    for (const auto& col : columns) {
        os << "  ";
        // Values render as 6 characters (x.xxxx); right-align headers to match.
        os << std::string(6 - std::min<std::size_t>(6, col.size()), ' ') << col;
    }
    os << "\n";
    for (const auto& [name, values] : rows) {
        os << name << std::string(name_width - name.size(), ' ');
        for (double v : values) os << "  " << fmt4(v);
        os << "\n";
    }
    return os.str();
}

std::string report_csv(const MetricsReport& report) {
    std::ostringstream os;
    os << "name,SE,SP,AC,JI,DI,flags\n";
    auto flags_of = [](const MetricsEntry& m) {
        std::string f;
        if (m.se_degenerate) f += "SE0 ";
        if (m.sp_degenerate) f += "SP0 ";
        if (m.ji_degenerate) f += "JI0 ";
        if (m.di_degenerate) f += "DI0 ";
        if (!f.empty()) f.pop_back();
        return f;
    };
    auto row = [&](const std::string& name, const MetricsEntry& m) {
        os << name << "," << fmt4(m.se) << "," << fmt4(m.sp) << "," << fmt4(m.ac) << ","
           << fmt4(m.ji) << "," << fmt4(m.di) << "," << flags_of(m) << "\n";
    };
    row("micro", report.micro);
    row("macro", report.macro);
    for (const auto& [name, entry] : report.per_image) row(name, entry);
    return os.str();
}

MetricsReport evaluate(FocusNetParams<float>& model, const DatasetManifest& data, double threshold,
                       int batch_size) {
    if (data.samples.empty()) throw DataError("evaluate requires a non-empty dataset");
    if (batch_size < 1) throw ParamError("evaluate batch size must be >= 1");

    const int n = static_cast<int>(data.samples.size());
    MetricsReport report;
    report.per_image_counts.resize(static_cast<std::size_t>(n));

    RngState rng(0);  // eval mode never draws from it
    for (int start = 0; start < n; start += batch_size) {
        const int count = std::min(batch_size, n - start);
        const auto& first = data.samples[static_cast<std::size_t>(start)];
        TensorF batch({count, first.image.dim(0), first.image.dim(1), first.image.dim(2)});
        for (int i = 0; i < count; ++i) {
            const auto& s = data.samples[static_cast<std::size_t>(start + i)];
            if (!s.image.same_shape(first.image)) {
                throw ShapeError("evaluate: sample " + s.id + " shape " + shape_str(s.image.shape) +
                                 " differs from batch shape " + shape_str(first.image.shape));
            }
            std::copy(s.image.data.begin(), s.image.data.end(),
                      batch.data.begin() + static_cast<std::int64_t>(i) * s.image.size());
        }
        auto [prob, trace] = forward(model, batch, Mode::kEval, rng);
        for (int i = 0; i < count; ++i) {
            TensorF p({1, prob.dim(2), prob.dim(3)});
            std::copy(prob.data.begin() + static_cast<std::int64_t>(i) * p.size(),
                      prob.data.begin() + static_cast<std::int64_t>(i + 1) * p.size(),
                      p.data.begin());
            const TensorF pred = binarize(p, threshold);
            report.per_image_counts[static_cast<std::size_t>(start + i)] =
                confusion(pred, data.samples[static_cast<std::size_t>(start + i)].mask);
        }
    }

    double se = 0, sp = 0, ac = 0, ji = 0, di = 0;
    for (int i = 0; i < n; ++i) {
        const auto& c = report.per_image_counts[static_cast<std::size_t>(i)];
        report.aggregate += c;
        const MetricsEntry entry = metrics_from_confusion(c);
        report.per_image.emplace_back(data.samples[static_cast<std::size_t>(i)].id, entry);
        se += entry.se;
        sp += entry.sp;
        ac += entry.ac;
        ji += entry.ji;
        di += entry.di;
    }
    report.micro = metrics_from_confusion(report.aggregate);
    report.macro.se = se / n;
    report.macro.sp = sp / n;
    report.macro.ac = ac / n;
    report.macro.ji = ji / n;
    report.macro.di = di / n;
    return report;
}

}  // namespace focusnet
