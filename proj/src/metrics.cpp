#include "curvebind/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "curvebind/errors.hpp"

namespace curvebind {

namespace {
std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace

double lrmsd(const Tensor& pred, const Tensor& truth) {
    check_same_shape(pred, truth, "lrmsd");
    if (pred.cols() != 3 || pred.rows() == 0) throw ShapeError("lrmsd: expects n x 3, n >= 1");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.rows(); ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            const double d = pred(i, j) - truth(i, j);
            acc += d * d;
        }
    }
    return std::sqrt(acc / static_cast<double>(pred.rows()));
}

double centroid_distance(const Tensor& pred, const Tensor& truth) {
    check_same_shape(pred, truth, "centroid_distance");
    if (pred.cols() != 3 || pred.rows() == 0)
        throw ShapeError("centroid_distance: expects n x 3, n >= 1");
    double c[3] = {0, 0, 0};
    for (std::size_t i = 0; i < pred.rows(); ++i)
        for (std::size_t j = 0; j < 3; ++j) c[j] += pred(i, j) - truth(i, j);
    double acc = 0.0;
    for (double v : c) {
        v /= static_cast<double>(pred.rows());
        acc += v * v;
    }
    return std::sqrt(acc);
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("percentile of empty list");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
    const double f = rank - static_cast<double>(lo);
    return values[lo] + f * (values[hi] - values[lo]);
}

MetricAggregate percentile_report(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("percentile_report of empty list");
    MetricAggregate a;
    a.p25 = percentile(values, 25.0);
    a.p50 = percentile(values, 50.0);
    a.p75 = percentile(values, 75.0);
    double s = 0.0;
    int b2 = 0, b5 = 0;
    for (double v : values) {
        s += v;
        if (v < 2.0) ++b2;
        if (v < 5.0) ++b5;
    }
    a.mean = s / static_cast<double>(values.size());
    a.frac_below_2 = static_cast<double>(b2) / static_cast<double>(values.size());
    a.frac_below_5 = static_cast<double>(b5) / static_cast<double>(values.size());
    return a;
}

MetricReport build_metric_report(const std::vector<std::string>& ids,
                                 const std::vector<double>& lrmsd_values,
                                 const std::vector<double>& cd_values) {
    if (ids.size() != lrmsd_values.size() || ids.size() != cd_values.size())
        throw ShapeError("metric report: per-complex list sizes differ");
    MetricReport r;
    r.ids = ids;
    r.lrmsd_values = lrmsd_values;
    r.cd_values = cd_values;
    r.lrmsd_agg = percentile_report(lrmsd_values);
    r.cd_agg = percentile_report(cd_values);
    return r;
}

std::string metric_table_tsv(const MetricReport& report) {
    std::ostringstream ss;
    ss << "metric\t25%\t50%\t75%\tMean\t2A\t5A\n";
    auto row = [&](const char* name, const MetricAggregate& a) {
        ss << name << '\t' << g17(a.p25) << '\t' << g17(a.p50) << '\t' << g17(a.p75) << '\t'
           << g17(a.mean) << '\t' << g17(a.frac_below_2) << '\t' << g17(a.frac_below_5) << '\n';
    };
    row("lrmsd", report.lrmsd_agg);
    row("cd", report.cd_agg);
    return ss.str();
}

} // namespace curvebind
