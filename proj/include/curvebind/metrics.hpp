#pragma once

#include <string>
#include <vector>

#include "curvebind/tensor.hpp"

namespace curvebind {

// Raw-coordinate LRMSD, no alignment; poses are scored in the protein frame.
double lrmsd(const Tensor& pred, const Tensor& truth);

// distance between unweighted atom centroids
double centroid_distance(const Tensor& pred, const Tensor& truth);

struct MetricAggregate {
    double p25 = 0, p50 = 0, p75 = 0, mean = 0;
    double frac_below_2 = 0, frac_below_5 = 0;
};

// percentiles by linear interpolation between closest ranks; thresholds use
// strict <
MetricAggregate percentile_report(const std::vector<double>& values);

double percentile(std::vector<double> values, double p); // p in [0, 100]

struct MetricReport {
    std::vector<std::string> ids;
    std::vector<double> lrmsd_values;
    std::vector<double> cd_values;
    MetricAggregate lrmsd_agg;
    MetricAggregate cd_agg;
};

MetricReport build_metric_report(const std::vector<std::string>& ids,
                                 const std::vector<double>& lrmsd_values,
                                 const std::vector<double>& cd_values);

// TSV rows: metric, 25%, 50%, 75%, Mean, 2A, 5A
std::string metric_table_tsv(const MetricReport& report);

} // namespace curvebind
