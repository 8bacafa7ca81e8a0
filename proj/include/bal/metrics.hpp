#pragma once

#include <span>
#include <string>
#include <vector>

namespace bal {

// Convention throughout: ID is the positive class and higher score means more
// ID-like. Thresholds are the observed scores; a sample counts as positive at
// threshold t when score >= t.

// Fraction of OOD scores >= t*, where t* is the largest threshold with
// TPR >= 0.95 on the ID scores.
double fpr_at_95_tpr(std::span<const double> id_scores, std::span<const double> ood_scores);

// 0.5*(1-TPR) + 0.5*FPR evaluated at the same t* operating point.
double detection_error(std::span<const double> id_scores, std::span<const double> ood_scores);

// Rank (Mann-Whitney) formulation; ties count 1/2.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

// Area under the precision-recall curve by step-wise interpolation over
// descending distinct thresholds (average-precision convention).
double aupr(std::span<const double> pos_scores, std::span<const double> neg_scores);

struct MetricsReport {
    double fpr95 = 0.0;
    double det_err = 0.0;
    double auroc = 0.0;
    double aupr_in = 0.0;
    double aupr_out = 0.0;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
};

// Requires |id_scores| == |ood_scores| (evaluation keeps the two sets the same
// size).
MetricsReport evaluate_scores(std::span<const double> id_scores,
                              std::span<const double> ood_scores);

struct DetectorReportRow {
    std::string detector;
    MetricsReport metrics;
};

void write_report_csv(std::span<const DetectorReportRow> rows, double cls_accuracy,
                      const std::string& path);
// Aligned text table: detector rows, columns Cls Acc / Det Err / FPR95 / AUROC /
// AUPR_in / AUPR_out (percentages).
std::string format_report_table(std::span<const DetectorReportRow> rows,
                                double cls_accuracy);

} // namespace bal
