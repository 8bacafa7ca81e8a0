#include "bal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "bal/error.hpp"

namespace bal {

namespace {

void require_nonempty(std::span<const double> id_scores, std::span<const double> ood_scores,
                      const char* who) {
    if (id_scores.empty() || ood_scores.empty())
        fail_data(std::string(who) + ": score sets must be non-empty");
}

// Largest threshold with TPR >= 0.95: the k-th largest ID score for
// k = ceil(0.95 * n).
double tpr95_threshold(std::span<const double> id_scores) {
    std::vector<double> sorted(id_scores.begin(), id_scores.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::size_t n = sorted.size();
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(n)));
    return sorted[std::max<std::size_t>(k, 1) - 1];
}

double frac_at_least(std::span<const double> scores, double t) {
    std::size_t c = 0;
    for (double s : scores)
        if (s >= t) ++c;
    return static_cast<double>(c) / static_cast<double>(scores.size());
}

} // namespace

double fpr_at_95_tpr(std::span<const double> id_scores, std::span<const double> ood_scores) {
    require_nonempty(id_scores, ood_scores, "fpr_at_95_tpr");
    return frac_at_least(ood_scores, tpr95_threshold(id_scores));
}

double detection_error(std::span<const double> id_scores,
                       std::span<const double> ood_scores) {
    require_nonempty(id_scores, ood_scores, "detection_error");
    const double t = tpr95_threshold(id_scores);
    const double tpr = frac_at_least(id_scores, t);
    const double fpr = frac_at_least(ood_scores, t);
    return 0.5 * (1.0 - tpr) + 0.5 * fpr;
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
    require_nonempty(id_scores, ood_scores, "auroc");
    // average-rank Mann-Whitney; ties count one half
    struct Entry {
        double score;
        bool is_id;
    };
    std::vector<Entry> all;
    all.reserve(id_scores.size() + ood_scores.size());
    for (double s : id_scores) all.push_back({s, true});
    for (double s : ood_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(),
              [](const Entry& a, const Entry& b) { return a.score < b.score; });

    double rank_sum_id = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        // ranks i+1 .. j averaged over the tie group
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (all[k].is_id) rank_sum_id += avg_rank;
        i = j;
    }
    const double n_id = static_cast<double>(id_scores.size());
    const double n_ood = static_cast<double>(ood_scores.size());
    const double u = rank_sum_id - n_id * (n_id + 1.0) / 2.0;
    return u / (n_id * n_ood);
}

double aupr(std::span<const double> pos_scores, std::span<const double> neg_scores) {
    require_nonempty(pos_scores, neg_scores, "aupr");
    struct Entry {
        double score;
        bool is_pos;
    };
    std::vector<Entry> all;
    all.reserve(pos_scores.size() + neg_scores.size());
    for (double s : pos_scores) all.push_back({s, true});
    for (double s : neg_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(),
              [](const Entry& a, const Entry& b) { return a.score > b.score; });

    const double n_pos = static_cast<double>(pos_scores.size());
    double area = 0.0;
    double recall_prev = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        for (std::size_t k = i; k < j; ++k)
            (all[k].is_pos ? tp : fp) += 1;
        const double recall = static_cast<double>(tp) / n_pos;
        const double precision =
            static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j;
    }
    return area;
}

MetricsReport evaluate_scores(std::span<const double> id_scores,
                              std::span<const double> ood_scores) {
    require_nonempty(id_scores, ood_scores, "evaluate_scores");
    if (id_scores.size() != ood_scores.size())
        fail_data("evaluate_scores: ID and OOD sets must be the same size (" +
                  std::to_string(id_scores.size()) + " vs " +
                  std::to_string(ood_scores.size()) + ")");
    MetricsReport r;
    r.n_id = id_scores.size();
    r.n_ood = ood_scores.size();
    r.fpr95 = fpr_at_95_tpr(id_scores, ood_scores);
    r.det_err = detection_error(id_scores, ood_scores);
    r.auroc = auroc(id_scores, ood_scores);
    r.aupr_in = aupr(id_scores, ood_scores);
    // OOD as the positive class: negate so that higher still means positive
    std::vector<double> neg_id(id_scores.size()), neg_ood(ood_scores.size());
    for (std::size_t i = 0; i < id_scores.size(); ++i) neg_id[i] = -id_scores[i];
    for (std::size_t i = 0; i < ood_scores.size(); ++i) neg_ood[i] = -ood_scores[i];
    r.aupr_out = aupr(neg_ood, neg_id);
    return r;
}

void write_report_csv(std::span<const DetectorReportRow> rows, double cls_accuracy,
                      const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail_data("cannot open for write: " + path);
    f << "detector,cls_acc,det_err,fpr95,auroc,aupr_in,aupr_out,n_id,n_ood\n";
    char buf[512];
    for (const DetectorReportRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%zu\n",
                      row.detector.c_str(), cls_accuracy, row.metrics.det_err,
                      row.metrics.fpr95, row.metrics.auroc, row.metrics.aupr_in,
                      row.metrics.aupr_out, row.metrics.n_id, row.metrics.n_ood);
        f << buf;
    }
    if (!f) fail_data("write failed: " + path);
}

std::string format_report_table(std::span<const DetectorReportRow> rows,
                                double cls_accuracy) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-14s %8s %8s %8s %8s %8s %8s\n", "Detector",
                  "Cls Acc", "Det Err", "FPR95", "AUROC", "AUPR_in", "AUPR_out");
    out += buf;
    for (const DetectorReportRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%-14s %8.2f %8.2f %8.2f %8.2f %8.2f %8.2f\n",
                      row.detector.c_str(), 100.0 * cls_accuracy,
                      100.0 * row.metrics.det_err, 100.0 * row.metrics.fpr95,
                      100.0 * row.metrics.auroc, 100.0 * row.metrics.aupr_in,
                      100.0 * row.metrics.aupr_out);
        out += buf;
    }
    return out;
}

} // namespace bal
