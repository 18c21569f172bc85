#include "mvmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvmt/errors.hpp"

namespace mvmt {

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.empty() || scores.size() != labels.size()) {
        raise(ErrorKind::Domain, "auroc needs equally sized, non-empty scores and labels");
    }
    std::size_t positives = 0, negatives = 0;
    for (int label : labels) {
        if (label == 1) {
            ++positives;
        } else if (label == 0) {
            ++negatives;
        } else {
            raise(ErrorKind::Domain, "auroc labels must be 0 or 1");
        }
    }
    if (positives == 0 || negatives == 0) {
        raise(ErrorKind::UndefinedMetric, "auroc undefined: need both classes, got " +
                                              std::to_string(positives) + " positives and " +
                                              std::to_string(negatives) + " negatives");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tie groups; ranks are 1-based
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) positive_rank_sum += midrank;
        }
        i = j + 1;
    }
    const double u = positive_rank_sum -
                     0.5 * static_cast<double>(positives) * static_cast<double>(positives + 1);
    return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

double bce_value(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.empty() || scores.size() != labels.size()) {
        raise(ErrorKind::Domain, "bce needs equally sized, non-empty scores and labels");
    }
    constexpr double kEps = 1e-7;
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double p = std::min(std::max(scores[i], kEps), 1.0 - kEps);
        total += labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
    }
    return total / static_cast<double>(scores.size());
}

} // namespace mvmt
