#pragma once

#include <vector>

namespace mvmt {

/// Rank-based AU-ROC with midrank tie handling: the probability that a random
/// positive outranks a random negative, ties counted one half. Requires at
/// least one example of each class.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Mean binary cross-entropy of probability scores against labels, with the
/// same clamping as the training loss. Plain evaluation, no gradients.
double bce_value(const std::vector<double>& scores, const std::vector<int>& labels);

} // namespace mvmt
