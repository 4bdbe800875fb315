#pragma once

#include <span>

namespace quarc {

// Probability that a random positive outranks a random negative, ties
// counting one half. Needs both classes.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Mean over positives (score-descending, ties in input order) of the
// precision at that positive's rank. Needs at least one positive.
double average_precision(std::span<const double> scores, std::span<const int> labels);

}  // namespace quarc
