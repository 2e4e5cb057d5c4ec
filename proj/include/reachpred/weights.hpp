#pragma once

#include "reachpred/features.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace reachpred {

class FingerprintMismatch : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// FNV-1a over the newline-joined labels.
std::uint64_t label_fingerprint(const std::vector<std::string>& labels);

// Cost weights over normalized features: C = w . ranges.apply(phi).
struct WeightVector {
    std::vector<std::string> labels;
    Eigen::VectorXd values;
    FeatureRanges ranges;

    int size() const { return static_cast<int>(values.size()); }
    std::uint64_t fingerprint() const { return label_fingerprint(labels); }

    // Throws FingerprintMismatch unless the labels match exactly.
    void check_labels(const std::vector<std::string>& expected) const;

    double cost(const Eigen::VectorXd& raw_features) const;
    // Weights on raw features (w_f / range_f); the cost is affine in these.
    Eigen::VectorXd raw_weights() const;
};

}  // namespace reachpred
