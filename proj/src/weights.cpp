#include "reachpred/weights.hpp"

namespace reachpred {

std::uint64_t label_fingerprint(const std::vector<std::string>& labels) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](unsigned char c) {
        h ^= c;
        h *= 1099511628211ull;
    };
    for (const auto& l : labels) {
        for (unsigned char c : l) mix(c);
        mix('\n');
    }
    return h;
}

void WeightVector::check_labels(const std::vector<std::string>& expected) const {
    if (static_cast<int>(labels.size()) != size() || ranges.size() != size())
        throw FingerprintMismatch("weight vector is internally inconsistent");
    if (label_fingerprint(expected) != fingerprint() || expected != labels)
        throw FingerprintMismatch("weight vector was learned for a different feature set");
}

double WeightVector::cost(const Eigen::VectorXd& raw_features) const {
    return values.dot(ranges.apply(raw_features));
}

Eigen::VectorXd WeightVector::raw_weights() const {
    return values.cwiseProduct(ranges.scale());
}

}  // namespace reachpred
