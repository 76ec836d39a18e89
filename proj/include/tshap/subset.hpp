#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tshap/errors.hpp"

namespace tshap {

/// An ordered set of coordinate indices in [0, d). Used to address marginal
/// and conditional blocks of an input model. Internally 0-based; report
/// formats print 1-based labels.
class Subset {
public:
    Subset() = default;

    Subset(int d, std::vector<int> members) : d_(d), idx_(std::move(members)) {
        std::sort(idx_.begin(), idx_.end());
        idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
        if (d_ <= 0 || d_ > 31) throw ArgumentError("Subset: dimension must be in [1,31]");
        for (int i : idx_) {
            if (i < 0 || i >= d_) throw ArgumentError("Subset: index out of range");
            mask_ |= (1u << i);
        }
    }

    static Subset from_mask(int d, std::uint32_t mask) {
        std::vector<int> m;
        for (int i = 0; i < d; ++i)
            if (mask & (1u << i)) m.push_back(i);
        return Subset(d, std::move(m));
    }

    static Subset full(int d) { return from_mask(d, (d >= 31) ? ~0u : ((1u << d) - 1u)); }
    static Subset empty_set(int d) { return Subset(d, {}); }
    static Subset single(int d, int i) { return Subset(d, {i}); }

    int dim() const { return d_; }
    int size() const { return static_cast<int>(idx_.size()); }
    bool empty() const { return idx_.empty(); }
    bool is_full() const { return size() == d_; }
    bool proper() const { return !empty() && !is_full(); }
    std::uint32_t mask() const { return mask_; }
    const std::vector<int>& members() const { return idx_; }

    bool contains(int i) const { return (mask_ >> i) & 1u; }

    Subset complement() const {
        std::vector<int> m;
        for (int i = 0; i < d_; ++i)
            if (!contains(i)) m.push_back(i);
        return Subset(d_, std::move(m));
    }

    Subset with(int i) const {
        auto m = idx_;
        m.push_back(i);
        return Subset(d_, std::move(m));
    }

    /// Extract the coordinates of this subset from a full d-vector.
    Eigen::VectorXd gather(const Eigen::VectorXd& x) const {
        Eigen::VectorXd out(size());
        for (int k = 0; k < size(); ++k) out[k] = x[idx_[k]];
        return out;
    }

    /// Write subset coordinates into the matching positions of a full vector.
    void scatter(const Eigen::VectorXd& xv, Eigen::VectorXd& x) const {
        for (int k = 0; k < size(); ++k) x[idx_[k]] = xv[k];
    }

    /// Assemble a full vector from values on this subset and its complement.
    Eigen::VectorXd assemble(const Eigen::VectorXd& x_self, const Eigen::VectorXd& x_comp) const {
        Eigen::VectorXd x(d_);
        scatter(x_self, x);
        complement().scatter(x_comp, x);
        return x;
    }

    bool operator==(const Subset& o) const { return d_ == o.d_ && mask_ == o.mask_; }

    std::string to_string() const {
        std::string s = "{";
        for (size_t k = 0; k < idx_.size(); ++k) {
            if (k) s += ",";
            s += std::to_string(idx_[k] + 1);
        }
        return s + "}";
    }

private:
    int d_ = 0;
    std::vector<int> idx_;
    std::uint32_t mask_ = 0;
};

/// All proper nonempty subsets of [0,d), ordered by increasing bitmask.
inline std::vector<Subset> proper_subsets(int d) {
    if (d < 1 || d > 20) throw ArgumentError("proper_subsets: d must be in [1,20]");
    std::vector<Subset> out;
    const std::uint32_t fullm = (1u << d) - 1u;
    for (std::uint32_t m = 1; m < fullm; ++m) out.push_back(Subset::from_mask(d, m));
    return out;
}

} // namespace tshap
