#pragma once

#include <vector>

#include <Eigen/Core>

#include "tshap/subset.hpp"

namespace tshap {

/// Exact nearest-neighbour search over the projections of N stored points
/// onto a coordinate subset. Queries are stored points; results are the k
/// pairwise-distinct indices ordered by (squared distance, index), so ties
/// resolve to the smallest original index. The kd-tree is an accelerator
/// only: results are identical to a brute-force scan.
class KnnIndex {
public:
    KnnIndex(const Eigen::MatrixXd& points, const Subset& v);

    int size() const { return n_; }
    int subspace_dim() const { return m_; }
    const Subset& subspace() const { return v_; }

    /// k nearest stored points to stored point l (0-based). Throws
    /// ArgumentError when k is not in [1, N].
    std::vector<int> query(int l, int k) const;

    /// Reference implementation used to validate the tree.
    std::vector<int> query_brute_force(int l, int k) const;

private:
    struct Node {
        int begin, end;      // index range in order_
        int axis = -1;       // -1 for leaf
        double split = 0.0;
        int left = -1, right = -1;
        Eigen::VectorXd lo, hi; // bounding box
    };

    struct Best; // scratch for a running k-best set

    void build(int node, int begin, int end, int depth);
    void search(int node, const Eigen::VectorXd& q, Best& best) const;
    double dist2(int idx, const Eigen::VectorXd& q) const;

    int n_ = 0, m_ = 0;
    Subset v_;
    Eigen::MatrixXd proj_; // N x |v| projected points
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

} // namespace tshap
