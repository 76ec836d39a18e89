#include "tshap/knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tshap/errors.hpp"

namespace tshap {

namespace {
constexpr int kLeafSize = 24;
}

/// Running set of the k best (dist2, index) pairs, kept sorted ascending.
/// Lexicographic order on (dist2, index) makes tie-breaking deterministic.
struct KnnIndex::Best {
    int k;
    std::vector<std::pair<double, int>> heap; // sorted ascending, size <= k

    explicit Best(int k_) : k(k_) { heap.reserve(k_); }

    double worst() const {
        return heap.size() < static_cast<size_t>(k) ? std::numeric_limits<double>::infinity()
                                                    : heap.back().first;
    }

    void offer(double d2, int idx) {
        const std::pair<double, int> cand{d2, idx};
        if (heap.size() == static_cast<size_t>(k) && !(cand < heap.back())) return;
        auto pos = std::lower_bound(heap.begin(), heap.end(), cand);
        heap.insert(pos, cand);
        if (heap.size() > static_cast<size_t>(k)) heap.pop_back();
    }
};

KnnIndex::KnnIndex(const Eigen::MatrixXd& points, const Subset& v) : v_(v) {
    n_ = static_cast<int>(points.rows());
    m_ = v.size();
    if (n_ < 1) throw ArgumentError("KnnIndex: needs at least one point");
    if (m_ < 1) throw ArgumentError("KnnIndex: subspace must be nonempty");
    if (v.dim() != points.cols()) throw ArgumentError("KnnIndex: subset dimension mismatch");
    proj_.resize(n_, m_);
    const auto& mem = v.members();
    for (int j = 0; j < m_; ++j) proj_.col(j) = points.col(mem[j]);
    order_.resize(n_);
    for (int i = 0; i < n_; ++i) order_[i] = i;
    nodes_.reserve(2 * (n_ / kLeafSize + 2));
    nodes_.emplace_back();
    build(0, 0, n_, 0);
}

void KnnIndex::build(int node, int begin, int end, int depth) {
    Node& nd = nodes_[node];
    nd.begin = begin;
    nd.end = end;
    nd.lo.resize(m_);
    nd.hi.resize(m_);
    nd.lo.setConstant(std::numeric_limits<double>::infinity());
    nd.hi.setConstant(-std::numeric_limits<double>::infinity());
    for (int i = begin; i < end; ++i) {
        for (int j = 0; j < m_; ++j) {
            const double vj = proj_(order_[i], j);
            nd.lo[j] = std::min(nd.lo[j], vj);
            nd.hi[j] = std::max(nd.hi[j], vj);
        }
    }
    if (end - begin <= kLeafSize) return;
    // Split on the widest axis at the median; (value, index) comparisons keep
    // the partition deterministic under duplicate coordinates.
    int axis = 0;
    double width = -1.0;
    for (int j = 0; j < m_; ++j) {
        const double w = nd.hi[j] - nd.lo[j];
        if (w > width) {
            width = w;
            axis = j;
        }
    }
    if (!(width > 0.0)) return; // all points identical in this subspace
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                         const double va = proj_(a, axis), vb = proj_(b, axis);
                         return va < vb || (va == vb && a < b);
                     });
    nd.axis = axis;
    nd.split = proj_(order_[mid], axis);
    const int left = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_.emplace_back();
    nodes_[node].left = left;
    nodes_[node].right = left + 1;
    build(left, begin, mid, depth + 1);
    build(left + 1, mid, end, depth + 1);
}

double KnnIndex::dist2(int idx, const Eigen::VectorXd& q) const {
    return (proj_.row(idx).transpose() - q).squaredNorm();
}

void KnnIndex::search(int node, const Eigen::VectorXd& q, Best& best) const {
    const Node& nd = nodes_[node];
    if (nd.axis < 0) {
        for (int i = nd.begin; i < nd.end; ++i) {
            const int idx = order_[i];
            best.offer(dist2(idx, q), idx);
        }
        return;
    }
    const int near = q[nd.axis] <= nd.split ? nd.left : nd.right;
    const int far = near == nd.left ? nd.right : nd.left;
    search(near, q, best);
    // Lower bound of the far box; visit on <= so equal-distance candidates
    // with smaller indices are never pruned away.
    const Node& fb = nodes_[far];
    double lb = 0.0;
    for (int j = 0; j < m_; ++j) {
        double dj = 0.0;
        if (q[j] < fb.lo[j]) dj = fb.lo[j] - q[j];
        else if (q[j] > fb.hi[j]) dj = q[j] - fb.hi[j];
        lb += dj * dj;
    }
    if (lb <= best.worst()) search(far, q, best);
}

std::vector<int> KnnIndex::query(int l, int k) const {
    if (l < 0 || l >= n_) throw ArgumentError("KnnIndex::query: point index out of range");
    if (k < 1 || k > n_) throw ArgumentError("KnnIndex::query: k must be in [1, N]");
    const Eigen::VectorXd q = proj_.row(l).transpose();
    Best best(k);
    search(0, q, best);
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) out[i] = best.heap[i].second;
    return out;
}

std::vector<int> KnnIndex::query_brute_force(int l, int k) const {
    if (l < 0 || l >= n_) throw ArgumentError("KnnIndex::query_brute_force: bad point index");
    if (k < 1 || k > n_) throw ArgumentError("KnnIndex::query_brute_force: k must be in [1, N]");
    const Eigen::VectorXd q = proj_.row(l).transpose();
    std::vector<std::pair<double, int>> all(n_);
    for (int i = 0; i < n_; ++i) all[i] = {dist2(i, q), i};
    std::partial_sort(all.begin(), all.begin() + k, all.end());
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) out[i] = all[i].second;
    return out;
}

} // namespace tshap
