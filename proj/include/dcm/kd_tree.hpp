#ifndef DCM_KD_TREE_HPP
#define DCM_KD_TREE_HPP

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

#include "dcm/types.hpp"

namespace dcm {

template <typename Scalar>
inline Scalar squared_distance(const Scalar* a, const Scalar* b) {
    const Scalar dx = a[0] - b[0];
    const Scalar dy = a[1] - b[1];
    const Scalar dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

/// Static 3D kd-tree. All queries order candidates lexicographically by
/// (squared distance, index), so results are deterministic under ties.
template <typename Scalar>
class KdTree {
public:
    explicit KdTree(const PointsT<Scalar>& points) : points_(points) {
        order_.resize(points_.rows());
        std::iota(order_.begin(), order_.end(), Index{0});
        if (!order_.empty()) build(0, static_cast<Index>(order_.size()));
    }

    Index size() const { return static_cast<Index>(points_.rows()); }

    /// Nearest point to q; {-1, inf} on an empty tree.
    std::pair<Index, Scalar> nearest(const Scalar* q) const {
        Candidate best{std::numeric_limits<Scalar>::infinity(), -1};
        if (!nodes_.empty()) nearest_rec(0, q, best);
        return {best.index, best.dist};
    }

    /// The k smallest (distance, index) pairs, skipping `exclude`; ascending.
    std::vector<std::pair<Scalar, Index>> knn(const Scalar* q, Index k, Index exclude = -1) const {
        std::priority_queue<Candidate> heap;  // max-heap on (dist, index)
        if (!nodes_.empty() && k > 0) knn_rec(0, q, k, exclude, heap);
        std::vector<std::pair<Scalar, Index>> out;
        out.reserve(heap.size());
        while (!heap.empty()) {
            out.emplace_back(heap.top().dist, heap.top().index);
            heap.pop();
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

    /// Indices with squared distance <= radius^2, ascending by index.
    std::vector<Index> radius(const Scalar* q, Scalar radius) const {
        std::vector<Index> out;
        if (!nodes_.empty()) radius_rec(0, q, radius * radius, out);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    static constexpr Index kLeafSize = 8;

    struct Node {
        Index begin = 0, end = 0;
        int axis = -1;  // -1 marks a leaf
        Scalar split = 0;
        Index left = -1, right = -1;
    };

    struct Candidate {
        Scalar dist;
        Index index;
        bool operator<(const Candidate& o) const {
            return dist < o.dist || (dist == o.dist && index < o.index);
        }
    };

    Index build(Index begin, Index end) {
        const Index id = static_cast<Index>(nodes_.size());
        nodes_.push_back(Node{begin, end});
        if (end - begin <= kLeafSize) return id;

        Eigen::Matrix<Scalar, 1, 3> lo = points_.row(order_[begin]);
        Eigen::Matrix<Scalar, 1, 3> hi = lo;
        for (Index i = begin + 1; i < end; ++i) {
            lo = lo.cwiseMin(points_.row(order_[i]));
            hi = hi.cwiseMax(points_.row(order_[i]));
        }
        int axis = 0;
        (hi - lo).maxCoeff(&axis);
        const Index mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](Index a, Index b) { return points_(a, axis) < points_(b, axis); });
        const Scalar split = points_(order_[mid], axis);
        const Index left = build(begin, mid);
        const Index right = build(mid, end);
        Node& node = nodes_[id];
        node.axis = axis;
        node.split = split;
        node.left = left;
        node.right = right;
        return id;
    }

    const Scalar* point(Index i) const { return points_.data() + 3 * static_cast<std::ptrdiff_t>(i); }

    void nearest_rec(Index id, const Scalar* q, Candidate& best) const {
        const Node& node = nodes_[id];
        if (node.axis < 0) {
            for (Index k = node.begin; k < node.end; ++k) {
                Candidate c{squared_distance(q, point(order_[k])), order_[k]};
                if (c < best) best = c;
            }
            return;
        }
        const Scalar delta = q[node.axis] - node.split;
        const Index first = delta < 0 ? node.left : node.right;
        const Index second = delta < 0 ? node.right : node.left;
        nearest_rec(first, q, best);
        if (delta * delta <= best.dist) nearest_rec(second, q, best);
    }

    void knn_rec(Index id, const Scalar* q, Index k, Index exclude, std::priority_queue<Candidate>& heap) const {
        const Node& node = nodes_[id];
        if (node.axis < 0) {
            for (Index m = node.begin; m < node.end; ++m) {
                const Index idx = order_[m];
                if (idx == exclude) continue;
                Candidate c{squared_distance(q, point(idx)), idx};
                if (static_cast<Index>(heap.size()) < k) {
                    heap.push(c);
                } else if (c < heap.top()) {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        const Scalar delta = q[node.axis] - node.split;
        const Index first = delta < 0 ? node.left : node.right;
        const Index second = delta < 0 ? node.right : node.left;
        knn_rec(first, q, k, exclude, heap);
        if (static_cast<Index>(heap.size()) < k || delta * delta <= heap.top().dist)
            knn_rec(second, q, k, exclude, heap);
    }

    void radius_rec(Index id, const Scalar* q, Scalar r2, std::vector<Index>& out) const {
        const Node& node = nodes_[id];
        if (node.axis < 0) {
            for (Index m = node.begin; m < node.end; ++m) {
                if (squared_distance(q, point(order_[m])) <= r2) out.push_back(order_[m]);
            }
            return;
        }
        const Scalar delta = q[node.axis] - node.split;
        const Index first = delta < 0 ? node.left : node.right;
        const Index second = delta < 0 ? node.right : node.left;
        radius_rec(first, q, r2, out);
        if (delta * delta <= r2) radius_rec(second, q, r2, out);
    }

    PointsT<Scalar> points_;
    std::vector<Index> order_;
    std::vector<Node> nodes_;
};

}  // namespace dcm

#endif  // DCM_KD_TREE_HPP
