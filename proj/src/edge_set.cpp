#include "dcm/edge_set.hpp"

#include <algorithm>

namespace dcm {

EdgeSet::EdgeSet(const std::vector<std::vector<Index>>& lists) {
    offsets_.reserve(lists.size() + 1);
    offsets_.push_back(0);
    for (const auto& list : lists) {
        std::vector<Index> sorted = list;
        std::sort(sorted.begin(), sorted.end());
        targets_.insert(targets_.end(), sorted.begin(), sorted.end());
        offsets_.push_back(static_cast<Index>(targets_.size()));
    }
    const Index n = vertex_count();
    for (Index t : targets_) {
        if (t < 0 || t >= n) throw ValidationError("edge target " + std::to_string(t) + " out of range");
    }
}

EdgeSet::EdgeSet(std::vector<Index> offsets, std::vector<Index> targets)
    : offsets_(std::move(offsets)), targets_(std::move(targets)) {
    if (offsets_.empty() || offsets_.front() != 0 || offsets_.back() != static_cast<Index>(targets_.size()))
        throw ValidationError("malformed edge offsets");
    const Index n = vertex_count();
    for (Index i = 0; i < n; ++i) {
        if (offsets_[i + 1] < offsets_[i]) throw ValidationError("edge offsets not monotone");
        std::sort(targets_.begin() + offsets_[i], targets_.begin() + offsets_[i + 1]);
    }
    for (Index t : targets_) {
        if (t < 0 || t >= n) throw ValidationError("edge target " + std::to_string(t) + " out of range");
    }
}

std::vector<std::vector<Index>> EdgeSet::to_lists() const {
    std::vector<std::vector<Index>> lists(vertex_count());
    for (Index i = 0; i < vertex_count(); ++i) {
        auto nb = neighbors(i);
        lists[i].assign(nb.begin(), nb.end());
    }
    return lists;
}

bool EdgeSet::is_symmetric() const {
    for (Index i = 0; i < vertex_count(); ++i) {
        for (Index j : neighbors(i)) {
            auto back = neighbors(j);
            if (!std::binary_search(back.begin(), back.end(), i)) return false;
        }
    }
    return true;
}

Index EdgeSet::empty_count() const {
    Index count = 0;
    for (Index i = 0; i < vertex_count(); ++i) count += degree(i) == 0 ? 1 : 0;
    return count;
}

EdgeSet with_self_loop_fallback(const EdgeSet& edges) {
    if (edges.empty_count() == 0) return edges;
    std::vector<Index> offsets{0};
    std::vector<Index> targets;
    targets.reserve(edges.edge_count() + edges.empty_count());
    for (Index i = 0; i < edges.vertex_count(); ++i) {
        auto nb = edges.neighbors(i);
        if (nb.empty()) {
            targets.push_back(i);
        } else {
            targets.insert(targets.end(), nb.begin(), nb.end());
        }
        offsets.push_back(static_cast<Index>(targets.size()));
    }
    return EdgeSet(std::move(offsets), std::move(targets));
}

EdgeSet concatenate(std::span<const EdgeSet> parts) {
    std::vector<Index> offsets{0};
    std::vector<Index> targets;
    Index shift = 0;
    for (const auto& part : parts) {
        for (Index i = 0; i < part.vertex_count(); ++i) {
            for (Index j : part.neighbors(i)) targets.push_back(j + shift);
            offsets.push_back(static_cast<Index>(targets.size()));
        }
        shift += part.vertex_count();
    }
    return EdgeSet(std::move(offsets), std::move(targets));
}

}  // namespace dcm
