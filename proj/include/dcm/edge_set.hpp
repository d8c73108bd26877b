#ifndef DCM_EDGE_SET_HPP
#define DCM_EDGE_SET_HPP

#include <span>
#include <vector>

#include "dcm/types.hpp"

namespace dcm {

/// Directed per-vertex neighbor lists (center -> neighbor) stored in
/// compressed-row form. Neighbor lists are kept in ascending index order.
class EdgeSet {
public:
    EdgeSet() : offsets_{0} {}

    explicit EdgeSet(const std::vector<std::vector<Index>>& lists);

    EdgeSet(std::vector<Index> offsets, std::vector<Index> targets);

    Index vertex_count() const { return static_cast<Index>(offsets_.size()) - 1; }
    Index edge_count() const { return static_cast<Index>(targets_.size()); }

    std::span<const Index> neighbors(Index i) const {
        return {targets_.data() + offsets_[i], static_cast<std::size_t>(offsets_[i + 1] - offsets_[i])};
    }
    Index degree(Index i) const { return offsets_[i + 1] - offsets_[i]; }

    const std::vector<Index>& offsets() const { return offsets_; }
    const std::vector<Index>& targets() const { return targets_; }

    std::vector<std::vector<Index>> to_lists() const;

    /// True when j in N(i) <=> i in N(j).
    bool is_symmetric() const;

    /// Number of vertices with an empty neighbor list.
    Index empty_count() const;

    bool operator==(const EdgeSet& other) const = default;

private:
    std::vector<Index> offsets_;
    std::vector<Index> targets_;
};

/// Gives every vertex with an empty list a single self-loop so the
/// neighborhood mean of an edge convolution is defined.
EdgeSet with_self_loop_fallback(const EdgeSet& edges);

/// Disjoint union: vertices of `parts[k]` are shifted by the total vertex
/// count of parts[0..k).
EdgeSet concatenate(std::span<const EdgeSet> parts);

}  // namespace dcm

#endif  // DCM_EDGE_SET_HPP
