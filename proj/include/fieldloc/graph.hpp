#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fieldloc/factors.hpp"
#include "fieldloc/geometry.hpp"

namespace fieldloc {

struct GraphNode {
    int id = 0;
    double stamp = 0.0;
    Pose6D state;
    std::optional<int> row_hint;
};

/// Cross-row neighbour discovery parameters.
struct MrfSearch {
    double row_spacing = 1.5;
    double radius_factor = 2.0;  ///< fallback radius = radius_factor * row_spacing
    int temporal_exclusion = 5;  ///< fallback ignores ids within +-this of the query
};

class PoseGraph {
public:
    /// Appends a node; throws InvalidArgument unless stamp is strictly newer
    /// than the last node's.
    int add_node(double stamp, const Pose6D& initial, std::optional<int> row_hint = std::nullopt);

    /// Throws InvalidArgument if the factor references a missing node or a
    /// binary kind has identical endpoints.
    void add_factor(Factor f);

    /// Adds an MRF factor unless the unordered pair is already linked.
    bool add_mrf_factor(Factor f);
    bool has_mrf(int i, int j) const;

    const std::vector<GraphNode>& nodes() const { return nodes_; }
    const std::vector<Factor>& factors() const { return factors_; }
    const GraphNode& node(int id) const { return nodes_.at(static_cast<size_t>(id)); }
    GraphNode& node(int id) { return nodes_.at(static_cast<size_t>(id)); }
    int size() const { return static_cast<int>(nodes_.size()); }
    bool empty() const { return nodes_.empty(); }

    void set_state(int id, const Pose6D& s) { node(id).state = s; }

    int frozen_below() const { return frozen_below_; }
    void set_frozen_below(int id);

    bool operator==(const PoseGraph&) const = default;

private:
    std::vector<GraphNode> nodes_;
    std::vector<Factor> factors_;
    std::set<std::pair<int, int>> mrf_pairs_;
    int frozen_below_ = 0;
};

/// Temporal neighbours i-1, i+1 plus at most one cross-row neighbour per side:
/// by row_hint when node i has one, otherwise by radius search among nodes
/// offset at least half a row spacing sideways from node i's heading line.
std::vector<int> mrf_neighbors(const PoseGraph& g, int i, const MrfSearch& search = {});

/// Sum of e^T info e over every factor.
double total_cost(const PoseGraph& g);

/// NODE/FACTOR line dump, 17 significant digits.
void write_graph(std::ostream& out, const PoseGraph& g);
PoseGraph read_graph(std::istream& in);
void write_graph_file(const std::string& path, const PoseGraph& g);
PoseGraph read_graph_file(const std::string& path);

}  // namespace fieldloc
