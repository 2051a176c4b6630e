#include "fieldloc/graph.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "fieldloc/errors.hpp"
#include "fieldloc/text_io.hpp"

namespace fieldloc {

int PoseGraph::add_node(double stamp, const Pose6D& initial, std::optional<int> row_hint) {
    if (!std::isfinite(stamp)) throw InvalidArgument("add_node: non-finite stamp");
    if (!nodes_.empty() && !(stamp > nodes_.back().stamp)) {
        throw InvalidArgument("add_node: stamp " + text::fmt(stamp) + " not after " +
                              text::fmt(nodes_.back().stamp));
    }
    if (!initial.t.allFinite() || !initial.r.allFinite()) throw InvalidArgument("add_node: non-finite state");
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({id, stamp, Pose6D(initial.t, normalize_rotation(initial.r)), row_hint});
    return id;
}

void PoseGraph::add_factor(Factor f) {
    auto exists = [&](int id) { return id >= 0 && id < size(); };
    if (!exists(f.node_i)) throw InvalidArgument("add_factor: unknown node " + std::to_string(f.node_i));
    if (is_binary(f.kind)) {
        if (!f.node_j || !exists(*f.node_j)) throw InvalidArgument("add_factor: binary factor needs node_j");
        if (*f.node_j == f.node_i) throw InvalidArgument("add_factor: binary factor with identical nodes");
    } else if (f.node_j) {
        throw InvalidArgument("add_factor: unary factor with node_j");
    }
    if (f.kind == FactorKind::MRF) {
        mrf_pairs_.emplace(std::min(f.node_i, *f.node_j), std::max(f.node_i, *f.node_j));
    }
    factors_.push_back(std::move(f));
}

bool PoseGraph::add_mrf_factor(Factor f) {
    if (f.kind != FactorKind::MRF || !f.node_j) throw InvalidArgument("add_mrf_factor: not an MRF factor");
    if (has_mrf(f.node_i, *f.node_j)) return false;
    add_factor(std::move(f));
    return true;
}

bool PoseGraph::has_mrf(int i, int j) const {
    return mrf_pairs_.count({std::min(i, j), std::max(i, j)}) > 0;
}

void PoseGraph::set_frozen_below(int id) {
    if (id < 0 || id > size()) throw InvalidArgument("set_frozen_below: watermark out of range");
    frozen_below_ = id;
}

std::vector<int> mrf_neighbors(const PoseGraph& g, int i, const MrfSearch& search) {
    std::vector<int> out;
    if (i < 0 || i >= g.size()) throw InvalidArgument("mrf_neighbors: unknown node");
    if (i > 0) out.push_back(i - 1);
    if (i + 1 < g.size()) out.push_back(i + 1);

    const GraphNode& q = g.node(i);
    const Eigen::Vector2d p = q.state.t.head<2>();
    constexpr double inf = std::numeric_limits<double>::infinity();
    int best[2] = {-1, -1};
    double best_d[2] = {inf, inf};

    if (q.row_hint) {
        for (const GraphNode& n : g.nodes()) {
            if (!n.row_hint) continue;
            const int dr = *n.row_hint - *q.row_hint;
            if (dr != -1 && dr != 1) continue;
            const int side = dr < 0 ? 0 : 1;
            const double d = (n.state.t.head<2>() - p).norm();
            if (d < best_d[side]) {
                best_d[side] = d;
                best[side] = n.id;
            }
        }
    } else {
        const double radius = search.radius_factor * search.row_spacing;
        const Eigen::Vector3d heading = so3_exp(q.state.r).col(0);
        for (const GraphNode& n : g.nodes()) {
            if (std::abs(n.id - i) <= search.temporal_exclusion) continue;
            const Eigen::Vector2d off = n.state.t.head<2>() - p;
            const double d = off.norm();
            if (d > radius) continue;
            // Lateral offset from the heading line; same-row nodes have none.
            const double cross = heading.x() * off.y() - heading.y() * off.x();
            if (std::abs(cross) < 0.5 * search.row_spacing) continue;
            const int side = cross < 0.0 ? 0 : 1;
            if (d < best_d[side]) {
                best_d[side] = d;
                best[side] = n.id;
            }
        }
    }
    for (int b : best) {
        if (b >= 0 && std::abs(b - i) > 1) out.push_back(b);
    }
    return out;
}

double total_cost(const PoseGraph& g) {
    std::vector<Transform> X;
    X.reserve(g.nodes().size());
    for (const auto& n : g.nodes()) X.push_back(to_transform(n.state));
    double sum = 0.0;
    for (const Factor& f : g.factors()) {
        const Transform* xj = f.node_j ? &X[static_cast<size_t>(*f.node_j)] : nullptr;
        sum += weighted_error(f, X[static_cast<size_t>(f.node_i)], xj);
    }
    return sum;
}

void write_graph(std::ostream& out, const PoseGraph& g) {
    for (const GraphNode& n : g.nodes()) {
        out << "NODE " << n.id << ' ' << text::fmt(n.stamp);
        const Vector6d v = n.state.vec();
        for (int k = 0; k < 6; ++k) out << ' ' << text::fmt(v[k]);
        out << '\n';
    }
    for (const Factor& f : g.factors()) {
        out << "FACTOR " << to_string(f.kind) << ' ' << f.node_i;
        if (f.node_j) out << ' ' << *f.node_j;
        for (int k = 0; k < 6; ++k) out << ' ' << text::fmt(f.z[k]);
        for (int r = 0; r < 6; ++r) {
            for (int c = 0; c < 6; ++c) out << ' ' << text::fmt(f.info(r, c));
        }
        out << '\n';
    }
}

PoseGraph read_graph(std::istream& in) {
    PoseGraph g;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tok = text::split(line);
        if (tok.empty()) continue;
        const std::string where = "graph line " + std::to_string(lineno);
        try {
            if (tok[0] == "NODE") {
                if (tok.size() != 9) throw FormatError(where + ": NODE needs 8 fields");
                const long long id = text::parse_int(tok[1], "node id");
                if (id != g.size()) throw FormatError(where + ": node ids must be consecutive from 0");
                Vector6d v;
                for (int k = 0; k < 6; ++k) v[k] = text::parse_double(tok[3 + k], "node state");
                g.add_node(text::parse_double(tok[2], "node stamp"), Pose6D::from_vec(v));
            } else if (tok[0] == "FACTOR") {
                const auto kind = parse_factor_kind(tok[1]);
                if (!kind) throw FormatError(where + ": unknown factor kind '" + std::string(tok[1]) + "'");
                const size_t ids = is_binary(*kind) ? 2 : 1;
                if (tok.size() != 2 + ids + 6 + 36) throw FormatError(where + ": wrong field count");
                Factor f;
                f.kind = *kind;
                f.node_i = static_cast<int>(text::parse_int(tok[2], "factor node"));
                if (ids == 2) f.node_j = static_cast<int>(text::parse_int(tok[3], "factor node"));
                size_t at = 2 + ids;
                for (int k = 0; k < 6; ++k) f.z[k] = text::parse_double(tok[at++], "factor z");
                for (int r = 0; r < 6; ++r) {
                    for (int c = 0; c < 6; ++c) f.info(r, c) = text::parse_double(tok[at++], "factor info");
                }
                g.add_factor(std::move(f));
            } else {
                throw FormatError(where + ": unknown record '" + std::string(tok[0]) + "'");
            }
        } catch (const InvalidArgument& e) {
            throw FormatError(where + ": " + e.what());
        }
    }
    return g;
}

void write_graph_file(const std::string& path, const PoseGraph& g) {
    auto out = text::open_out(path);
    write_graph(out, g);
}

PoseGraph read_graph_file(const std::string& path) {
    auto in = text::open_in(path);
    return read_graph(in);
}

}  // namespace fieldloc
