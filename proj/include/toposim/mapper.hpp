#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "toposim/corpus.hpp"
#include "toposim/lens.hpp"
#include "toposim/similarity.hpp"

namespace toposim {

// One lens axis of the cover: R base intervals of width (max-min)/R whose
// centers tile [min, max], each expanded to gain times the base width.
// A zero-range axis degenerates to a single all-covering interval.
struct CoverAxis {
    double min = 0.0;
    double max = 0.0;
    int resolution = 1;
    bool degenerate = false;
    double base_width = 0.0;

    double center(int k) const {
        return min + (static_cast<double>(k) + 0.5) * base_width;
    }

    // interval indices containing value (inclusive bounds)
    void bins_for(double value, double gain, std::vector<int>& out) const {
        out.clear();
        if (degenerate) {
            out.push_back(0);
            return;
        }
        const double half = 0.5 * gain * base_width;
        // |value - center(k)| <= half  <=>  k in [lo, hi]
        double t = (value - min) / base_width - 0.5;
        double g2 = 0.5 * gain;
        int lo = static_cast<int>(std::ceil(t - g2));
        int hi = static_cast<int>(std::floor(t + g2));
        lo = std::max(lo, 0);
        hi = std::min(hi, resolution - 1);
        for (int k = lo; k <= hi; ++k)
            if (std::abs(value - center(k)) <= half) out.push_back(k);
        if (out.empty()) {
            // numerical edge: snap to the nearest interval
            int k = std::clamp(static_cast<int>(t + 0.5), 0, resolution - 1);
            out.push_back(k);
        }
    }
};

struct Cover {
    CoverAxis x;
    CoverAxis y;
    double gain = 2.0;
    int resolution = 1;

    int bins_x() const { return x.degenerate ? 1 : x.resolution; }
    int bins_y() const { return y.degenerate ? 1 : y.resolution; }
    int total_bins() const { return bins_x() * bins_y(); }
};

inline Cover build_cover(const LensCoordinates& lens, int resolution, double gain) {
    if (resolution < 1) throw std::invalid_argument("build_cover: resolution must be >= 1");
    if (gain <= 1.0) throw std::invalid_argument("build_cover: gain must be > 1");
    if (lens.coords.empty()) throw std::invalid_argument("build_cover: empty lens");

    Cover cover;
    cover.gain = gain;
    cover.resolution = resolution;
    for (int axis = 0; axis < 2; ++axis) {
        CoverAxis& a = (axis == 0) ? cover.x : cover.y;
        double mn = std::numeric_limits<double>::infinity();
        double mx = -std::numeric_limits<double>::infinity();
        for (const auto& c : lens.coords) {
            mn = std::min(mn, c[static_cast<std::size_t>(axis)]);
            mx = std::max(mx, c[static_cast<std::size_t>(axis)]);
        }
        a.min = mn;
        a.max = mx;
        a.resolution = resolution;
        if (mx - mn <= 0.0) {
            a.degenerate = true;
            a.base_width = 1.0;
            a.resolution = 1;
        } else {
            a.base_width = (mx - mn) / static_cast<double>(resolution);
        }
    }
    return cover;
}

// Functional cosine distance between corpus rows: 1 - (cos(i_a, i_b) + cos(t_a, t_b)) / 2.
// Rows carry unit vectors, so the cosines are plain dot products.
inline double functional_distance(const InteractionSet& set, std::size_t a, std::size_t b) {
    auto ia = set.if_row(a), ib = set.if_row(b);
    auto ta = set.then_row(a), tb = set.then_row(b);
    double ii = 0.0, tt = 0.0;
    for (std::size_t k = 0; k < ia.size(); ++k) {
        ii += ia[k] * ib[k];
        tt += ta[k] * tb[k];
    }
    return 1.0 - 0.5 * (ii + tt);
}

namespace detail_mapper {

// Single-linkage merge heights are exactly the minimum-spanning-tree edge
// weights; Prim gives them in O(s^2) without the full dendrogram machinery.
struct MstResult {
    std::vector<std::pair<std::size_t, std::size_t>> edges;  // local member indices
    std::vector<double> weights;                             // parallel to edges
};

template <typename DistanceFn>
MstResult prim_mst(std::size_t s, DistanceFn&& dist) {
    MstResult mst;
    if (s <= 1) return mst;
    std::vector<bool> in_tree(s, false);
    std::vector<double> best(s, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> best_from(s, 0);
    in_tree[0] = true;
    for (std::size_t j = 1; j < s; ++j) {
        best[j] = dist(0, j);
        best_from[j] = 0;
    }
    for (std::size_t step = 1; step < s; ++step) {
        std::size_t pick = s;
        double pick_w = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < s; ++j) {
            if (!in_tree[j] && best[j] < pick_w) {
                pick_w = best[j];
                pick = j;
            }
        }
        in_tree[pick] = true;
        mst.edges.emplace_back(best_from[pick], pick);
        mst.weights.push_back(pick_w);
        for (std::size_t j = 0; j < s; ++j) {
            if (!in_tree[j]) {
                double w = dist(pick, j);
                if (w < best[j]) {
                    best[j] = w;
                    best_from[j] = pick;
                }
            }
        }
    }
    return mst;
}

// First-gap cut: histogram the merge heights into hist_bins equal bins over
// [0, max]; the cutoff is the left edge of the first empty bin. No empty bin
// means a single cluster.
inline double first_gap_cutoff(const std::vector<double>& heights, int hist_bins) {
    if (heights.empty()) return 0.0;
    double mx = *std::max_element(heights.begin(), heights.end());
    if (mx <= 0.0) return std::numeric_limits<double>::infinity();  // all identical: one cluster
    std::vector<int> counts(static_cast<std::size_t>(hist_bins), 0);
    for (double h : heights) {
        auto b = static_cast<std::size_t>(std::min<double>(
            hist_bins - 1, std::floor(h / mx * static_cast<double>(hist_bins))));
        counts[b]++;
    }
    for (std::size_t b = 0; b < counts.size(); ++b) {
        if (counts[b] == 0)
            return static_cast<double>(b) * mx / static_cast<double>(hist_bins);
    }
    return std::numeric_limits<double>::infinity();
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

} // namespace detail_mapper

// Clusters one bin's members under functional cosine distance. Members are
// local corpus row indices; returned clusters hold the same indices, each
// cluster sorted ascending, clusters ordered by smallest member.
inline std::vector<std::vector<std::size_t>> cluster_bin(const InteractionSet& set,
                                                         const std::vector<std::size_t>& members,
                                                         int hist_bins = 10) {
    if (hist_bins < 1) throw std::invalid_argument("cluster_bin: hist_bins must be >= 1");
    const std::size_t s = members.size();
    if (s == 0) return {};
    if (s == 1) return {{members[0]}};

    auto dist = [&](std::size_t a, std::size_t b) {
        return functional_distance(set, members[a], members[b]);
    };
    detail_mapper::MstResult mst = detail_mapper::prim_mst(s, dist);
    double cutoff = detail_mapper::first_gap_cutoff(mst.weights, hist_bins);

    detail_mapper::UnionFind uf(s);
    for (std::size_t e = 0; e < mst.edges.size(); ++e) {
        if (mst.weights[e] < cutoff) uf.unite(mst.edges[e].first, mst.edges[e].second);
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < s; ++i) groups[uf.find(i)].push_back(members[i]);

    std::vector<std::vector<std::size_t>> clusters;
    clusters.reserve(groups.size());
    for (auto& [root, rows] : groups) {
        std::sort(rows.begin(), rows.end());
        clusters.push_back(std::move(rows));
    }
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return clusters;
}

struct MapperNode {
    int node_id = 0;
    std::vector<long long> members;  // interaction ids, sorted
    int bin_index = 0;               // x-major: bx * bins_y + by
    int cluster_index = 0;
    double mean_within = 0.0;
};

struct MapperParams {
    int resolution = 1;
    double gain = 2.0;
    int hist_bins = 10;
    std::string lens_provenance;
    int min_component_size = 1;
};

struct MapperNetwork {
    std::vector<MapperNode> nodes;                 // sorted by node_id
    std::vector<std::pair<int, int>> edges;        // u < v, sorted, unique
    MapperParams params;

    const MapperNode& node_by_id(int id) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                                   [](const MapperNode& n, int v) { return n.node_id < v; });
        if (it == nodes.end() || it->node_id != id)
            throw std::runtime_error("unknown node id " + std::to_string(id));
        return *it;
    }
};

inline MapperNetwork build_network(const InteractionSet& set, const LensCoordinates& lens,
                                   const Cover& cover, int hist_bins = 10) {
    if (lens.ids.size() != set.count())
        throw std::invalid_argument("build_network: lens does not match corpus");
    const std::size_t n = set.count();
    const int bx_n = cover.bins_x();
    const int by_n = cover.bins_y();

    // scatter rows into bins
    std::vector<std::vector<std::size_t>> bins(static_cast<std::size_t>(bx_n) *
                                               static_cast<std::size_t>(by_n));
    std::vector<int> xb, yb;
    for (std::size_t row = 0; row < n; ++row) {
        cover.x.bins_for(lens.coords[row][0], cover.gain, xb);
        cover.y.bins_for(lens.coords[row][1], cover.gain, yb);
        for (int ix : xb)
            for (int iy : yb)
                bins[static_cast<std::size_t>(ix) * static_cast<std::size_t>(by_n) +
                     static_cast<std::size_t>(iy)]
                    .push_back(row);
    }

    // per-interaction within similarity for node statistics
    std::vector<double> within(n);
    for (std::size_t row = 0; row < n; ++row) {
        auto iv = set.if_row(row);
        auto tv = set.then_row(row);
        double w = 0.0;
        for (std::size_t k = 0; k < iv.size(); ++k) w += iv[k] * tv[k];
        within[row] = std::clamp(w, -1.0, 1.0);
    }

    MapperNetwork net;
    net.params.hist_bins = hist_bins;
    net.params.gain = cover.gain;
    net.params.resolution = cover.resolution;
    net.params.lens_provenance = lens.provenance;

    std::map<std::vector<std::size_t>, int> seen;  // member rows -> node id
    for (std::size_t bin = 0; bin < bins.size(); ++bin) {
        if (bins[bin].empty()) continue;
        auto clusters = cluster_bin(set, bins[bin], hist_bins);
        for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
            auto& rows = clusters[ci];
            if (seen.count(rows)) continue;  // identical node already created
            int id = static_cast<int>(net.nodes.size());
            seen.emplace(rows, id);
            MapperNode node;
            node.node_id = id;
            node.bin_index = static_cast<int>(bin);
            node.cluster_index = static_cast<int>(ci);
            double wsum = 0.0;
            node.members.reserve(rows.size());
            for (std::size_t row : rows) {
                node.members.push_back(set.at(row).id);
                wsum += within[row];
            }
            node.mean_within = wsum / static_cast<double>(rows.size());
            net.nodes.push_back(std::move(node));
        }
    }

    // shared-member edges via an inverted row -> nodes index
    std::vector<std::vector<int>> nodes_of_row(n);
    for (const auto& [rows, id] : seen)
        for (std::size_t row : rows) nodes_of_row[row].push_back(id);
    std::vector<std::pair<int, int>> edges;
    for (std::size_t row = 0; row < n; ++row) {
        auto& ns = nodes_of_row[row];
        std::sort(ns.begin(), ns.end());
        for (std::size_t a = 0; a < ns.size(); ++a)
            for (std::size_t b = a + 1; b < ns.size(); ++b)
                edges.emplace_back(ns[a], ns[b]);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    net.edges = std::move(edges);
    return net;
}

struct FilterReport {
    struct RemovedComponent {
        std::vector<int> node_ids;
        std::size_t member_count = 0;  // distinct interactions across the component
    };
    std::vector<RemovedComponent> removed;
};

// Connected components of the node graph; component node ids are computed
// per network so callers can also use this for contiguity queries.
inline std::vector<std::vector<int>> connected_components(const MapperNetwork& net) {
    std::unordered_map<int, std::size_t> idx;
    for (std::size_t i = 0; i < net.nodes.size(); ++i) idx[net.nodes[i].node_id] = i;
    detail_mapper::UnionFind uf(net.nodes.size());
    for (auto [u, v] : net.edges) uf.unite(idx.at(u), idx.at(v));
    std::map<std::size_t, std::vector<int>> comps;
    for (std::size_t i = 0; i < net.nodes.size(); ++i)
        comps[uf.find(i)].push_back(net.nodes[i].node_id);
    std::vector<std::vector<int>> out;
    out.reserve(comps.size());
    for (auto& [root, ids] : comps) {
        std::sort(ids.begin(), ids.end());
        out.push_back(std::move(ids));
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

// Drops connected components with fewer than min_size nodes. Surviving nodes
// keep their original ids so downstream references stay valid.
inline MapperNetwork filter_small_components(const MapperNetwork& net, int min_size,
                                             FilterReport* report = nullptr) {
    if (min_size < 1) throw std::invalid_argument("filter_small_components: min_size must be >= 1");
    MapperNetwork out;
    out.params = net.params;
    out.params.min_component_size = min_size;
    if (min_size == 1) {
        out.nodes = net.nodes;
        out.edges = net.edges;
        return out;
    }
    auto comps = connected_components(net);
    std::unordered_set<int> keep;
    for (const auto& comp : comps) {
        if (static_cast<int>(comp.size()) >= min_size) {
            keep.insert(comp.begin(), comp.end());
        } else if (report) {
            FilterReport::RemovedComponent rc;
            rc.node_ids = comp;
            std::unordered_set<long long> members;
            for (int id : comp) {
                const MapperNode& node = net.node_by_id(id);
                members.insert(node.members.begin(), node.members.end());
            }
            rc.member_count = members.size();
            report->removed.push_back(std::move(rc));
        }
    }
    for (const MapperNode& node : net.nodes)
        if (keep.count(node.node_id)) out.nodes.push_back(node);
    for (auto [u, v] : net.edges)
        if (keep.count(u) && keep.count(v)) out.edges.emplace_back(u, v);
    return out;
}

} // namespace toposim
