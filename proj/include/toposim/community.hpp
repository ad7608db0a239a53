#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "toposim/detail/csv.hpp"
#include "toposim/detail/format.hpp"
#include "toposim/detail/rng.hpp"
#include "toposim/mapper.hpp"

namespace toposim {

struct CommunityPartition {
    std::map<int, int> assignment;  // node id -> community id, dense from 0
    double modularity = std::numeric_limits<double>::quiet_NaN();
    double gamma = 1.0;
};

namespace detail_community {

// Undirected weighted graph in adjacency-list form with explicit self-loop
// weights, as produced by Louvain aggregation. Degrees count self-loops
// twice; total weight m counts every edge (and self-loop) once.
struct WeightedGraph {
    std::size_t n = 0;
    std::vector<std::vector<std::pair<std::size_t, double>>> adj;  // neighbor, weight (no self)
    std::vector<double> self_loop;
    std::vector<double> degree;
    double m = 0.0;

    static WeightedGraph from_network(const MapperNetwork& net, bool weighted) {
        WeightedGraph g;
        g.n = net.nodes.size();
        g.adj.resize(g.n);
        g.self_loop.assign(g.n, 0.0);
        g.degree.assign(g.n, 0.0);
        std::unordered_map<int, std::size_t> idx;
        for (std::size_t i = 0; i < g.n; ++i) idx[net.nodes[i].node_id] = i;
        for (auto [u, v] : net.edges) {
            double w = 1.0;
            if (weighted) {
                const auto& mu = net.node_by_id(u).members;
                const auto& mv = net.node_by_id(v).members;
                std::size_t shared = 0;
                std::size_t a = 0, b = 0;
                while (a < mu.size() && b < mv.size()) {
                    if (mu[a] < mv[b]) ++a;
                    else if (mv[b] < mu[a]) ++b;
                    else { ++shared; ++a; ++b; }
                }
                w = static_cast<double>(shared);
            }
            std::size_t ui = idx.at(u), vi = idx.at(v);
            g.adj[ui].emplace_back(vi, w);
            g.adj[vi].emplace_back(ui, w);
            g.degree[ui] += w;
            g.degree[vi] += w;
            g.m += w;
        }
        return g;
    }
};

// Q = sum_c [ L_c / m - gamma (d_c / 2m)^2 ], L_c intra-community weight
// (self-loops once), d_c total degree in c.
inline double modularity_of(const WeightedGraph& g, const std::vector<std::size_t>& comm,
                            double gamma) {
    if (g.m <= 0.0) throw std::invalid_argument("modularity undefined: network has no edges");
    std::size_t nc = 0;
    for (std::size_t c : comm) nc = std::max(nc, c + 1);
    std::vector<double> intra(nc, 0.0), deg(nc, 0.0);
    for (std::size_t i = 0; i < g.n; ++i) {
        deg[comm[i]] += g.degree[i] + 2.0 * g.self_loop[i];
        intra[comm[i]] += g.self_loop[i];
        for (auto [j, w] : g.adj[i]) {
            if (comm[j] == comm[i] && j > i) intra[comm[i]] += w;
        }
    }
    double q = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
        double frac = deg[c] / (2.0 * g.m);
        q += intra[c] / g.m - gamma * frac * frac;
    }
    return q;
}

struct LocalMoveResult {
    std::vector<std::size_t> comm;
    bool improved = false;
};

// Phase one of Louvain: greedy best-gain moves over a seeded node order until
// a full pass moves nothing. Ties in gain go to the smallest community id.
inline LocalMoveResult local_moves(const WeightedGraph& g, detail::Rng& rng, double gamma) {
    LocalMoveResult res;
    res.comm.resize(g.n);
    std::iota(res.comm.begin(), res.comm.end(), std::size_t{0});

    std::vector<double> comm_tot(g.n);  // total degree per community
    for (std::size_t i = 0; i < g.n; ++i) comm_tot[i] = g.degree[i] + 2.0 * g.self_loop[i];

    std::vector<std::size_t> order(g.n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    const double two_m = 2.0 * g.m;
    std::map<std::size_t, double> k_in;  // community -> edge weight from current node
    bool any_move = false;
    bool moved = true;
    while (moved) {
        moved = false;
        for (std::size_t oi = 0; oi < g.n; ++oi) {
            std::size_t i = order[oi];
            std::size_t ci = res.comm[i];
            double ki = g.degree[i] + 2.0 * g.self_loop[i];

            k_in.clear();
            k_in[ci];  // staying is always a candidate
            for (auto [j, w] : g.adj[i]) k_in[res.comm[j]] += w;

            comm_tot[ci] -= ki;  // evaluate moves with i removed from its community
            std::size_t best_c = ci;
            double best_gain = k_in[ci] / g.m - gamma * comm_tot[ci] * ki / (two_m * g.m);
            // ordered iteration: ties resolve to the smallest community id
            for (const auto& [c, kc] : k_in) {
                if (c == ci) continue;
                double gain = kc / g.m - gamma * comm_tot[c] * ki / (two_m * g.m);
                if (gain > best_gain + 1e-12 && (best_c == ci || c < best_c || gain > best_gain)) {
                    best_gain = gain;
                    best_c = c;
                }
            }
            comm_tot[best_c] += ki;
            if (best_c != ci) {
                res.comm[i] = best_c;
                moved = true;
                any_move = true;
            }
        }
    }
    res.improved = any_move;
    return res;
}

inline WeightedGraph aggregate(const WeightedGraph& g, const std::vector<std::size_t>& comm,
                               std::vector<std::size_t>& relabel) {
    // dense relabel, preserving smallest-member order for determinism
    relabel.assign(g.n, 0);
    std::map<std::size_t, std::size_t> dense;
    for (std::size_t i = 0; i < g.n; ++i) dense.emplace(comm[i], 0);
    std::size_t next = 0;
    for (auto& [old_c, new_c] : dense) new_c = next++;
    for (std::size_t i = 0; i < g.n; ++i) relabel[i] = dense.at(comm[i]);

    WeightedGraph out;
    out.n = next;
    out.adj.resize(out.n);
    out.self_loop.assign(out.n, 0.0);
    out.degree.assign(out.n, 0.0);
    out.m = g.m;
    std::map<std::pair<std::size_t, std::size_t>, double> agg;
    for (std::size_t i = 0; i < g.n; ++i) {
        out.self_loop[relabel[i]] += g.self_loop[i];
        for (auto [j, w] : g.adj[i]) {
            if (j < i) continue;
            std::size_t a = relabel[i], b = relabel[j];
            if (a == b) {
                out.self_loop[a] += w;
            } else {
                if (a > b) std::swap(a, b);
                agg[{a, b}] += w;
            }
        }
    }
    for (const auto& [e, w] : agg) {
        out.adj[e.first].emplace_back(e.second, w);
        out.adj[e.second].emplace_back(e.first, w);
        out.degree[e.first] += w;
        out.degree[e.second] += w;
    }
    return out;
}

} // namespace detail_community

// Newman modularity of a node partition, unweighted edges by default
// (weighted uses shared-member counts).
inline double modularity(const MapperNetwork& net,
                         const std::map<int, int>& assignment, double gamma = 1.0,
                         bool weighted = false) {
    if (net.edges.empty())
        throw std::invalid_argument("modularity undefined: network has no edges");
    auto g = detail_community::WeightedGraph::from_network(net, weighted);
    std::vector<std::size_t> comm(net.nodes.size());
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
        auto it = assignment.find(net.nodes[i].node_id);
        if (it == assignment.end())
            throw std::invalid_argument("modularity: node " +
                                        std::to_string(net.nodes[i].node_id) +
                                        " missing from partition");
        if (it->second < 0) throw std::invalid_argument("modularity: negative community id");
        comm[i] = static_cast<std::size_t>(it->second);
    }
    return detail_community::modularity_of(g, comm, gamma);
}

// Two-phase Louvain. The seed fixes the node visit order; identical inputs
// give identical partitions. An edgeless network yields the singleton
// partition with undefined (NaN) modularity.
inline CommunityPartition louvain(const MapperNetwork& net, double gamma = 1.0,
                                  std::uint64_t seed = 0, bool weighted = false) {
    if (net.nodes.empty()) throw std::invalid_argument("louvain: empty network");
    CommunityPartition part;
    part.gamma = gamma;

    if (net.edges.empty()) {
        int c = 0;
        for (const MapperNode& node : net.nodes) part.assignment[node.node_id] = c++;
        return part;
    }

    detail::Rng rng(seed);
    auto g = detail_community::WeightedGraph::from_network(net, weighted);

    // node_comm[i]: community of original node i in the current hierarchy
    std::vector<std::size_t> node_comm(g.n);
    std::iota(node_comm.begin(), node_comm.end(), std::size_t{0});

    detail_community::WeightedGraph level = g;
    while (true) {
        auto moves = detail_community::local_moves(level, rng, gamma);
        if (!moves.improved) break;
        std::vector<std::size_t> relabel;
        level = detail_community::aggregate(level, moves.comm, relabel);
        for (std::size_t i = 0; i < g.n; ++i)
            node_comm[i] = relabel[moves.comm[node_comm[i]]];
        if (level.n <= 1) break;
    }

    // dense community ids ordered by smallest contained node id
    std::map<std::size_t, int> dense;
    for (std::size_t i = 0; i < g.n; ++i) dense.emplace(node_comm[i], 0);
    int next = 0;
    for (auto& [c, d] : dense) d = next++;
    std::vector<std::size_t> final_comm(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        final_comm[i] = static_cast<std::size_t>(dense.at(node_comm[i]));
        part.assignment[net.nodes[i].node_id] = dense.at(node_comm[i]);
    }
    part.modularity = detail_community::modularity_of(g, final_comm, gamma);
    return part;
}

inline std::string communities_csv(const CommunityPartition& part) {
    std::ostringstream out;
    out << "node_id,community\n";
    for (const auto& [node, comm] : part.assignment) out << node << ',' << comm << "\n";
    return out.str();
}

inline void write_communities_csv(const CommunityPartition& part, const std::string& path) {
    detail::write_text_file(path, communities_csv(part));
}

inline CommunityPartition read_communities_csv(const std::string& path) {
    auto lines = detail::read_lines(path);
    if (lines.empty() || lines[0] != "node_id,community")
        throw std::runtime_error(path + ": expected header node_id,community");
    CommunityPartition part;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        auto f = detail::split_csv_line(lines[li]);
        if (f.size() != 2)
            throw std::runtime_error(path + ": malformed row " + std::to_string(li + 1));
        part.assignment[static_cast<int>(detail::parse_int(f[0]))] =
            static_cast<int>(detail::parse_int(f[1]));
    }
    return part;
}

} // namespace toposim
