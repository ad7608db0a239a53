#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "toposim/corpus.hpp"
#include "toposim/detail/format.hpp"

namespace toposim {

inline double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw std::invalid_argument("cosine: dimension mismatch");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        dot += u[k] * v[k];
        nu += u[k] * u[k];
        nv += v[k] * v[k];
    }
    if (nu < 1e-24 || nv < 1e-24)
        throw std::invalid_argument("cosine: zero-norm input");
    double c = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::clamp(c, -1.0, 1.0);
}

// f(w1, w2) = sqrt((1 + w1)(1 + w2)), the denominator that couples a pair's
// internal homogeneity to how far functional and cross-capacity similarity
// can jointly rise.
inline double f_within(double w1, double w2) {
    if (w1 < -1.0 || w1 > 1.0 || w2 < -1.0 || w2 > 1.0)
        throw std::invalid_argument("f_within: arguments must lie in [-1, 1]");
    return std::sqrt((1.0 + w1) * (1.0 + w2));
}

// The five scalars of the pairwise decomposition plus the consistency
// residual between the direct whole-vector cosine and its reconstruction
// (functional + cross_capacity) / f_within.
struct SimilarityComponents {
    double functional = 0.0;
    double cross_capacity = 0.0;
    double within_1 = 0.0;
    double within_2 = 0.0;
    double f_within = 0.0;
    double whole = std::numeric_limits<double>::quiet_NaN();
    double identity_residual = std::numeric_limits<double>::quiet_NaN();
    // false when f_within underflows and the reconstruction is undefined
    bool reconstruction_defined = true;
    // false when one summed vector has (near) zero norm and even the direct
    // whole cosine is undefined
    bool whole_defined = true;
};

inline SimilarityComponents decompose(const Interaction& a, const Interaction& b) {
    if (a.if_vec.size() != b.if_vec.size() || a.then_vec.size() != b.then_vec.size() ||
        a.if_vec.size() != a.then_vec.size())
        throw std::invalid_argument("decompose: dimension mismatch");

    SimilarityComponents c;
    double ii = cosine(a.if_vec, b.if_vec);
    double tt = cosine(a.then_vec, b.then_vec);
    double it = cosine(a.if_vec, b.then_vec);
    double ti = cosine(b.if_vec, a.then_vec);
    c.functional = (ii + tt) / 2.0;
    c.cross_capacity = (it + ti) / 2.0;
    c.within_1 = cosine(a.if_vec, a.then_vec);
    c.within_2 = cosine(b.if_vec, b.then_vec);
    c.f_within = f_within(c.within_1, c.within_2);

    const std::size_t d = a.if_vec.size();
    std::vector<double> sa(d), sb(d);
    for (std::size_t k = 0; k < d; ++k) {
        sa[k] = a.if_vec[k] + a.then_vec[k];
        sb[k] = b.if_vec[k] + b.then_vec[k];
    }
    double na = 0.0, nb = 0.0, dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        na += sa[k] * sa[k];
        nb += sb[k] * sb[k];
        dot += sa[k] * sb[k];
    }
    if (na < 1e-24 || nb < 1e-24) {
        c.whole_defined = false;
    } else {
        c.whole = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    }
    if (c.f_within <= 1e-9) {
        c.reconstruction_defined = false;
    } else if (c.whole_defined) {
        double reconstructed = (c.functional + c.cross_capacity) / c.f_within;
        c.identity_residual = std::abs(c.whole - reconstructed);
    }
    return c;
}

inline nlohmann::ordered_json components_json(const SimilarityComponents& c) {
    nlohmann::ordered_json j;
    j["functional"] = c.functional;
    j["cross_capacity"] = c.cross_capacity;
    j["within_1"] = c.within_1;
    j["within_2"] = c.within_2;
    j["f_within"] = c.f_within;
    j["whole"] = c.whole_defined ? nlohmann::ordered_json(c.whole) : nlohmann::ordered_json(nullptr);
    j["identity_residual"] = (c.reconstruction_defined && c.whole_defined)
                                 ? nlohmann::ordered_json(c.identity_residual)
                                 : nlohmann::ordered_json(nullptr);
    j["reconstruction_defined"] = c.reconstruction_defined;
    return j;
}

// Per-focal similarity profile: functional and cross-capacity similarity to
// every other interaction, and the Pearson correlation between the two.
struct FocalProfile {
    long long focal_id = 0;
    double within_focal = 0.0;
    std::vector<long long> other_ids;
    std::vector<double> functional;
    std::vector<double> cross_capacity;
    double r = std::numeric_limits<double>::quiet_NaN();
    bool r_defined = false;
};

namespace detail_sim {

inline double pearson(std::span<const double> x, std::span<const double> y, bool& defined) {
    defined = false;
    const std::size_t n = x.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    defined = true;
    return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

} // namespace detail_sim

inline FocalProfile focal_profile(const InteractionSet& set, long long focal_id) {
    if (set.count() < 2)
        throw std::invalid_argument("focal_profile: need at least 2 interactions");
    const std::size_t focal_row = set.row_of(focal_id);
    const Interaction& focal = set.at(focal_row);

    FocalProfile p;
    p.focal_id = focal_id;
    p.within_focal = cosine(focal.if_vec, focal.then_vec);
    p.other_ids.reserve(set.count() - 1);
    p.functional.reserve(set.count() - 1);
    p.cross_capacity.reserve(set.count() - 1);
    for (std::size_t row = 0; row < set.count(); ++row) {
        if (row == focal_row) continue;
        SimilarityComponents c = decompose(focal, set.at(row));
        p.other_ids.push_back(set.at(row).id);
        p.functional.push_back(c.functional);
        p.cross_capacity.push_back(c.cross_capacity);
    }
    p.r = detail_sim::pearson(p.functional, p.cross_capacity, p.r_defined);
    return p;
}

struct ProfileRow {
    long long id = 0;
    double within = 0.0;
    double r = std::numeric_limits<double>::quiet_NaN();
    bool r_defined = false;
};

struct AllProfilesOptions {
    std::size_t block_size = 256;  // focal rows processed per corpus sweep
    unsigned threads = 1;
};

namespace detail_sim {

// Streaming statistics for one focal row. Welford-style updates keep the
// computation single-pass without materializing the N^2 similarity matrices,
// and the per-focal update order (partner row ascending) is fixed, so output
// is bit-identical for any block size or worker count.
struct RunningCorr {
    long long n = 0;
    double mean_f = 0.0, mean_c = 0.0;
    double m2_f = 0.0, m2_c = 0.0, c_fc = 0.0;

    void add(double f, double c, double inv_n) {
        n += 1;
        double df = f - mean_f;
        mean_f += df * inv_n;
        double df2 = f - mean_f;
        m2_f += df * df2;
        double dc = c - mean_c;
        mean_c += dc * inv_n;
        double dc2 = c - mean_c;
        m2_c += dc * dc2;
        c_fc += df * dc2;
    }

    double correlation(bool& defined) const {
        defined = false;
        if (n < 2 || m2_f <= 0.0 || m2_c <= 0.0)
            return std::numeric_limits<double>::quiet_NaN();
        defined = true;
        return std::clamp(c_fc / (std::sqrt(m2_f) * std::sqrt(m2_c)), -1.0, 1.0);
    }
};

// One block of focal rows against the whole corpus. Gram values are built
// per partner row j as four matrix-vector slices over the packed if/then
// matrices; k is the inner (feature) index.
inline void profile_block(const InteractionSet& set, std::size_t b0, std::size_t b1,
                          const std::vector<double>& inv_table,
                          std::vector<ProfileRow>& out) {
    const std::size_t n = set.count();
    const std::size_t d = set.dimension();
    const std::size_t bs = b1 - b0;
    const double* if_mat = set.if_data();
    const double* then_mat = set.then_data();

    // focal block transposed to [k][b] so the j-loop body vectorizes over b
    std::vector<double> fi(d * bs), ft(d * bs);
    for (std::size_t b = 0; b < bs; ++b) {
        const double* irow = if_mat + (b0 + b) * d;
        const double* trow = then_mat + (b0 + b) * d;
        for (std::size_t k = 0; k < d; ++k) {
            fi[k * bs + b] = irow[k];
            ft[k * bs + b] = trow[k];
        }
    }

    std::vector<RunningCorr> stats(bs);
    std::vector<double> acc_ii(bs), acc_tt(bs), acc_it(bs), acc_ti(bs);

    for (std::size_t j = 0; j < n; ++j) {
        const double* ij = if_mat + j * d;
        const double* tj = then_mat + j * d;
        {
            const double xk = ij[0];
            const double yk = tj[0];
            const double* fik = fi.data();
            const double* ftk = ft.data();
            for (std::size_t b = 0; b < bs; ++b) {
                acc_ii[b] = xk * fik[b];   // if_focal . if_j
                acc_ti[b] = xk * ftk[b];   // then_focal . if_j
                acc_it[b] = yk * fik[b];   // if_focal . then_j
                acc_tt[b] = yk * ftk[b];   // then_focal . then_j
            }
        }
        for (std::size_t k = 1; k < d; ++k) {
            const double xk = ij[k];
            const double yk = tj[k];
            const double* fik = fi.data() + k * bs;
            const double* ftk = ft.data() + k * bs;
            for (std::size_t b = 0; b < bs; ++b) {
                acc_ii[b] += xk * fik[b];
                acc_ti[b] += xk * ftk[b];
                acc_it[b] += yk * fik[b];
                acc_tt[b] += yk * ftk[b];
            }
        }
        for (std::size_t b = 0; b < bs; ++b) {
            if (b0 + b == j) continue;
            double f = 0.5 * (acc_ii[b] + acc_tt[b]);
            double c = 0.5 * (acc_it[b] + acc_ti[b]);
            stats[b].add(f, c, inv_table[static_cast<std::size_t>(stats[b].n) + 1]);
        }
    }

    for (std::size_t b = 0; b < bs; ++b) {
        ProfileRow& row = out[b0 + b];
        const double* irow = if_mat + (b0 + b) * d;
        const double* trow = then_mat + (b0 + b) * d;
        double w = 0.0;
        for (std::size_t k = 0; k < d; ++k) w += irow[k] * trow[k];
        row.id = set.at(b0 + b).id;
        row.within = std::clamp(w, -1.0, 1.0);
        row.r = stats[b].correlation(row.r_defined);
    }
}

} // namespace detail_sim

// (id, within, r) for every interaction treated in turn as the focal.
// Memory stays O(count); the pairwise structure is streamed, never stored.
inline std::vector<ProfileRow> all_profiles(const InteractionSet& set,
                                            const AllProfilesOptions& opts = {}) {
    const std::size_t n = set.count();
    const std::size_t bs = std::max<std::size_t>(1, opts.block_size);
    std::vector<ProfileRow> out(n);

    std::vector<double> inv_table(n + 2, 0.0);
    for (std::size_t i = 1; i < inv_table.size(); ++i)
        inv_table[i] = 1.0 / static_cast<double>(i);

    const std::size_t num_blocks = (n + bs - 1) / bs;
    unsigned workers = std::max(1u, opts.threads);
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, num_blocks));

    if (workers == 1) {
        for (std::size_t blk = 0; blk < num_blocks; ++blk) {
            std::size_t b0 = blk * bs;
            detail_sim::profile_block(set, b0, std::min(n, b0 + bs), inv_table, out);
        }
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w]() {
                for (std::size_t blk = w; blk < num_blocks; blk += workers) {
                    std::size_t b0 = blk * bs;
                    detail_sim::profile_block(set, b0, std::min(n, b0 + bs), inv_table, out);
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    return out;
}

inline std::string profiles_csv(const std::vector<ProfileRow>& rows) {
    std::ostringstream out;
    out << "id,within,r_functional_cc\n";
    for (const ProfileRow& r : rows) {
        out << r.id << ',' << detail::format_double(r.within) << ','
            << (r.r_defined ? detail::format_double(r.r) : std::string("nan")) << "\n";
    }
    return out.str();
}

inline void write_profiles_csv(const std::vector<ProfileRow>& rows, const std::string& path) {
    detail::write_text_file(path, profiles_csv(rows));
}

inline std::vector<ProfileRow> read_profiles_csv(const std::string& path) {
    auto lines = detail::read_lines(path);
    if (lines.empty() || lines[0] != "id,within,r_functional_cc")
        throw std::runtime_error(path + ": expected header id,within,r_functional_cc");
    std::vector<ProfileRow> rows;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        auto f = detail::split_csv_line(lines[li]);
        if (f.size() != 3)
            throw std::runtime_error(path + ": malformed row " + std::to_string(li + 1));
        ProfileRow r;
        r.id = detail::parse_int(f[0]);
        r.within = detail::parse_double(f[1]);
        if (f[2] == "nan") {
            r.r_defined = false;
            r.r = std::numeric_limits<double>::quiet_NaN();
        } else {
            r.r = detail::parse_double(f[2]);
            r.r_defined = true;
        }
        rows.push_back(r);
    }
    return rows;
}

} // namespace toposim
