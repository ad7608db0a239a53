#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "toposim/corpus.hpp"
#include "toposim/detail/csv.hpp"
#include "toposim/detail/format.hpp"
#include "toposim/detail/linalg.hpp"

namespace toposim {

// Two numbers per interaction that drive the Mapper cover.
struct LensCoordinates {
    std::vector<long long> ids;                  // aligned with the InteractionSet rows
    std::vector<std::array<double, 2>> coords;
    std::string provenance;                      // "pca" or "imported:<file>"
};

// Projection onto the top-2 principal components of the concatenated
// if/then feature matrix. Component signs are fixed by forcing each
// component's largest-magnitude loading positive, so results are stable
// across runs and eigensolver quirks.
inline LensCoordinates pca_lens(const InteractionSet& set) {
    const std::size_t n = set.count();
    if (n < 3) throw std::invalid_argument("pca_lens: need at least 3 interactions");
    const std::size_t d = set.dimension();
    const std::size_t f = 2 * d;

    std::vector<double> mean(f, 0.0);
    for (std::size_t row = 0; row < n; ++row) {
        auto iv = set.if_row(row);
        auto tv = set.then_row(row);
        for (std::size_t k = 0; k < d; ++k) {
            mean[k] += iv[k];
            mean[d + k] += tv[k];
        }
    }
    for (double& m : mean) m /= static_cast<double>(n);

    detail::Matrix cov(f, f, 0.0);
    std::vector<double> centered(f);
    for (std::size_t row = 0; row < n; ++row) {
        auto iv = set.if_row(row);
        auto tv = set.then_row(row);
        for (std::size_t k = 0; k < d; ++k) {
            centered[k] = iv[k] - mean[k];
            centered[d + k] = tv[k] - mean[d + k];
        }
        for (std::size_t a = 0; a < f; ++a)
            for (std::size_t b = a; b < f; ++b) cov(a, b) += centered[a] * centered[b];
    }
    const double inv = 1.0 / static_cast<double>(n - 1);
    for (std::size_t a = 0; a < f; ++a)
        for (std::size_t b = a; b < f; ++b) {
            cov(a, b) *= inv;
            cov(b, a) = cov(a, b);
        }

    detail::SymmetricEigen eig = detail::jacobi_eigen(cov);
    if (eig.values[0] < 1e-24)
        throw std::runtime_error("pca_lens: degenerate corpus (all feature rows identical)");

    std::array<std::vector<double>, 2> comp;
    for (int c = 0; c < 2; ++c) {
        comp[c].resize(f);
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t k = 0; k < f; ++k) {
            comp[c][k] = eig.vectors(k, static_cast<std::size_t>(c));
            if (std::abs(comp[c][k]) > best) {
                best = std::abs(comp[c][k]);
                arg = k;
            }
        }
        if (comp[c][arg] < 0.0)
            for (double& x : comp[c]) x = -x;
    }

    LensCoordinates lens;
    lens.provenance = "pca";
    lens.ids.reserve(n);
    lens.coords.reserve(n);
    for (std::size_t row = 0; row < n; ++row) {
        auto iv = set.if_row(row);
        auto tv = set.then_row(row);
        std::array<double, 2> xy{0.0, 0.0};
        for (int c = 0; c < 2; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                s += (iv[k] - mean[k]) * comp[static_cast<std::size_t>(c)][k];
                s += (tv[k] - mean[d + k]) * comp[static_cast<std::size_t>(c)][d + k];
            }
            xy[static_cast<std::size_t>(c)] = s;
        }
        lens.ids.push_back(set.at(row).id);
        lens.coords.push_back(xy);
    }
    return lens;
}

// Externally computed lens (t-SNE, UMAP, ...) read from id,x,y CSV. The id
// set must exactly cover the corpus.
inline LensCoordinates import_lens(const std::string& path, const InteractionSet& set) {
    auto lines = detail::read_lines(path);
    if (lines.empty() || detail::split_csv_line(lines[0]) != std::vector<std::string>{"id", "x", "y"})
        throw std::runtime_error(path + ": expected header id,x,y");

    std::unordered_map<long long, std::array<double, 2>> by_id;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        auto f = detail::split_csv_line(lines[li]);
        if (f.size() != 3)
            throw std::runtime_error(path + ": malformed row " + std::to_string(li + 1));
        long long id = detail::parse_int(f[0]);
        double x = detail::parse_double(f[1]);
        double y = detail::parse_double(f[2]);
        if (!std::isfinite(x) || !std::isfinite(y))
            throw std::runtime_error(path + ": non-finite coordinate for id " + std::to_string(id));
        if (!by_id.emplace(id, std::array<double, 2>{x, y}).second)
            throw std::runtime_error(path + ": duplicate id " + std::to_string(id));
        if (!set.has_id(id))
            throw std::runtime_error(path + ": id " + std::to_string(id) + " not in corpus");
    }

    LensCoordinates lens;
    std::string base = path;
    if (auto pos = base.find_last_of('/'); pos != std::string::npos) base = base.substr(pos + 1);
    lens.provenance = "imported:" + base;
    lens.ids.reserve(set.count());
    lens.coords.reserve(set.count());
    for (std::size_t row = 0; row < set.count(); ++row) {
        long long id = set.at(row).id;
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw std::runtime_error(path + ": missing id " + std::to_string(id));
        lens.ids.push_back(id);
        lens.coords.push_back(it->second);
    }
    return lens;
}

inline std::string lens_csv(const LensCoordinates& lens) {
    std::ostringstream out;
    out << "id,x,y\n";
    for (std::size_t i = 0; i < lens.ids.size(); ++i) {
        out << lens.ids[i] << ',' << detail::format_double(lens.coords[i][0]) << ','
            << detail::format_double(lens.coords[i][1]) << "\n";
    }
    return out.str();
}

inline void write_lens_csv(const LensCoordinates& lens, const std::string& path) {
    detail::write_text_file(path, lens_csv(lens));
}

} // namespace toposim
