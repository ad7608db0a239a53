#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "toposim/detail/csv.hpp"
#include "toposim/detail/format.hpp"

namespace toposim {

// One if-then rule: trigger/action phrase text plus their unit-norm
// embedding vectors in a shared d-dimensional space.
struct Interaction {
    long long id = 0;
    std::string if_text;
    std::string then_text;
    std::vector<double> if_vec;
    std::vector<double> then_vec;
};

struct LoadOptions {
    // When a vector's norm deviates from 1 by more than renorm_tolerance the
    // row is rejected. Deviations within renorm_tolerance are healed only if
    // renormalize is set; deviations within strict_tolerance always pass.
    bool renormalize = false;
    double strict_tolerance = 1e-9;
    double renorm_tolerance = 1e-6;
};

class InteractionSet {
public:
    InteractionSet() = default;

    // Validates dimensions, ids and norms; builds the packed matrices the
    // similarity kernels stream over.
    InteractionSet(std::vector<Interaction> interactions, std::string source,
                   const LoadOptions& opts = {})
        : interactions_(std::move(interactions)), source_(std::move(source)) {
        if (interactions_.empty()) throw std::runtime_error("interaction set is empty");
        dimension_ = interactions_[0].if_vec.size();
        if (dimension_ == 0) throw std::runtime_error("zero-dimensional embedding");
        index_of_.reserve(interactions_.size());
        for (std::size_t row = 0; row < interactions_.size(); ++row) {
            Interaction& it = interactions_[row];
            if (it.if_vec.size() != dimension_ || it.then_vec.size() != dimension_)
                throw std::runtime_error("dimension mismatch at row " + std::to_string(row + 1) +
                                         " (id " + std::to_string(it.id) + ")");
            check_norm(it.if_vec, row, opts);
            check_norm(it.then_vec, row, opts);
            auto [pos, inserted] = index_of_.emplace(it.id, row);
            (void)pos;
            if (!inserted)
                throw std::runtime_error("duplicate id " + std::to_string(it.id));
        }
        if_mat_.resize(interactions_.size() * dimension_);
        then_mat_.resize(interactions_.size() * dimension_);
        for (std::size_t row = 0; row < interactions_.size(); ++row) {
            std::copy(interactions_[row].if_vec.begin(), interactions_[row].if_vec.end(),
                      if_mat_.begin() + static_cast<std::ptrdiff_t>(row * dimension_));
            std::copy(interactions_[row].then_vec.begin(), interactions_[row].then_vec.end(),
                      then_mat_.begin() + static_cast<std::ptrdiff_t>(row * dimension_));
        }
    }

    std::size_t count() const { return interactions_.size(); }
    std::size_t dimension() const { return dimension_; }
    const std::string& source() const { return source_; }
    const std::vector<Interaction>& interactions() const { return interactions_; }
    const Interaction& at(std::size_t row) const { return interactions_[row]; }

    bool has_id(long long id) const { return index_of_.count(id) != 0; }
    std::size_t row_of(long long id) const {
        auto it = index_of_.find(id);
        if (it == index_of_.end())
            throw std::runtime_error("unknown interaction id " + std::to_string(id));
        return it->second;
    }
    const Interaction& by_id(long long id) const { return interactions_[row_of(id)]; }

    std::span<const double> if_row(std::size_t row) const {
        return {if_mat_.data() + row * dimension_, dimension_};
    }
    std::span<const double> then_row(std::size_t row) const {
        return {then_mat_.data() + row * dimension_, dimension_};
    }
    const double* if_data() const { return if_mat_.data(); }
    const double* then_data() const { return then_mat_.data(); }

private:
    void check_norm(std::vector<double>& v, std::size_t row, const LoadOptions& opts) {
        double n2 = 0.0;
        for (double x : v) n2 += x * x;
        double norm = std::sqrt(n2);
        if (norm < 1e-12)
            throw std::runtime_error("zero-norm vector at row " + std::to_string(row + 1));
        double dev = std::abs(norm - 1.0);
        if (dev <= opts.strict_tolerance) return;
        if (opts.renormalize && dev <= opts.renorm_tolerance) {
            for (double& x : v) x /= norm;
            return;
        }
        throw std::runtime_error("non-unit vector at row " + std::to_string(row + 1) +
                                 " (norm " + detail::format_double(norm) + ")");
    }

    std::vector<Interaction> interactions_;
    std::string source_;
    std::size_t dimension_ = 0;
    std::unordered_map<long long, std::size_t> index_of_;
    std::vector<double> if_mat_;
    std::vector<double> then_mat_;
};

enum class CorpusFormat { csv, jsonl };

inline CorpusFormat parse_corpus_format(const std::string& s) {
    if (s == "csv") return CorpusFormat::csv;
    if (s == "jsonl") return CorpusFormat::jsonl;
    throw std::runtime_error("unknown corpus format '" + s + "' (expected csv or jsonl)");
}

namespace detail_corpus {

// Column layout: id,if_text,then_text,if_0..if_{d-1},then_0..then_{d-1}
inline std::size_t dimension_from_header(const std::vector<std::string>& header,
                                         const std::string& path) {
    if (header.size() < 5 || header[0] != "id" || header[1] != "if_text" ||
        header[2] != "then_text")
        throw std::runtime_error(path + ": bad header, expected id,if_text,then_text,if_0..,then_0..");
    std::size_t rest = header.size() - 3;
    if (rest % 2 != 0)
        throw std::runtime_error(path + ": header has unpaired coordinate columns");
    std::size_t d = rest / 2;
    for (std::size_t k = 0; k < d; ++k) {
        if (header[3 + k] != "if_" + std::to_string(k) ||
            header[3 + d + k] != "then_" + std::to_string(k))
            throw std::runtime_error(path + ": unexpected coordinate column names");
    }
    return d;
}

} // namespace detail_corpus

inline InteractionSet load_interactions(const std::string& path, CorpusFormat format,
                                        const LoadOptions& opts = {}) {
    std::vector<Interaction> rows;
    if (format == CorpusFormat::csv) {
        auto lines = detail::read_lines(path);
        if (lines.empty()) throw std::runtime_error(path + ": empty file");
        auto header = detail::split_csv_line(lines[0]);
        std::size_t d = detail_corpus::dimension_from_header(header, path);
        for (std::size_t li = 1; li < lines.size(); ++li) {
            if (lines[li].empty()) continue;
            std::vector<std::string> f;
            try {
                f = detail::split_csv_line(lines[li]);
                if (f.size() != 3 + 2 * d)
                    throw std::runtime_error("expected " + std::to_string(3 + 2 * d) +
                                             " fields, got " + std::to_string(f.size()));
                Interaction it;
                it.id = detail::parse_int(f[0]);
                it.if_text = f[1];
                it.then_text = f[2];
                it.if_vec.resize(d);
                it.then_vec.resize(d);
                for (std::size_t k = 0; k < d; ++k) {
                    it.if_vec[k] = detail::parse_double(f[3 + k]);
                    it.then_vec[k] = detail::parse_double(f[3 + d + k]);
                }
                rows.push_back(std::move(it));
            } catch (const std::exception& e) {
                throw std::runtime_error(path + ": malformed row " + std::to_string(li + 1) +
                                         ": " + e.what());
            }
        }
    } else {
        auto lines = detail::read_lines(path);
        std::size_t d = 0;
        for (std::size_t li = 0; li < lines.size(); ++li) {
            if (lines[li].empty()) continue;
            try {
                auto obj = nlohmann::json::parse(lines[li]);
                Interaction it;
                it.id = obj.at("id").get<long long>();
                it.if_text = obj.at("if_text").get<std::string>();
                it.then_text = obj.at("then_text").get<std::string>();
                if (d == 0) {
                    while (obj.contains("if_" + std::to_string(d))) ++d;
                    if (d == 0) throw std::runtime_error("no if_0 coordinate field");
                }
                it.if_vec.resize(d);
                it.then_vec.resize(d);
                for (std::size_t k = 0; k < d; ++k) {
                    it.if_vec[k] = obj.at("if_" + std::to_string(k)).get<double>();
                    it.then_vec[k] = obj.at("then_" + std::to_string(k)).get<double>();
                }
                rows.push_back(std::move(it));
            } catch (const std::exception& e) {
                throw std::runtime_error(path + ": malformed row " + std::to_string(li + 1) +
                                         ": " + e.what());
            }
        }
    }
    return InteractionSet(std::move(rows), path, opts);
}

inline void save_interactions_csv(const InteractionSet& set, const std::string& path) {
    std::ostringstream out;
    const std::size_t d = set.dimension();
    out << "id,if_text,then_text";
    for (std::size_t k = 0; k < d; ++k) out << ",if_" << k;
    for (std::size_t k = 0; k < d; ++k) out << ",then_" << k;
    out << "\n";
    for (const Interaction& it : set.interactions()) {
        out << it.id << ',' << detail::csv_escape(it.if_text) << ','
            << detail::csv_escape(it.then_text);
        for (std::size_t k = 0; k < d; ++k) out << ',' << detail::format_double(it.if_vec[k]);
        for (std::size_t k = 0; k < d; ++k) out << ',' << detail::format_double(it.then_vec[k]);
        out << "\n";
    }
    detail::write_text_file(path, out.str());
}

// Normed average of word vectors: (sum w / n) / ||sum w / n||.
inline std::vector<double> compose_phrase_embedding(
    const std::vector<std::vector<double>>& word_vectors) {
    if (word_vectors.empty())
        throw std::invalid_argument("compose_phrase_embedding: empty word list");
    const std::size_t d = word_vectors[0].size();
    std::vector<double> mean(d, 0.0);
    for (const auto& w : word_vectors) {
        if (w.size() != d)
            throw std::invalid_argument("compose_phrase_embedding: mixed dimensions");
        for (std::size_t k = 0; k < d; ++k) mean[k] += w[k];
    }
    const double inv_n = 1.0 / static_cast<double>(word_vectors.size());
    double n2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        mean[k] *= inv_n;
        n2 += mean[k] * mean[k];
    }
    double norm = std::sqrt(n2);
    if (norm <= 1e-12)
        throw std::runtime_error("compose_phrase_embedding: zero mean vector");
    for (std::size_t k = 0; k < d; ++k) mean[k] /= norm;
    return mean;
}

// Helper path from raw text: whitespace tokens, caller-provided stop list and
// word vector table. Unknown words are skipped; an all-unknown phrase errors.
inline std::vector<double> compose_phrase_from_text(
    const std::string& text,
    const std::unordered_map<std::string, std::vector<double>>& word_vectors,
    const std::unordered_set<std::string>& stop_words) {
    std::istringstream in(text);
    std::vector<std::vector<double>> picked;
    std::string tok;
    while (in >> tok) {
        if (stop_words.count(tok)) continue;
        auto it = word_vectors.find(tok);
        if (it != word_vectors.end()) picked.push_back(it->second);
    }
    if (picked.empty())
        throw std::runtime_error("compose_phrase_from_text: no known non-stop words in '" +
                                 text + "'");
    return compose_phrase_embedding(picked);
}

struct ValidationReport {
    std::size_t count = 0;
    std::size_t dimension = 0;
    double max_norm_deviation = 0.0;
    double within_min = 0.0;
    double within_max = 0.0;
    double within_mean = 0.0;
    std::string source;
};

inline ValidationReport validate_corpus(const InteractionSet& set) {
    ValidationReport r;
    r.count = set.count();
    r.dimension = set.dimension();
    r.source = set.source();
    double sum = 0.0;
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t row = 0; row < set.count(); ++row) {
        auto iv = set.if_row(row);
        auto tv = set.then_row(row);
        double dot = 0.0, ni = 0.0, nt = 0.0;
        for (std::size_t k = 0; k < iv.size(); ++k) {
            dot += iv[k] * tv[k];
            ni += iv[k] * iv[k];
            nt += tv[k] * tv[k];
        }
        double w = dot / (std::sqrt(ni) * std::sqrt(nt));
        r.max_norm_deviation = std::max({r.max_norm_deviation,
                                         std::abs(std::sqrt(ni) - 1.0),
                                         std::abs(std::sqrt(nt) - 1.0)});
        sum += w;
        mn = std::min(mn, w);
        mx = std::max(mx, w);
    }
    r.within_min = mn;
    r.within_max = mx;
    r.within_mean = sum / static_cast<double>(set.count());
    return r;
}

inline nlohmann::ordered_json validation_report_json(const ValidationReport& r) {
    nlohmann::ordered_json j;
    j["source"] = r.source;
    j["count"] = r.count;
    j["dimension"] = r.dimension;
    j["max_norm_deviation"] = r.max_norm_deviation;
    j["within"] = {{"min", r.within_min}, {"max", r.within_max}, {"mean", r.within_mean}};
    return j;
}

} // namespace toposim
