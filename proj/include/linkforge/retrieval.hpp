#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "linkforge/errors.hpp"
#include "linkforge/kb.hpp"

namespace linkforge {

// Case-folded terms split on non-alphanumeric characters. Bytes >= 0x80 (UTF-8
// continuation of non-ASCII letters) are kept as word characters.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> terms;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            terms.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) terms.push_back(std::move(cur));
    return terms;
}

struct Candidate {
    std::string entity_id;
    double retrieval_score = 0.0;
    int retrieval_rank = 0;  // 1-based
    std::optional<double> rerank_score;
    std::optional<int> presented_index;  // position in the selection prompt, 1-based
    bool scoring_failed = false;
};

struct CandidateSet {
    std::string mention_id;
    std::string provenance;
    std::vector<Candidate> items;

    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
    bool contains(const std::string& id) const {
        for (const auto& c : items)
            if (c.entity_id == id) return true;
        return false;
    }
};

namespace detail {

inline CandidateSet ranked_set(std::string mention_id, std::string provenance,
                               std::vector<std::pair<std::string, double>> scored) {
    CandidateSet set;
    set.mention_id = std::move(mention_id);
    set.provenance = std::move(provenance);
    set.items.reserve(scored.size());
    int rank = 1;
    for (auto& [id, score] : scored) {
        Candidate c;
        c.entity_id = std::move(id);
        c.retrieval_score = score;
        c.retrieval_rank = rank++;
        set.items.push_back(std::move(c));
    }
    return set;
}

}  // namespace detail

// Okapi BM25 over entity verbalizations.
//   score(q, doc) = sum_t IDF(t) * tf*(k1+1) / (tf + k1*(1 - b + b*len/avglen))
//   IDF(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
// The ln(1 + ...) form is always positive. Zero-score documents are not returned.
class Bm25Index {
public:
    static Bm25Index from_documents(std::vector<std::string> ids, const std::vector<std::string>& texts,
                                    double k1 = 1.5, double b = 0.75) {
        if (ids.size() != texts.size()) throw Error("ids/texts size mismatch");
        if (ids.empty()) throw EmptyKb("cannot build BM25 index over an empty corpus");
        if (k1 < 0.0) throw Error("k1 must be >= 0");
        if (b < 0.0 || b > 1.0) throw Error("b must be in [0, 1]");
        Bm25Index idx;
        idx.k1_ = k1;
        idx.b_ = b;
        idx.doc_ids_ = std::move(ids);
        idx.doc_lengths_.reserve(texts.size());
        std::uint64_t total_len = 0;
        for (std::size_t d = 0; d < texts.size(); ++d) {
            auto terms = tokenize(texts[d]);
            idx.doc_lengths_.push_back(static_cast<int>(terms.size()));
            total_len += terms.size();
            std::unordered_map<std::string, int> tf;
            for (auto& t : terms) ++tf[t];
            for (auto& [term, count] : tf)
                idx.postings_[term].emplace_back(static_cast<int>(d), count);
        }
        idx.avg_doc_len_ = static_cast<double>(total_len) / static_cast<double>(texts.size());
        return idx;
    }

    static Bm25Index build(const KnowledgeBase& kb, double k1 = 1.5, double b = 0.75) {
        if (kb.empty()) throw EmptyKb("cannot build BM25 index over an empty KB");
        std::vector<std::string> ids;
        std::vector<std::string> texts;
        ids.reserve(kb.size());
        texts.reserve(kb.size());
        for (const auto& e : kb) {
            ids.push_back(e.id);
            texts.push_back(verbalize_entity(e));
        }
        return from_documents(std::move(ids), texts, k1, b);
    }

    CandidateSet search(const std::string& query, std::size_t n, std::string mention_id = "") const {
        if (n == 0) throw Error("n must be >= 1");
        std::vector<double> scores(doc_ids_.size(), 0.0);
        for (const auto& term : tokenize(query)) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            const double df = static_cast<double>(it->second.size());
            const double n_docs = static_cast<double>(doc_ids_.size());
            const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
            for (const auto& [doc, tf] : it->second) {
                const double norm = k1_ * (1.0 - b_ + b_ * doc_lengths_[static_cast<std::size_t>(doc)] / avg_doc_len_);
                scores[static_cast<std::size_t>(doc)] += idf * (tf * (k1_ + 1.0)) / (tf + norm);
            }
        }
        std::vector<std::size_t> order;
        for (std::size_t d = 0; d < scores.size(); ++d)
            if (scores[d] > 0.0) order.push_back(d);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t c) { return scores[a] > scores[c]; });
        if (order.size() > n) order.resize(n);
        std::vector<std::pair<std::string, double>> scored;
        scored.reserve(order.size());
        for (std::size_t d : order) scored.emplace_back(doc_ids_[d], scores[d]);
        return detail::ranked_set(std::move(mention_id), "bm25", std::move(scored));
    }

    double k1() const { return k1_; }
    double b() const { return b_; }
    std::size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_len() const { return avg_doc_len_; }
    int doc_length(std::size_t d) const { return doc_lengths_[d]; }

    void save(const std::string& path) const {
        nlohmann::json j;
        j["magic"] = kMagic;
        j["version"] = 1;
        j["kind"] = "bm25";
        j["k1"] = k1_;
        j["b"] = b_;
        j["doc_ids"] = doc_ids_;
        j["doc_lengths"] = doc_lengths_;
        j["avg_doc_len"] = avg_doc_len_;
        nlohmann::json postings = nlohmann::json::object();
        for (const auto& [term, plist] : postings_) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& [doc, tf] : plist) arr.push_back({doc, tf});
            postings[term] = std::move(arr);
        }
        j["postings"] = std::move(postings);
        std::ofstream out(path);
        if (!out) throw Error("cannot write index file: " + path);
        out << j.dump();
    }

    static Bm25Index load(const std::string& path) {
        nlohmann::json j = read_snapshot(path, "bm25");
        Bm25Index idx;
        idx.k1_ = j.at("k1").get<double>();
        idx.b_ = j.at("b").get<double>();
        idx.doc_ids_ = j.at("doc_ids").get<std::vector<std::string>>();
        idx.doc_lengths_ = j.at("doc_lengths").get<std::vector<int>>();
        idx.avg_doc_len_ = j.at("avg_doc_len").get<double>();
        for (const auto& [term, arr] : j.at("postings").items()) {
            auto& plist = idx.postings_[term];
            for (const auto& pair : arr)
                plist.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
        }
        return idx;
    }

    static constexpr const char* kMagic = "linkforge-index";

    static nlohmann::json read_snapshot(const std::string& path, const std::string& kind) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open index file: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& ex) {
            throw Error("corrupt index file " + path + ": " + ex.what());
        }
        if (j.value("magic", "") != kMagic) throw Error("not a linkforge index snapshot: " + path);
        if (j.value("version", 0) != 1) throw Error("unsupported index version in " + path);
        if (j.value("kind", "") != kind)
            throw Error("index kind mismatch in " + path + ": expected " + kind);
        return j;
    }

private:
    Bm25Index() = default;
    double k1_ = 1.5;
    double b_ = 0.75;
    double avg_doc_len_ = 0.0;
    std::vector<std::string> doc_ids_;
    std::vector<int> doc_lengths_;
    std::unordered_map<std::string, std::vector<std::pair<int, int>>> postings_;
};

// Batch embedding function: one vector per input text, uniform dimension.
using Embedder = std::function<std::vector<std::vector<double>>(const std::vector<std::string>&)>;

// Exact (flat) inner-product search over unit-normalized embedding rows.
class DenseIndex {
public:
    static DenseIndex build(const KnowledgeBase& kb, const Embedder& embedder) {
        if (kb.empty()) throw EmptyKb("cannot build dense index over an empty KB");
        std::vector<std::string> ids;
        std::vector<std::string> texts;
        for (const auto& e : kb) {
            ids.push_back(e.id);
            texts.push_back(verbalize_entity(e));
        }
        auto vectors = embedder(texts);
        if (vectors.size() != ids.size()) throw Error("embedder returned wrong batch size");
        return from_vectors(std::move(ids), vectors);
    }

    static DenseIndex from_vectors(std::vector<std::string> ids,
                                   const std::vector<std::vector<double>>& vectors) {
        if (ids.size() != vectors.size()) throw Error("ids/vectors size mismatch");
        if (ids.empty()) throw EmptyKb("cannot build dense index with no vectors");
        DenseIndex idx;
        idx.ids_ = std::move(ids);
        idx.dim_ = vectors.front().size();
        if (idx.dim_ == 0) throw DimensionMismatch("embedding dimension must be positive");
        idx.rows_.reserve(idx.dim_ * vectors.size());
        for (std::size_t r = 0; r < vectors.size(); ++r) {
            if (vectors[r].size() != idx.dim_)
                throw DimensionMismatch("embedding dimension mismatch at row " + std::to_string(r));
            double norm_sq = 0.0;
            for (double v : vectors[r]) norm_sq += v * v;
            const double norm = std::sqrt(norm_sq);
            if (norm < 1e-12) throw ZeroVector("cannot normalize zero embedding at row " + std::to_string(r));
            for (double v : vectors[r]) idx.rows_.push_back(v / norm);
        }
        return idx;
    }

    // Exact top-n by inner product, descending; ties by insertion order. All rows are
    // eligible regardless of score sign (unlike BM25's zero cutoff).
    CandidateSet search(const std::vector<double>& query, std::size_t n,
                        std::string mention_id = "") const {
        if (n == 0) throw Error("n must be >= 1");
        if (query.size() != dim_)
            throw DimensionMismatch("query dimension " + std::to_string(query.size()) +
                                    " != index dimension " + std::to_string(dim_));
        std::vector<double> scores(ids_.size(), 0.0);
        for (std::size_t r = 0; r < ids_.size(); ++r) {
            const double* row = rows_.data() + r * dim_;
            double dot = 0.0;
            for (std::size_t j = 0; j < dim_; ++j) dot += row[j] * query[j];
            scores[r] = dot;
        }
        std::vector<std::size_t> order(ids_.size());
        for (std::size_t r = 0; r < order.size(); ++r) order[r] = r;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t c) { return scores[a] > scores[c]; });
        if (order.size() > n) order.resize(n);
        std::vector<std::pair<std::string, double>> scored;
        for (std::size_t r : order) scored.emplace_back(ids_[r], scores[r]);
        return detail::ranked_set(std::move(mention_id), "dense", std::move(scored));
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }

    std::vector<double> row(std::size_t r) const {
        return std::vector<double>(rows_.begin() + static_cast<std::ptrdiff_t>(r * dim_),
                                   rows_.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim_));
    }

    void save(const std::string& path) const {
        nlohmann::json j;
        j["magic"] = Bm25Index::kMagic;
        j["version"] = 1;
        j["kind"] = "dense";
        j["dim"] = dim_;
        j["ids"] = ids_;
        j["rows"] = rows_;
        std::ofstream out(path);
        if (!out) throw Error("cannot write index file: " + path);
        out << j.dump();
    }

    static DenseIndex load(const std::string& path) {
        nlohmann::json j = Bm25Index::read_snapshot(path, "dense");
        DenseIndex idx;
        idx.dim_ = j.at("dim").get<std::size_t>();
        idx.ids_ = j.at("ids").get<std::vector<std::string>>();
        idx.rows_ = j.at("rows").get<std::vector<double>>();
        if (idx.rows_.size() != idx.dim_ * idx.ids_.size())
            throw Error("corrupt dense index snapshot: " + path);
        return idx;
    }

private:
    DenseIndex() = default;
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<double> rows_;  // row-major, unit-normalized
};

// Union of candidate sets: dedup by entity id (first occurrence wins), interleaved by
// per-set rank, truncated to budget.
inline CandidateSet merge_candidates(const std::vector<CandidateSet>& sets, std::size_t budget) {
    CandidateSet out;
    out.provenance = "merged";
    if (sets.empty()) return out;
    out.mention_id = sets.front().mention_id;
    std::size_t max_rank = 0;
    for (const auto& s : sets) {
        if (s.mention_id != out.mention_id)
            throw MentionMismatch("cannot merge candidate sets for different mentions");
        max_rank = std::max(max_rank, s.items.size());
    }
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < max_rank && out.items.size() < budget; ++r) {
        for (const auto& s : sets) {
            if (r >= s.items.size()) continue;
            const Candidate& c = s.items[r];
            if (!seen.insert(c.entity_id).second) continue;
            Candidate copy = c;
            copy.retrieval_rank = static_cast<int>(out.items.size()) + 1;
            out.items.push_back(std::move(copy));
            if (out.items.size() >= budget) break;
        }
    }
    return out;
}

}  // namespace linkforge
