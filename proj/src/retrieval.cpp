#include "vac/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace vac {

namespace {
constexpr double kBm25K1 = 1.2;
constexpr double kBm25B = 0.75;
}  // namespace

std::string document_text(const ProfileDocument& doc) {
    if (doc.description_text.empty()) return doc.question_text;
    return doc.question_text + " " + doc.description_text;
}

ProfileIndex build_index(const std::vector<ProfileDocument>& profile) {
    ProfileIndex index;
    long total_length = 0;
    for (const auto& doc : profile) {
        ProfileIndex::DocStats stats;
        stats.doc_id = doc.doc_id;
        for (const auto& term : tokenize(document_text(doc))) {
            ++stats.term_counts[term];
            ++stats.length;
        }
        total_length += stats.length;
        for (const auto& [term, count] : stats.term_counts) {
            (void)count;
            ++index.doc_frequency[term];
        }
        index.docs.push_back(std::move(stats));
    }
    index.average_length =
        index.docs.empty() ? 0.0 : static_cast<double>(total_length) / index.docs.size();
    return index;
}

double bm25_score(const ProfileIndex& index, const ProfileIndex::DocStats& doc,
                  const std::vector<std::string>& query_terms) {
    if (index.average_length <= 0.0) return 0.0;
    const double n_docs = static_cast<double>(index.docs.size());
    double score = 0.0;
    for (const auto& term : query_terms) {
        auto tf_it = doc.term_counts.find(term);
        if (tf_it == doc.term_counts.end()) continue;
        auto df_it = index.doc_frequency.find(term);
        const double df = df_it == index.doc_frequency.end() ? 0.0 : df_it->second;
        const double idf = std::max(0.0, std::log((n_docs - df + 0.5) / (df + 0.5)));
        const double tf = tf_it->second;
        const double norm =
            tf + kBm25K1 * (1.0 - kBm25B + kBm25B * doc.length / index.average_length);
        score += idf * tf * (kBm25K1 + 1.0) / norm;
    }
    return score;
}

namespace {

std::vector<RetrievedDoc> top_k(std::vector<RetrievedDoc> scored, int k) {
    std::sort(scored.begin(), scored.end(), [](const RetrievedDoc& a, const RetrievedDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (static_cast<int>(scored.size()) > k) scored.resize(k);
    for (std::size_t i = 0; i < scored.size(); ++i) scored[i].rank = static_cast<int>(i) + 1;
    return scored;
}

}  // namespace

std::vector<RetrievedDoc> retrieve(const ProfileIndex& index, const std::string& query, int k) {
    if (k < 1) throw VacError("retrieve: k must be >= 1");
    const auto query_terms = tokenize(query);
    std::vector<RetrievedDoc> scored;
    scored.reserve(index.docs.size());
    for (const auto& doc : index.docs) {
        scored.push_back({doc.doc_id, bm25_score(index, doc, query_terms), 0});
    }
    return top_k(std::move(scored), k);
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::vector<RetrievedDoc> retrieve_dense(Gateway& gateway, const ModelHandle& embedder,
                                         const std::vector<ProfileDocument>& profile,
                                         const std::string& query, int k,
                                         const std::string& user_id) {
    if (k < 1) throw VacError("retrieve_dense: k must be >= 1");
    if (profile.empty()) return {};

    std::vector<std::string> texts;
    texts.reserve(profile.size() + 1);
    texts.push_back(query);
    for (const auto& doc : profile) texts.push_back(document_text(doc));

    std::vector<std::vector<double>> vectors;
    try {
        vectors = gateway.embed(embedder, texts);
    } catch (const std::exception& e) {
        throw GatewayError("dense retrieval failed (user '" + user_id + "', " +
                           std::to_string(profile.size()) + " docs): " + e.what());
    }

    std::vector<RetrievedDoc> scored;
    scored.reserve(profile.size());
    for (std::size_t i = 0; i < profile.size(); ++i) {
        scored.push_back({profile[i].doc_id, cosine(vectors[0], vectors[i + 1]), 0});
    }
    return top_k(std::move(scored), k);
}

std::vector<ProfileDocument> sample_random_profile(const Dataset& dataset,
                                                   const std::string& exclude_user,
                                                   std::uint64_t seed) {
    // Distinct users in first-appearance order so sampling is reproducible.
    std::vector<std::string> users;
    std::set<std::string> seen;
    for (const auto& ex : dataset.examples) {
        if (seen.insert(ex.user_id).second) users.push_back(ex.user_id);
    }
    if (users.size() < 2) {
        throw DataError("sample_random_profile: dataset must contain >= 2 distinct users");
    }
    std::vector<std::string> eligible;
    for (const auto& u : users) {
        if (u != exclude_user) eligible.push_back(u);
    }
    std::mt19937_64 rng(seed);
    const std::string& chosen = eligible[rng_below(rng, eligible.size())];
    for (const auto& ex : dataset.examples) {
        if (ex.user_id == chosen) return ex.profile;
    }
    return {};  // unreachable: chosen comes from the dataset
}

std::vector<RankedDoc> materialize(const std::vector<ProfileDocument>& profile,
                                   const std::vector<RetrievedDoc>& retrieved) {
    std::vector<RankedDoc> out;
    out.reserve(retrieved.size());
    for (const auto& r : retrieved) {
        for (const auto& doc : profile) {
            if (doc.doc_id == r.doc_id) {
                out.push_back({doc.doc_id, doc.question_text, doc.description_text, r.score, r.rank});
                break;
            }
        }
    }
    return out;
}

}  // namespace vac
