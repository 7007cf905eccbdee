#pragma once

#include <map>
#include <string>
#include <vector>

#include "vac/data_model.hpp"
#include "vac/gateway.hpp"

namespace vac {

struct RetrievedDoc {
    std::string doc_id;
    double score = 0.0;
    int rank = 0;  // 1-based, consecutive
};

// Term statistics over one user profile. Immutable after build.
struct ProfileIndex {
    struct DocStats {
        std::string doc_id;
        std::map<std::string, int> term_counts;
        int length = 0;
    };
    std::vector<DocStats> docs;
    std::map<std::string, int> doc_frequency;
    double average_length = 0.0;

    std::size_t size() const { return docs.size(); }
};

// Text form indexed (and embedded) for a profile document.
std::string document_text(const ProfileDocument& doc);

ProfileIndex build_index(const std::vector<ProfileDocument>& profile);

// Okapi BM25 (k1 = 1.2, b = 0.75, idf floored at 0) against the whole index;
// returns min(k, |profile|) docs sorted by score desc, ties by ascending
// doc_id.
std::vector<RetrievedDoc> retrieve(const ProfileIndex& index, const std::string& query, int k);

// Score a single document; exposed so tests can brute-force the ranking.
double bm25_score(const ProfileIndex& index, const ProfileIndex::DocStats& doc,
                  const std::vector<std::string>& query_terms);

// Cosine similarity over gateway embeddings; same tie rule as retrieve().
std::vector<RetrievedDoc> retrieve_dense(Gateway& gateway, const ModelHandle& embedder,
                                         const std::vector<ProfileDocument>& profile,
                                         const std::string& query, int k,
                                         const std::string& user_id = "");

// Uniformly sample another user's full profile (random-profile baseline).
std::vector<ProfileDocument> sample_random_profile(const Dataset& dataset,
                                                   const std::string& exclude_user,
                                                   std::uint64_t seed);

// Join retrieval results back to document texts, preserving rank order.
struct RankedDoc {
    std::string doc_id;
    std::string question_text;
    std::string description_text;
    double score = 0.0;
    int rank = 0;
};
std::vector<RankedDoc> materialize(const std::vector<ProfileDocument>& profile,
                                   const std::vector<RetrievedDoc>& retrieved);

}  // namespace vac
