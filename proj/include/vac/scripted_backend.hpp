#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vac/gateway.hpp"

namespace vac {

// Deterministic test backend driven by a fixture: prompt matchers (exact
// SHA-256 digest or substring) map to response lists. Responses cycle when a
// request asks for more samples than the rule provides.
class ScriptedBackend : public Backend {
public:
    struct Rule {
        std::optional<std::string> match_digest;     // sha256 of the whole prompt
        std::optional<std::string> match_substring;  // first match wins, in file order
        std::vector<std::string> responses;
    };
    struct Config {
        std::vector<Rule> rules;
        std::vector<std::string> default_responses;  // used when no rule matches
        double latency_seconds = 0.0;                // simulated per-call latency
        std::map<std::string, std::vector<double>> embeddings;  // exact-text table
        int hash_embedding_dim = 0;  // > 0: derive vectors for texts not in the table
    };

    explicit ScriptedBackend(Config config) : config_(std::move(config)) {}
    static ScriptedBackend from_file(const fs::path& path);
    static Config config_from_json(const json& j);

    GenerationResult generate(const GenerationRequest& request) override;
    std::vector<std::vector<double>> embed(const EmbeddingRequest& request) override;

private:
    Config config_;
};

// Deterministic pseudo-embedding: a bag-of-words projection so that texts
// sharing tokens land near each other. Shared by scripted and synthetic
// backends.
std::vector<double> hash_embedding(const std::string& text, int dim);

}  // namespace vac
