#include "vac/scripted_backend.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "vac/prompts.hpp"

namespace vac {

ScriptedBackend::Config ScriptedBackend::config_from_json(const json& j) {
    Config config;
    for (const auto& r : j.value("rules", json::array())) {
        Rule rule;
        if (r.contains("match_digest")) rule.match_digest = r["match_digest"].get<std::string>();
        if (r.contains("match_substring")) {
            rule.match_substring = r["match_substring"].get<std::string>();
        }
        if (!rule.match_digest && !rule.match_substring) {
            throw ConfigError("scripted rule needs match_digest or match_substring");
        }
        rule.responses = r.at("responses").get<std::vector<std::string>>();
        if (rule.responses.empty()) throw ConfigError("scripted rule has no responses");
        config.rules.push_back(std::move(rule));
    }
    if (j.contains("default")) {
        config.default_responses = j["default"].get<std::vector<std::string>>();
    }
    config.latency_seconds = j.value("latency_seconds", 0.0);
    if (j.contains("embeddings")) {
        for (const auto& [text, vec] : j["embeddings"].items()) {
            config.embeddings[text] = vec.get<std::vector<double>>();
        }
    }
    config.hash_embedding_dim = j.value("hash_embedding_dim", 0);
    return config;
}

ScriptedBackend ScriptedBackend::from_file(const fs::path& path) {
    return ScriptedBackend(config_from_json(load_json_file(path)));
}

GenerationResult ScriptedBackend::generate(const GenerationRequest& request) {
    if (config_.latency_seconds > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(config_.latency_seconds));
    }
    const std::string digest = sha256_hex(request.prompt);
    const std::vector<std::string>* responses = nullptr;
    for (const auto& rule : config_.rules) {
        if (rule.match_digest && *rule.match_digest == digest) {
            responses = &rule.responses;
            break;
        }
        if (rule.match_substring &&
            request.prompt.find(*rule.match_substring) != std::string::npos) {
            responses = &rule.responses;
            break;
        }
    }
    if (responses == nullptr && !config_.default_responses.empty()) {
        responses = &config_.default_responses;
    }
    if (responses == nullptr) {
        throw GatewayError("scripted backend has no response for prompt digest " +
                           digest.substr(0, 12));
    }

    GenerationResult result;
    result.texts.reserve(request.n);
    for (int i = 0; i < request.n; ++i) {
        result.texts.push_back((*responses)[i % responses->size()]);
    }
    result.prompt_tokens = heuristic_token_count(request.prompt);
    for (const auto& t : result.texts) result.completion_tokens += heuristic_token_count(t);
    result.latency_seconds = config_.latency_seconds;
    return result;
}

std::vector<double> hash_embedding(const std::string& text, int dim) {
    std::vector<double> vec(static_cast<std::size_t>(dim), 0.0);
    for (const auto& token : tokenize(text)) {
        const std::uint64_t h = fnv1a64(token);
        const std::size_t bucket = h % static_cast<std::size_t>(dim);
        // Signed bucket contributions keep vectors spread out.
        vec[bucket] += ((h >> 32) & 1) ? 1.0 : -1.0;
    }
    double norm = 0.0;
    for (double v : vec) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& v : vec) v /= norm;
    }
    return vec;
}

std::vector<std::vector<double>> ScriptedBackend::embed(const EmbeddingRequest& request) {
    std::vector<std::vector<double>> out;
    out.reserve(request.texts.size());
    for (const auto& text : request.texts) {
        auto it = config_.embeddings.find(text);
        if (it != config_.embeddings.end()) {
            out.push_back(it->second);
        } else if (config_.hash_embedding_dim > 0) {
            out.push_back(hash_embedding(text, config_.hash_embedding_dim));
        } else {
            throw GatewayError("scripted backend has no embedding for text: \"" +
                               text.substr(0, 40) + "\"");
        }
    }
    return out;
}

}  // namespace vac
