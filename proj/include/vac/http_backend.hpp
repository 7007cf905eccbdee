#pragma once

#include <string>

#include "vac/gateway.hpp"

namespace vac {

// Chat-completions-compatible JSON-over-HTTP backend. The endpoint URL and
// auth token default to the VAC_BACKEND_URL / VAC_BACKEND_TOKEN environment
// variables. Fine-tuned checkpoints are addressed as "<model>:<adapter>".
class HttpBackend : public Backend {
public:
    struct Config {
        std::string base_url;  // e.g. http://localhost:8000
        std::string api_token;
        std::string chat_path = "/v1/chat/completions";
        std::string embeddings_path = "/v1/embeddings";
        double timeout_seconds = 300.0;
    };

    explicit HttpBackend(Config config);
    // Reads VAC_BACKEND_URL / VAC_BACKEND_TOKEN for unset fields.
    static Config config_from_env(Config config);
    static Config config_from_env() { return config_from_env(Config()); }

    GenerationResult generate(const GenerationRequest& request) override;
    std::vector<std::vector<double>> embed(const EmbeddingRequest& request) override;

private:
    Config config_;
};

}  // namespace vac
