#include "vac/http_backend.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

namespace vac {

namespace {

std::string wire_model_name(const ModelHandle& handle) {
    if (handle.adapter_ref) return handle.model_name + ":" + *handle.adapter_ref;
    return handle.model_name;
}

}  // namespace

HttpBackend::Config HttpBackend::config_from_env(Config config) {
    if (config.base_url.empty()) {
        if (const char* url = std::getenv("VAC_BACKEND_URL")) config.base_url = url;
    }
    if (config.api_token.empty()) {
        if (const char* token = std::getenv("VAC_BACKEND_TOKEN")) config.api_token = token;
    }
    return config;
}

HttpBackend::HttpBackend(Config config) : config_(std::move(config)) {
    if (config_.base_url.empty()) {
        throw ConfigError("http backend needs a base URL (config or VAC_BACKEND_URL)");
    }
}

GenerationResult HttpBackend::generate(const GenerationRequest& request) {
    json body;
    body["model"] = wire_model_name(request.handle);
    body["messages"] = json::array({json{{"role", "user"}, {"content", request.prompt}}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    body["n"] = request.n;
    if (request.seed) body["seed"] = *request.seed;

    httplib::Client client(config_.base_url);
    client.set_read_timeout(static_cast<int>(config_.timeout_seconds), 0);
    httplib::Headers headers;
    if (!config_.api_token.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_token);
    }
    const auto res = client.Post(config_.chat_path, headers, body.dump(), "application/json");
    if (!res) throw GatewayError("http backend unreachable at " + config_.base_url);
    if (res->status != 200) {
        throw GatewayError("http backend returned HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 200));
    }

    json reply;
    try {
        reply = json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw GatewayError(std::string("http backend response is not JSON: ") + e.what());
    }
    if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty()) {
        throw GatewayError("http backend response malformed: missing choices");
    }

    GenerationResult result;
    for (const auto& choice : reply["choices"]) {
        if (!choice.contains("message") || !choice["message"].contains("content")) {
            throw GatewayError("http backend response malformed: choice without message content");
        }
        result.texts.push_back(choice["message"]["content"].get<std::string>());
    }
    if (reply.contains("usage")) {
        result.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
        result.completion_tokens = reply["usage"].value("completion_tokens", 0);
    }
    return result;
}

std::vector<std::vector<double>> HttpBackend::embed(const EmbeddingRequest& request) {
    json body;
    body["model"] = wire_model_name(request.handle);
    body["input"] = request.texts;

    httplib::Client client(config_.base_url);
    client.set_read_timeout(static_cast<int>(config_.timeout_seconds), 0);
    httplib::Headers headers;
    if (!config_.api_token.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_token);
    }
    const auto res = client.Post(config_.embeddings_path, headers, body.dump(), "application/json");
    if (!res) throw GatewayError("http backend unreachable at " + config_.base_url);
    if (res->status != 200) {
        throw GatewayError("http backend returned HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 200));
    }
    const json reply = json::parse(res->body);
    if (!reply.contains("data")) throw GatewayError("embeddings response malformed: missing data");
    std::vector<std::vector<double>> out;
    for (const auto& item : reply["data"]) {
        out.push_back(item.at("embedding").get<std::vector<double>>());
    }
    return out;
}

}  // namespace vac
