#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vac/util.hpp"

namespace vac {

// Opaque identity of a generation behavior. (backend_id, model_name,
// adapter_ref) is the cache identity; adapter_ref carries fine-tuned
// checkpoint tags.
struct ModelHandle {
    std::string backend_id;
    std::string model_name;
    std::optional<std::string> adapter_ref;

    bool operator==(const ModelHandle& other) const = default;
    std::string describe() const;
};

json handle_to_json(const ModelHandle& handle);
ModelHandle handle_from_json(const json& value);

struct GenerationRequest {
    ModelHandle handle;
    std::string prompt;
    double temperature = 0.1;
    int max_tokens = 1024;
    int n = 1;
    std::optional<std::uint64_t> seed;
};

struct GenerationResult {
    std::vector<std::string> texts;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    double latency_seconds = 0.0;
    bool from_cache = false;
};

struct EmbeddingRequest {
    ModelHandle handle;
    std::vector<std::string> texts;
};

// A model backend. Implementations must be deterministic under a fixed
// request seed where the contract (scripted/synthetic) promises it.
class Backend {
public:
    virtual ~Backend() = default;
    virtual GenerationResult generate(const GenerationRequest& request) = 0;
    virtual std::vector<std::vector<double>> embed(const EmbeddingRequest& request) = 0;
};

struct GatewayOptions {
    std::optional<fs::path> cache_dir;  // unset: in-memory cache only
    bool cache_enabled = true;
    bool cache_reads_enabled = true;  // --no-cache turns reads off, keeps writes
    int max_parallel_requests = 8;
    int retry_attempts = 3;
    double retry_backoff_seconds = 0.05;
};

struct GatewayStats {
    std::uint64_t generate_calls = 0;   // requests that reached a backend
    std::uint64_t cache_hits = 0;
    std::uint64_t embed_calls = 0;
};

// Routes generation/embedding requests to registered backends with a
// content-addressed read-through cache. Safe for concurrent callers; the
// number of in-flight backend calls is bounded by max_parallel_requests.
class Gateway {
public:
    explicit Gateway(GatewayOptions options = GatewayOptions());
    ~Gateway();

    void register_backend(const std::string& backend_id, std::shared_ptr<Backend> backend);
    bool has_backend(const std::string& backend_id) const;

    GenerationResult generate(const GenerationRequest& request);
    std::vector<std::vector<double>> embed(const ModelHandle& handle,
                                           const std::vector<std::string>& texts);

    // Stable digest over every request field; any change changes the key.
    static std::string cache_key(const GenerationRequest& request);

    GatewayStats stats() const;
    const GatewayOptions& options() const { return options_; }
    void set_cache_reads_enabled(bool enabled);

private:
    Backend& backend_for(const ModelHandle& handle) const;
    std::optional<GenerationResult> cache_lookup(const std::string& key);
    void cache_store(const std::string& key, const GenerationRequest& request,
                     const GenerationResult& result);

    GatewayOptions options_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Backend>> backends_;
    std::map<std::string, GenerationResult> memory_cache_;
    GatewayStats stats_;
    std::unique_ptr<class RequestSlots> slots_;
};

}  // namespace vac
