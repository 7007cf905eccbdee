#include "vac/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <thread>

namespace vac {

std::string ModelHandle::describe() const {
    std::string s = backend_id + "/" + model_name;
    if (adapter_ref) s += "@" + *adapter_ref;
    return s;
}

json handle_to_json(const ModelHandle& handle) {
    json j;
    j["backend_id"] = handle.backend_id;
    j["model_name"] = handle.model_name;
    if (handle.adapter_ref) {
        j["adapter_ref"] = *handle.adapter_ref;
    } else {
        j["adapter_ref"] = nullptr;
    }
    return j;
}

ModelHandle handle_from_json(const json& value) {
    ModelHandle h;
    h.backend_id = value.at("backend_id").get<std::string>();
    h.model_name = value.at("model_name").get<std::string>();
    if (value.contains("adapter_ref") && !value["adapter_ref"].is_null()) {
        h.adapter_ref = value["adapter_ref"].get<std::string>();
    }
    return h;
}

// Bounds the number of concurrent backend calls.
class RequestSlots {
public:
    explicit RequestSlots(int count) : available_(count < 1 ? 1 : count) {}
    void acquire() {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

namespace {

struct SlotGuard {
    RequestSlots& slots;
    explicit SlotGuard(RequestSlots& s) : slots(s) { slots.acquire(); }
    ~SlotGuard() { slots.release(); }
};

json request_to_json(const GenerationRequest& r) {
    json j;
    j["backend_id"] = r.handle.backend_id;
    j["model_name"] = r.handle.model_name;
    j["adapter_ref"] = r.handle.adapter_ref ? json(*r.handle.adapter_ref) : json(nullptr);
    j["prompt"] = r.prompt;
    j["temperature"] = r.temperature;
    j["max_tokens"] = r.max_tokens;
    j["n"] = r.n;
    j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
    return j;
}

json result_to_json(const GenerationResult& r) {
    json j;
    j["texts"] = r.texts;
    j["prompt_tokens"] = r.prompt_tokens;
    j["completion_tokens"] = r.completion_tokens;
    return j;
}

GenerationResult result_from_json(const json& j) {
    GenerationResult r;
    r.texts = j.at("texts").get<std::vector<std::string>>();
    r.prompt_tokens = j.value("prompt_tokens", 0);
    r.completion_tokens = j.value("completion_tokens", 0);
    return r;
}

}  // namespace

Gateway::~Gateway() = default;

Gateway::Gateway(GatewayOptions options)
    : options_(std::move(options)),
      slots_(std::make_unique<RequestSlots>(options_.max_parallel_requests)) {
    if (options_.cache_dir) fs::create_directories(*options_.cache_dir);
}

void Gateway::register_backend(const std::string& backend_id, std::shared_ptr<Backend> backend) {
    std::lock_guard<std::mutex> lock(mu_);
    backends_[backend_id] = std::move(backend);
}

bool Gateway::has_backend(const std::string& backend_id) const {
    std::lock_guard<std::mutex> lock(mu_);
    return backends_.count(backend_id) > 0;
}

Backend& Gateway::backend_for(const ModelHandle& handle) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = backends_.find(handle.backend_id);
    if (it == backends_.end()) {
        throw GatewayError("no backend registered for '" + handle.backend_id + "'");
    }
    return *it->second;
}

std::string Gateway::cache_key(const GenerationRequest& request) {
    return sha256_hex(request_to_json(request).dump());
}

std::optional<GenerationResult> Gateway::cache_lookup(const std::string& key) {
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = memory_cache_.find(key);
        if (it != memory_cache_.end()) return it->second;
    }
    if (!options_.cache_dir) return std::nullopt;
    const fs::path entry = *options_.cache_dir / key.substr(0, 2) / (key + ".json");
    if (!fs::exists(entry)) return std::nullopt;
    GenerationResult result = result_from_json(load_json_file(entry).at("result"));
    std::lock_guard<std::mutex> lock(mu_);
    memory_cache_[key] = result;
    return result;
}

void Gateway::cache_store(const std::string& key, const GenerationRequest& request,
                          const GenerationResult& result) {
    {
        std::lock_guard<std::mutex> lock(mu_);
        memory_cache_[key] = result;
    }
    if (!options_.cache_dir) return;
    json entry;
    entry["key"] = key;
    entry["request"] = request_to_json(request);
    entry["result"] = result_to_json(result);
    const fs::path path = *options_.cache_dir / key.substr(0, 2) / (key + ".json");
    // Concurrent writers of the same key produce identical bytes under a
    // fixed seed; last rename wins either way.
    write_file_atomic(path, entry.dump(2) + "\n");
}

GenerationResult Gateway::generate(const GenerationRequest& request) {
    if (request.n < 1) throw GatewayError("generate: n must be >= 1");
    if (request.max_tokens < 1) throw GatewayError("generate: max_tokens must be >= 1");

    const std::string key = cache_key(request);
    if (options_.cache_enabled && options_.cache_reads_enabled) {
        const double start = now_seconds();
        if (auto hit = cache_lookup(key)) {
            hit->from_cache = true;
            hit->latency_seconds = now_seconds() - start;  // lookup only, no network
            std::lock_guard<std::mutex> lock(mu_);
            ++stats_.cache_hits;
            return *hit;
        }
    }

    Backend& backend = backend_for(request.handle);
    GenerationResult result;
    std::string last_error;
    bool ok = false;
    for (int attempt = 0; attempt < options_.retry_attempts && !ok; ++attempt) {
        if (attempt > 0) {
            const double backoff = options_.retry_backoff_seconds * (1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        }
        try {
            SlotGuard guard(*slots_);
            const double start = now_seconds();
            result = backend.generate(request);
            if (result.latency_seconds <= 0.0) result.latency_seconds = now_seconds() - start;
            ok = true;
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    if (!ok) {
        throw GatewayError("backend '" + request.handle.backend_id + "' failed after " +
                           std::to_string(options_.retry_attempts) + " attempts (request " +
                           key.substr(0, 12) + "): " + last_error);
    }
    if (static_cast<int>(result.texts.size()) != request.n) {
        throw GatewayError("backend '" + request.handle.backend_id + "' returned " +
                           std::to_string(result.texts.size()) + " texts, expected " +
                           std::to_string(request.n) + " (request " + key.substr(0, 12) + ")");
    }
    result.from_cache = false;
    {
        std::lock_guard<std::mutex> lock(mu_);
        ++stats_.generate_calls;
    }
    if (options_.cache_enabled) cache_store(key, request, result);
    return result;
}

std::vector<std::vector<double>> Gateway::embed(const ModelHandle& handle,
                                                const std::vector<std::string>& texts) {
    if (texts.empty()) throw GatewayError("embed: texts must be non-empty");
    Backend& backend = backend_for(handle);
    EmbeddingRequest request{handle, texts};
    std::vector<std::vector<double>> vectors;
    try {
        SlotGuard guard(*slots_);
        vectors = backend.embed(request);
    } catch (const std::exception& e) {
        throw GatewayError("embed failed on backend '" + handle.backend_id + "' (batch of " +
                           std::to_string(texts.size()) + "): " + e.what());
    }
    if (vectors.size() != texts.size()) {
        throw GatewayError("embed: backend returned " + std::to_string(vectors.size()) +
                           " vectors for " + std::to_string(texts.size()) + " texts");
    }
    {
        std::lock_guard<std::mutex> lock(mu_);
        ++stats_.embed_calls;
    }
    return vectors;
}

GatewayStats Gateway::stats() const {
    std::lock_guard<std::mutex> lock(mu_);
    return stats_;
}

void Gateway::set_cache_reads_enabled(bool enabled) {
    std::lock_guard<std::mutex> lock(mu_);
    options_.cache_reads_enabled = enabled;
}

}  // namespace vac
