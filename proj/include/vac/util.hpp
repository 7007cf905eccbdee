#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace vac {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct VacError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : VacError {
    using VacError::VacError;
};
struct ConfigError : VacError {
    using VacError::VacError;
};
struct GatewayError : VacError {
    using VacError::VacError;
};
struct TrainerError : VacError {
    using VacError::VacError;
};

// Hex-encoded SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view data);

// 64-bit FNV-1a, used for seed derivation and cheap content hashing.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Derive a stage-local seed from the run's root seed and a label such as
// "iter1/feedback/u3-q0". Stable across platforms.
std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view label);

// Draw a value in [0, n) from a raw 64-bit generator output stream.
// Kept implementation-defined-free so datasets are byte-identical everywhere.
template <typename Rng>
std::uint64_t rng_below(Rng& rng, std::uint64_t n) {
    return n == 0 ? 0 : rng() % n;
}
template <typename Rng>
int rng_range(Rng& rng, int lo, int hi) {  // inclusive bounds
    if (hi <= lo) return lo;
    return lo + static_cast<int>(rng_below(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

std::string to_lower(std::string_view text);

// Lowercase, replace punctuation with spaces, split on whitespace.
std::vector<std::string> tokenize(std::string_view text);

// True if `token` occurs in `text` as a whole token under tokenize().
bool contains_token(std::string_view text, std::string_view token);

double now_seconds();

std::string read_file(const fs::path& path);
// Write via temp file + rename so concurrent readers never see partial content.
void write_file_atomic(const fs::path& path, std::string_view content);

json load_json_file(const fs::path& path);
void save_json_file(const fs::path& path, const json& value, bool pretty = true);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Run fn(0..n-1) on up to `threads` workers. Exceptions are captured and the
// first one is rethrown after all workers finish. threads <= 1 runs inline.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

void log_warn(const std::string& msg);
void log_info(const std::string& msg);

}  // namespace vac
