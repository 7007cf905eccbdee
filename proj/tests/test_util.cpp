#include <doctest.h>

#include <set>
#include <thread>

#include "vac/util.hpp"

using namespace vac;

TEST_CASE("sha256 known vectors") {
    // NIST test vectors.
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("derive_seed is stable and label-sensitive") {
    const auto a = derive_seed(7, "iter1/feedback/u0-q0");
    CHECK(a == derive_seed(7, "iter1/feedback/u0-q0"));
    CHECK(a != derive_seed(7, "iter1/feedback/u0-q1"));
    CHECK(a != derive_seed(8, "iter1/feedback/u0-q0"));
}

TEST_CASE("tokenize lowercases and strips punctuation") {
    CHECK(tokenize("Hello, World! 42") == std::vector<std::string>{"hello", "world", "42"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("--- ---") == std::vector<std::string>{});
    CHECK(contains_token("I like apples.", "Apples"));
    CHECK_FALSE(contains_token("pineapples are fine", "apples"));
}

TEST_CASE("write_file_atomic round-trips bytes") {
    const fs::path dir = fs::temp_directory_path() / "vac-util-test";
    fs::create_directories(dir);
    const fs::path file = dir / "payload.bin";
    const std::string content = "line1\nline2\n\xc3\xa9";
    write_file_atomic(file, content);
    CHECK(read_file(file) == content);
    fs::remove_all(dir);
}

TEST_CASE("parallel_for covers every index exactly once") {
    std::vector<int> hits(500, 0);
    parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
}

TEST_CASE("parallel_for propagates the first exception") {
    CHECK_THROWS_AS(parallel_for(16, 4,
                                 [&](std::size_t i) {
                                     if (i == 7) throw VacError("boom");
                                 }),
                    VacError);
}
