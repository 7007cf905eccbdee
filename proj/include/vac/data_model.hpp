#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vac/util.hpp"

namespace vac {

// One entry of a user profile: a previous question plus its detailed
// description. The pair is the retrieval unit.
struct ProfileDocument {
    std::string doc_id;
    std::string question_text;
    std::string description_text;
};

// One expected element of an ideal answer. oracle_keywords drive the
// deterministic keyword-coverage metric and are absent on real corpora.
struct RubricAspect {
    std::string aspect_id;
    std::string description;
    std::vector<std::string> oracle_keywords;  // empty means "not available"
};

struct UserExample {
    std::string example_id;
    std::string user_id;
    std::string query_text;
    std::string narrative;
    std::vector<ProfileDocument> profile;
    std::vector<RubricAspect> aspects;
};

struct Dataset {
    std::string name;
    std::string split;  // train | validation | test
    std::vector<UserExample> examples;

    const UserExample* find(const std::string& example_id) const;
};

// Returns one human-readable violation per broken invariant; empty when valid.
std::vector<std::string> validate_example(const UserExample& example);

// Line-delimited records, one JSON object per line (see docs/data-format in
// README). Preserves file order; rejects duplicate example ids.
Dataset load_dataset(const fs::path& path, const std::string& split);

json example_to_json(const UserExample& example);
UserExample example_from_json(const json& record, std::size_t record_index);

// Canonical serialization: load(save(d)) == d and save(load(f)) == f for
// files already in canonical form.
std::string serialize_dataset(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const fs::path& path);

struct IntRange {
    int lo = 1;
    int hi = 1;
};

struct SyntheticWorldConfig {
    std::uint64_t seed = 7;
    int num_users = 8;
    IntRange aspects_per_query{3, 5};
    IntRange profile_size{5, 8};
    int vocabulary_size = 400;
    int train_examples_per_user = 2;
    int validation_examples_per_user = 1;
    int test_examples_per_user = 1;
    int keywords_per_aspect = 2;
    // Fraction of each user's recurring keywords planted into profile
    // documents. Must stay < 1 so there is headroom for feedback to add
    // something; every aspect still gets >= 1 planted keyword.
    double planted_keyword_fraction = 0.5;
};

struct SyntheticWorld {
    Dataset train;
    Dataset validation;
    Dataset test;
};

// Pure function of config: same config => byte-identical splits.
SyntheticWorld synth_generate(const SyntheticWorldConfig& config);

void save_world(const SyntheticWorld& world, const fs::path& dir);
SyntheticWorld load_world(const fs::path& dir);

// Adapter from published benchmark files (JSON array or JSONL with the
// upstream field names) to the canonical format. Field names are overridable
// because the upstream schema is not under our control.
struct ConvertFieldMap {
    std::string example_id = "id";
    std::string query = "question";
    std::string narrative = "narrative";
    std::string user_id = "user_id";              // falls back to example_id
    std::string aspects = "rubrics";              // list of strings or objects
    std::string aspect_description = "aspect";    // key inside aspect objects
    std::string profile = "profile";
    std::string profile_id = "id";
    std::string profile_question = "question";
    std::string profile_description = "description";
};

Dataset convert_external_dataset(const fs::path& input, const std::string& split,
                                 const ConvertFieldMap& fields = {});

}  // namespace vac
