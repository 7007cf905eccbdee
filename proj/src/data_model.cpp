#include "vac/data_model.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

namespace vac {

const UserExample* Dataset::find(const std::string& example_id) const {
    for (const auto& ex : examples) {
        if (ex.example_id == example_id) return &ex;
    }
    return nullptr;
}

std::vector<std::string> validate_example(const UserExample& example) {
    std::vector<std::string> violations;
    auto require = [&](bool ok, const std::string& msg) {
        if (!ok) violations.push_back(msg);
    };

    require(!example.example_id.empty(), "example_id: must be non-empty");
    require(!example.user_id.empty(), "user_id: must be non-empty");
    require(!example.query_text.empty(), "query: must be non-empty");
    require(!example.narrative.empty(), "narrative: must be non-empty");
    require(!example.aspects.empty(), "aspects: must be non-empty");

    std::set<std::string> doc_ids;
    for (const auto& doc : example.profile) {
        if (!doc_ids.insert(doc.doc_id).second) {
            violations.push_back("profile: duplicate doc_id '" + doc.doc_id + "'");
        }
        require(!doc.question_text.empty(),
                "profile: question must be non-empty (doc_id '" + doc.doc_id + "')");
    }

    for (const auto& aspect : example.aspects) {
        require(!aspect.description.empty(),
                "aspects: description must be non-empty (aspect '" + aspect.aspect_id + "')");
        for (const auto& kw : aspect.oracle_keywords) {
            const bool well_formed =
                !kw.empty() && tokenize(kw).size() == 1 && kw == to_lower(kw);
            require(well_formed, "aspects: keyword '" + kw + "' must be a non-empty lowercase token (aspect '" +
                                     aspect.aspect_id + "')");
        }
    }
    return violations;
}

json example_to_json(const UserExample& example) {
    json record;
    record["example_id"] = example.example_id;
    record["user_id"] = example.user_id;
    record["query"] = example.query_text;
    record["narrative"] = example.narrative;
    json aspects = json::array();
    for (const auto& aspect : example.aspects) {
        json a;
        a["id"] = aspect.aspect_id;
        a["description"] = aspect.description;
        if (!aspect.oracle_keywords.empty()) a["keywords"] = aspect.oracle_keywords;
        aspects.push_back(std::move(a));
    }
    record["aspects"] = std::move(aspects);
    json profile = json::array();
    for (const auto& doc : example.profile) {
        json d;
        d["id"] = doc.doc_id;
        d["question"] = doc.question_text;
        d["description"] = doc.description_text;
        profile.push_back(std::move(d));
    }
    record["profile"] = std::move(profile);
    return record;
}

namespace {

const json& require_field(const json& record, const std::string& key, std::size_t record_index) {
    auto it = record.find(key);
    if (it == record.end()) {
        throw DataError("record " + std::to_string(record_index) + ": missing field '" + key + "'");
    }
    return *it;
}

std::string require_string(const json& record, const std::string& key, std::size_t record_index) {
    const json& value = require_field(record, key, record_index);
    if (!value.is_string()) {
        throw DataError("record " + std::to_string(record_index) + ": field '" + key +
                        "' must be a string");
    }
    return value.get<std::string>();
}

}  // namespace

UserExample example_from_json(const json& record, std::size_t record_index) {
    if (!record.is_object()) {
        throw DataError("record " + std::to_string(record_index) + ": not a JSON object");
    }
    UserExample ex;
    ex.example_id = require_string(record, "example_id", record_index);
    ex.user_id = require_string(record, "user_id", record_index);
    ex.query_text = require_string(record, "query", record_index);
    ex.narrative = require_string(record, "narrative", record_index);

    const json& aspects = require_field(record, "aspects", record_index);
    for (const auto& a : aspects) {
        RubricAspect aspect;
        aspect.aspect_id = a.value("id", "");
        aspect.description = a.value("description", "");
        if (a.contains("keywords")) {
            aspect.oracle_keywords = a["keywords"].get<std::vector<std::string>>();
        }
        ex.aspects.push_back(std::move(aspect));
    }
    const json& profile = require_field(record, "profile", record_index);
    for (const auto& d : profile) {
        ProfileDocument doc;
        doc.doc_id = d.value("id", "");
        doc.question_text = d.value("question", "");
        doc.description_text = d.value("description", "");
        ex.profile.push_back(std::move(doc));
    }

    const auto violations = validate_example(ex);
    if (!violations.empty()) {
        throw DataError("record " + std::to_string(record_index) + " (example_id '" +
                        ex.example_id + "'): " + join(violations, "; "));
    }
    return ex;
}

Dataset load_dataset(const fs::path& path, const std::string& split) {
    if (!fs::exists(path)) throw DataError("dataset file not found: " + path.string());
    Dataset ds;
    ds.name = path.stem().string();
    ds.split = split;

    std::istringstream in(read_file(path));
    std::string line;
    std::size_t record_index = 0;
    std::set<std::string> seen_ids;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++record_index;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("record " + std::to_string(record_index) + ": invalid JSON: " +
                            e.what());
        }
        UserExample ex = example_from_json(record, record_index);
        if (!seen_ids.insert(ex.example_id).second) {
            throw DataError("record " + std::to_string(record_index) + ": duplicate example_id '" +
                            ex.example_id + "'");
        }
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

std::string serialize_dataset(const Dataset& dataset) {
    std::string out;
    for (const auto& ex : dataset.examples) {
        out += example_to_json(ex).dump();
        out += '\n';
    }
    return out;
}

void save_dataset(const Dataset& dataset, const fs::path& path) {
    write_file_atomic(path, serialize_dataset(dataset));
}

// ---------------------------------------------------------------------------
// Synthetic world
// ---------------------------------------------------------------------------

namespace {

// Deterministic pseudoword vocabulary. Three base-16 syllable digits give
// 4096 distinct words.
const char* kSyllables[16] = {"ba", "ce", "di", "fo", "gu", "ka", "le", "mi",
                              "no", "pu", "ra", "se", "ti", "vo", "zu", "ny"};

std::string vocab_word(int index) {
    std::string w;
    w += kSyllables[index & 0xf];
    w += kSyllables[(index >> 4) & 0xf];
    w += kSyllables[(index >> 8) & 0xf];
    return w;
}

struct SyntheticUser {
    std::string user_id;
    std::vector<std::string> recurring;  // recurring aspect keywords
    std::vector<std::string> planted;    // subset mentioned by profile docs
    std::vector<ProfileDocument> profile;
};

std::string aspect_sentence(const std::vector<std::string>& kws) {
    if (kws.size() == 1) return "The answer should mention " + kws[0] + ".";
    std::string s = "The answer should mention ";
    for (std::size_t i = 0; i + 1 < kws.size(); ++i) {
        if (i) s += ", ";
        s += kws[i];
    }
    s += " and " + kws.back() + ".";
    return s;
}

}  // namespace

SyntheticWorld synth_generate(const SyntheticWorldConfig& config) {
    if (config.num_users < 1) throw ConfigError("synth: num_users must be >= 1");
    if (config.vocabulary_size < 50 || config.vocabulary_size > 4096) {
        throw ConfigError("synth: vocabulary_size must be in [50, 4096]");
    }
    if (config.aspects_per_query.lo < 1 || config.aspects_per_query.hi < config.aspects_per_query.lo) {
        throw ConfigError("synth: aspects_per_query range must be positive and ordered");
    }
    if (config.profile_size.lo < 1 || config.profile_size.hi < config.profile_size.lo) {
        throw ConfigError("synth: profile_size range must be positive and ordered");
    }
    if (config.keywords_per_aspect < 1) throw ConfigError("synth: keywords_per_aspect must be >= 1");
    if (config.planted_keyword_fraction <= 0.0 || config.planted_keyword_fraction > 1.0) {
        throw ConfigError("synth: planted_keyword_fraction must be in (0, 1]");
    }

    std::mt19937_64 rng(config.seed);
    auto any_word = [&] { return vocab_word(static_cast<int>(rng_below(rng, config.vocabulary_size))); };

    const int recurring_count = 12;
    std::vector<SyntheticUser> users;
    users.reserve(config.num_users);
    for (int u = 0; u < config.num_users; ++u) {
        SyntheticUser user;
        user.user_id = "u" + std::to_string(u);

        std::set<int> chosen;
        while (static_cast<int>(chosen.size()) < recurring_count) {
            chosen.insert(static_cast<int>(rng_below(rng, config.vocabulary_size)));
        }
        for (int idx : chosen) user.recurring.push_back(vocab_word(idx));

        const int planted_count = std::max(
            1, static_cast<int>(recurring_count * config.planted_keyword_fraction + 0.5));
        // First planted_count recurring keywords, shuffled deterministically.
        std::vector<std::string> pool = user.recurring;
        for (std::size_t i = pool.size(); i > 1; --i) {
            std::swap(pool[i - 1], pool[rng_below(rng, i)]);
        }
        user.planted.assign(pool.begin(), pool.begin() + planted_count);
        std::sort(user.planted.begin(), user.planted.end());

        const int num_docs = rng_range(rng, config.profile_size.lo, config.profile_size.hi);
        for (int d = 0; d < num_docs; ++d) {
            ProfileDocument doc;
            doc.doc_id = user.user_id + "-d" + std::to_string(d);
            doc.question_text = "How should I deal with " + any_word() + " when " + any_word() +
                                " keeps coming up?";
            doc.description_text = "I have been thinking about " + any_word() + " lately.";
            user.profile.push_back(std::move(doc));
        }
        // Plant every planted keyword into at least one document.
        for (std::size_t k = 0; k < user.planted.size(); ++k) {
            ProfileDocument& doc = user.profile[k % user.profile.size()];
            doc.description_text += " In my experience " + user.planted[k] + " matters a lot.";
        }
        // Extra mentions for texture.
        for (auto& doc : user.profile) {
            if (rng_below(rng, 2) == 0) {
                doc.question_text += " Also curious about " +
                                     user.planted[rng_below(rng, user.planted.size())] + ".";
            }
        }
        users.push_back(std::move(user));
    }

    auto make_example = [&](const SyntheticUser& user, const std::string& split,
                            int index) -> UserExample {
        UserExample ex;
        ex.example_id = split + "-" + user.user_id + "-q" + std::to_string(index);
        ex.user_id = user.user_id;
        ex.profile = user.profile;

        const int num_aspects = rng_range(rng, config.aspects_per_query.lo, config.aspects_per_query.hi);
        std::set<std::string> used;
        for (int a = 0; a < num_aspects; ++a) {
            RubricAspect aspect;
            aspect.aspect_id = ex.example_id + "-a" + std::to_string(a);
            // First keyword always comes from the planted subset so retrieval
            // carries signal for every aspect.
            std::vector<std::string> kws;
            for (int k = 0; k < config.keywords_per_aspect; ++k) {
                const std::vector<std::string>& pool = (k == 0) ? user.planted : user.recurring;
                std::string kw;
                for (int attempt = 0; attempt < 64; ++attempt) {
                    kw = pool[rng_below(rng, pool.size())];
                    if (used.insert(kw).second) break;
                    kw.clear();
                }
                if (kw.empty()) {
                    // Pool exhausted; fall back to a fresh vocabulary word.
                    do {
                        kw = any_word();
                    } while (!used.insert(kw).second);
                }
                kws.push_back(kw);
            }
            aspect.oracle_keywords = kws;
            aspect.description = aspect_sentence(kws);
            ex.aspects.push_back(std::move(aspect));
        }

        ex.query_text = "I keep running into " + ex.aspects[0].oracle_keywords[0] + " and " +
                        any_word() + ". What should I do about it?";
        std::string narrative = "I am asking this because of my ongoing situation with " +
                                ex.aspects[0].oracle_keywords[0] + ". An ideal answer covers the following.";
        for (const auto& aspect : ex.aspects) {
            narrative += " " + aspect.description;
        }
        ex.narrative = narrative;
        return ex;
    };

    SyntheticWorld world;
    world.train.name = "synthetic";
    world.train.split = "train";
    world.validation.name = "synthetic";
    world.validation.split = "validation";
    world.test.name = "synthetic";
    world.test.split = "test";
    for (const auto& user : users) {
        for (int i = 0; i < config.train_examples_per_user; ++i) {
            world.train.examples.push_back(make_example(user, "train", i));
        }
        for (int i = 0; i < config.validation_examples_per_user; ++i) {
            world.validation.examples.push_back(make_example(user, "validation", i));
        }
        for (int i = 0; i < config.test_examples_per_user; ++i) {
            world.test.examples.push_back(make_example(user, "test", i));
        }
    }
    return world;
}

void save_world(const SyntheticWorld& world, const fs::path& dir) {
    fs::create_directories(dir);
    save_dataset(world.train, dir / "train.jsonl");
    save_dataset(world.validation, dir / "validation.jsonl");
    save_dataset(world.test, dir / "test.jsonl");
}

SyntheticWorld load_world(const fs::path& dir) {
    SyntheticWorld world;
    world.train = load_dataset(dir / "train.jsonl", "train");
    world.validation = load_dataset(dir / "validation.jsonl", "validation");
    world.test = load_dataset(dir / "test.jsonl", "test");
    return world;
}

// ---------------------------------------------------------------------------
// External benchmark adapter
// ---------------------------------------------------------------------------

Dataset convert_external_dataset(const fs::path& input, const std::string& split,
                                 const ConvertFieldMap& fields) {
    if (!fs::exists(input)) throw DataError("input file not found: " + input.string());
    const std::string text = read_file(input);

    std::vector<json> records;
    // Accept either one JSON array or line-delimited objects.
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
        json arr = json::parse(text);
        for (auto& r : arr) records.push_back(std::move(r));
    } else {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            records.push_back(json::parse(line));
        }
    }

    Dataset ds;
    ds.name = input.stem().string();
    ds.split = split;
    std::size_t index = 0;
    for (const auto& record : records) {
        ++index;
        UserExample ex;
        const json& id_field = require_field(record, fields.example_id, index);
        ex.example_id = id_field.is_string() ? id_field.get<std::string>() : id_field.dump();
        ex.query_text = require_string(record, fields.query, index);
        ex.narrative = require_string(record, fields.narrative, index);
        if (record.contains(fields.user_id) && record[fields.user_id].is_string()) {
            ex.user_id = record[fields.user_id].get<std::string>();
        } else {
            ex.user_id = "user-" + ex.example_id;
        }

        const json* aspects = nullptr;
        if (record.contains(fields.aspects)) {
            aspects = &record[fields.aspects];
        } else if (record.contains("aspects")) {
            aspects = &record["aspects"];
        } else {
            throw DataError("record " + std::to_string(index) + ": missing field '" +
                            fields.aspects + "'");
        }
        int a_index = 0;
        for (const auto& a : *aspects) {
            RubricAspect aspect;
            aspect.aspect_id = ex.example_id + "-a" + std::to_string(a_index++);
            if (a.is_string()) {
                aspect.description = a.get<std::string>();
            } else if (a.is_object()) {
                if (a.contains(fields.aspect_description)) {
                    aspect.description = a[fields.aspect_description].get<std::string>();
                } else if (a.contains("description")) {
                    aspect.description = a["description"].get<std::string>();
                }
                if (a.contains("keywords")) {
                    aspect.oracle_keywords = a["keywords"].get<std::vector<std::string>>();
                }
            }
            ex.aspects.push_back(std::move(aspect));
        }

        if (record.contains(fields.profile)) {
            int d_index = 0;
            for (const auto& d : record[fields.profile]) {
                ProfileDocument doc;
                doc.doc_id = d.contains(fields.profile_id)
                                 ? (d[fields.profile_id].is_string()
                                        ? d[fields.profile_id].get<std::string>()
                                        : d[fields.profile_id].dump())
                                 : ex.example_id + "-d" + std::to_string(d_index);
                ++d_index;
                doc.question_text = d.value(fields.profile_question, "");
                doc.description_text = d.value(fields.profile_description, "");
                ex.profile.push_back(std::move(doc));
            }
        }

        const auto violations = validate_example(ex);
        if (!violations.empty()) {
            throw DataError("record " + std::to_string(index) + " (example_id '" + ex.example_id +
                            "'): " + join(violations, "; "));
        }
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

}  // namespace vac
