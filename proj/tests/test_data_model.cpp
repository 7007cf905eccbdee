#include <doctest.h>

#include <set>

#include "vac/data_model.hpp"

using namespace vac;

namespace {

UserExample valid_example() {
    UserExample ex;
    ex.example_id = "e1";
    ex.user_id = "u1";
    ex.query_text = "How do I fix my sourdough starter?";
    ex.narrative = "I bake weekly and my starter smells off.";
    ex.profile = {{"d1", "How long should I proof?", "I bake rye bread on weekends."},
                  {"d2", "Which flour for sourdough?", "I prefer whole grain."}};
    ex.aspects = {{"a1", "Mention hydration and temperature.", {"hydration", "temperature"}}};
    return ex;
}

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "vac-data-test";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("validate_example accepts a well-formed example") {
    CHECK(validate_example(valid_example()).empty());
}

TEST_CASE("validate_example flags empty aspects") {
    UserExample ex = valid_example();
    ex.aspects.clear();
    const auto violations = validate_example(ex);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0] == "aspects: must be non-empty");
}

TEST_CASE("validate_example flags duplicate doc ids") {
    UserExample ex = valid_example();
    ex.profile.push_back(ex.profile[0]);
    const auto violations = validate_example(ex);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].find("duplicate doc_id 'd1'") != std::string::npos);
}

TEST_CASE("validate_example flags malformed keywords") {
    UserExample ex = valid_example();
    ex.aspects[0].oracle_keywords = {"Two Words"};
    CHECK_FALSE(validate_example(ex).empty());
    ex.aspects[0].oracle_keywords = {"UPPER"};
    CHECK_FALSE(validate_example(ex).empty());
    ex.aspects[0].oracle_keywords = {""};
    CHECK_FALSE(validate_example(ex).empty());
}

TEST_CASE("load_dataset round-trips and preserves order") {
    const fs::path dir = temp_dir();
    Dataset ds;
    ds.name = "tiny";
    ds.split = "train";
    for (int i = 0; i < 3; ++i) {
        UserExample ex = valid_example();
        ex.example_id = "e" + std::to_string(i);
        ds.examples.push_back(ex);
    }
    const fs::path file = dir / "tiny.jsonl";
    save_dataset(ds, file);

    const Dataset loaded = load_dataset(file, "train");
    REQUIRE(loaded.examples.size() == 3);
    CHECK(loaded.examples[0].example_id == "e0");
    CHECK(loaded.examples[2].example_id == "e2");

    // Canonical form: serialize(load(f)) == f.
    CHECK(serialize_dataset(loaded) == read_file(file));
    fs::remove_all(dir);
}

TEST_CASE("load_dataset errors cite the record and field") {
    const fs::path dir = temp_dir();
    const fs::path file = dir / "broken.jsonl";
    json good = example_to_json(valid_example());
    json bad = good;
    bad.erase("narrative");
    bad["example_id"] = "e2";
    write_file_atomic(file, good.dump() + "\n" + bad.dump() + "\n");

    try {
        load_dataset(file, "train");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("record 2") != std::string::npos);
        CHECK(msg.find("narrative") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("load_dataset rejects duplicate example ids") {
    const fs::path dir = temp_dir();
    const fs::path file = dir / "dup.jsonl";
    const json record = example_to_json(valid_example());
    write_file_atomic(file, record.dump() + "\n" + record.dump() + "\n");
    CHECK_THROWS_WITH_AS(load_dataset(file, "train"),
                         doctest::Contains("duplicate example_id"), DataError);
    fs::remove_all(dir);
}

TEST_CASE("synth_generate is byte-deterministic under seed") {
    SyntheticWorldConfig config;
    config.seed = 7;
    config.num_users = 4;
    const SyntheticWorld a = synth_generate(config);
    const SyntheticWorld b = synth_generate(config);
    CHECK(serialize_dataset(a.train) == serialize_dataset(b.train));
    CHECK(serialize_dataset(a.validation) == serialize_dataset(b.validation));
    CHECK(serialize_dataset(a.test) == serialize_dataset(b.test));

    config.seed = 8;
    const SyntheticWorld c = synth_generate(config);
    CHECK(serialize_dataset(a.train) != serialize_dataset(c.train));
}

TEST_CASE("synth_generate respects the aspects-per-query range") {
    SyntheticWorldConfig config;
    config.seed = 11;
    config.num_users = 10;
    config.aspects_per_query = {3, 5};
    const SyntheticWorld world = synth_generate(config);
    for (const Dataset* ds : {&world.train, &world.validation, &world.test}) {
        for (const auto& ex : ds->examples) {
            CHECK(ex.aspects.size() >= 3);
            CHECK(ex.aspects.size() <= 5);
        }
    }
}

TEST_CASE("synthetic examples validate and every aspect has a planted keyword") {
    SyntheticWorldConfig config;
    config.seed = 3;
    config.num_users = 6;
    const SyntheticWorld world = synth_generate(config);
    for (const Dataset* ds : {&world.train, &world.validation, &world.test}) {
        REQUIRE(!ds->examples.empty());
        for (const auto& ex : ds->examples) {
            CHECK(validate_example(ex).empty());
            // Every aspect has >= 1 oracle keyword present in some profile doc.
            for (const auto& aspect : ex.aspects) {
                REQUIRE(!aspect.oracle_keywords.empty());
                bool planted = false;
                for (const auto& kw : aspect.oracle_keywords) {
                    for (const auto& doc : ex.profile) {
                        if (contains_token(doc.question_text + " " + doc.description_text, kw)) {
                            planted = true;
                            break;
                        }
                    }
                    if (planted) break;
                }
                CHECK(planted);
            }
        }
    }
}

TEST_CASE("synthetic world leaves headroom: some keywords are absent from the profile") {
    SyntheticWorldConfig config;
    config.seed = 5;
    config.num_users = 6;
    const SyntheticWorld world = synth_generate(config);
    int hidden = 0;
    for (const auto& ex : world.train.examples) {
        std::string profile_text;
        for (const auto& doc : ex.profile) {
            profile_text += doc.question_text + " " + doc.description_text + " ";
        }
        for (const auto& aspect : ex.aspects) {
            for (const auto& kw : aspect.oracle_keywords) {
                if (!contains_token(profile_text, kw)) ++hidden;
            }
        }
    }
    CHECK(hidden > 0);
}

TEST_CASE("synthetic queries are unique across the world") {
    SyntheticWorldConfig config;
    config.seed = 13;
    config.num_users = 8;
    const SyntheticWorld world = synth_generate(config);
    std::set<std::string> queries;
    std::size_t total = 0;
    for (const Dataset* ds : {&world.train, &world.validation, &world.test}) {
        for (const auto& ex : ds->examples) {
            queries.insert(ex.query_text);
            ++total;
        }
    }
    CHECK(queries.size() == total);
}

TEST_CASE("convert_external_dataset maps upstream field names") {
    const fs::path dir = temp_dir();
    const fs::path input = dir / "upstream.json";
    json record;
    record["id"] = "q-42";
    record["question"] = "What trail mix should I bring?";
    record["narrative"] = "I hike long distances and avoid peanuts.";
    record["rubrics"] = json::array({"Mention peanut-free options", "Mention calorie density"});
    record["profile"] = json::array(
        {json{{"id", "p1"}, {"question", "Best hiking boots?"}, {"description", "I hike weekly."}}});
    write_file_atomic(input, json::array({record}).dump());

    const Dataset ds = convert_external_dataset(input, "test");
    REQUIRE(ds.examples.size() == 1);
    const UserExample& ex = ds.examples[0];
    CHECK(ex.example_id == "q-42");
    CHECK(ex.query_text == "What trail mix should I bring?");
    CHECK(ex.aspects.size() == 2);
    CHECK(ex.profile.size() == 1);
    CHECK(validate_example(ex).empty());
    fs::remove_all(dir);
}
