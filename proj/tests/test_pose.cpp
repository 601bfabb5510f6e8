#include <doctest.h>

#include <string>

#include "wisppn/common.hpp"
#include "wisppn/pose.hpp"

using namespace wisppn;

namespace {

std::string keypoint_triples(double x0, double conf) {
    std::string s = "[";
    for (int i = 0; i < kNumKeypoints; ++i) {
        if (i) s += ",";
        s += "[" + std::to_string(x0 + i) + "," + std::to_string(50.0 + i) + "," +
             std::to_string(conf) + "]";
    }
    return s + "]";
}

Keypoints uniform_person(double conf, double x0 = 10.0) {
    Keypoints kp;
    for (int i = 0; i < kNumKeypoints; ++i) kp[i] = {x0 + i, 50.0 + i, conf};
    return kp;
}

}  // namespace

TEST_CASE("empty annotation text parses to an empty sequence") {
    CHECK(parse_annotations("").empty());
    CHECK(parse_annotations("\n\n").empty());
}

TEST_CASE("one line with one person round-trips through write/parse") {
    FrameAnnotation fa;
    fa.timestamp_us = 123456;
    fa.persons.push_back({uniform_person(0.75), 0.9});
    const auto parsed = parse_annotations(write_annotations({fa}));
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].timestamp_us == 123456);
    REQUIRE(parsed[0].persons.size() == 1);
    CHECK(parsed[0].persons[0].score == 0.9);
    for (int i = 0; i < kNumKeypoints; ++i) {
        CHECK(parsed[0].persons[0].keypoints[i].x == 10.0 + i);
        CHECK(parsed[0].persons[0].keypoints[i].c == 0.75);
    }
}

TEST_CASE("wrong keypoint arity names the offending line") {
    const std::string line =
        R"({"timestamp_us": 1, "persons": [{"keypoints": [[1,2,0.5]], "score": 1.0}]})";
    CHECK_THROWS_AS(parse_annotations(line), FormatError);
    try {
        parse_annotations("\n" + line);
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
    }
}

TEST_CASE("malformed records and invalid fields are format errors") {
    CHECK_THROWS_AS(parse_annotations("{not json"), FormatError);
    CHECK_THROWS_AS(parse_annotations(R"({"timestamp_us": 1})"), FormatError);
    // confidence outside [0,1]
    std::string bad = R"({"timestamp_us": 1, "persons": [{"keypoints": [)";
    for (int i = 0; i < kNumKeypoints; ++i) bad += std::string(i ? "," : "") + "[1,2,1.5]";
    bad += R"(], "score": 1.0}]})";
    CHECK_THROWS_AS(parse_annotations(bad), FormatError);
    // timestamps must strictly increase
    FrameAnnotation fa;
    fa.timestamp_us = 10;
    const std::string two = write_annotations({fa}) + write_annotations({fa});
    CHECK_THROWS_AS(parse_annotations(two), FormatError);
}

TEST_CASE("select_person keeps the single person and prefers higher confidence") {
    FrameAnnotation fa;
    fa.timestamp_us = 1;
    CHECK(!select_person(fa).has_value());

    fa.persons.push_back({uniform_person(0.8), 0.5});
    auto kp = select_person(fa);
    REQUIRE(kp.has_value());
    CHECK((*kp)[0].c == 0.8);

    fa.persons.push_back({uniform_person(0.6), 0.99});  // higher score, lower confidence
    kp = select_person(fa);
    REQUIRE(kp.has_value());
    CHECK((*kp)[0].c == 0.8);
}

TEST_CASE("ties keep the first occurrence") {
    FrameAnnotation fa;
    fa.timestamp_us = 1;
    fa.persons.push_back({uniform_person(0.7, 100.0), 0.1});
    fa.persons.push_back({uniform_person(0.7, 200.0), 0.2});
    const auto kp = select_person(fa);
    REQUIRE(kp.has_value());
    CHECK((*kp)[0].x == 100.0);
}

TEST_CASE("select_person matches brute-force argmax over mean confidence") {
    Rng rng(60);
    for (int trial = 0; trial < 20; ++trial) {
        FrameAnnotation fa;
        fa.timestamp_us = 1;
        for (int p = 0; p < 10; ++p) {
            Keypoints kp;
            for (int i = 0; i < kNumKeypoints; ++i)
                kp[i] = {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0),
                         rng.uniform(0.0, 1.0)};
            fa.persons.push_back({kp, rng.uniform(0.0, 1.0)});
        }
        std::size_t best = 0;
        double best_conf = -1.0;
        for (std::size_t p = 0; p < fa.persons.size(); ++p) {
            double s = 0.0;
            for (int i = 0; i < kNumKeypoints; ++i) s += fa.persons[p].keypoints[i].c;
            if (s / kNumKeypoints > best_conf) {
                best_conf = s / kNumKeypoints;
                best = p;
            }
        }
        const auto kp = select_person(fa);
        REQUIRE(kp.has_value());
        for (int i = 0; i < kNumKeypoints; ++i) {
            CHECK((*kp)[i].x == fa.persons[best].keypoints[i].x);
            CHECK((*kp)[i].c == fa.persons[best].keypoints[i].c);
        }
    }
}

TEST_CASE("selection is invariant to permutations and confidence scaling") {
    Rng rng(61);
    FrameAnnotation fa;
    fa.timestamp_us = 1;
    for (int p = 0; p < 6; ++p)
        fa.persons.push_back({uniform_person(0.3 + 0.1 * p, 10.0 * p), 0.5});
    const auto baseline = select_person(fa);
    REQUIRE(baseline.has_value());

    for (int trial = 0; trial < 10; ++trial) {
        FrameAnnotation shuffled = fa;
        rng.shuffle(shuffled.persons);
        const auto kp = select_person(shuffled);
        REQUIRE(kp.has_value());
        CHECK((*kp)[0].x == (*baseline)[0].x);
    }

    FrameAnnotation scaled = fa;
    for (auto& person : scaled.persons)
        for (int i = 0; i < kNumKeypoints; ++i) person.keypoints[i].c *= 0.5;
    const auto kp = select_person(scaled);
    REQUIRE(kp.has_value());
    CHECK((*kp)[0].x == (*baseline)[0].x);
}
