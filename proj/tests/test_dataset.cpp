#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "evslt/dataset.hpp"
#include "evslt/errors.hpp"
#include "evslt/vocab.hpp"

using namespace evslt;
namespace fs = std::filesystem;

namespace {

// fresh scratch directory per case, removed on destruction
struct ScratchDir {
    fs::path dir;
    explicit ScratchDir(const std::string& name) : dir(fs::temp_directory_path() / name) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~ScratchDir() { fs::remove_all(dir); }
    std::string file(const std::string& rel) const { return (dir / rel).string(); }
};

EventStream tiny_stream() {
    EventStream s;
    s.width = 4;
    s.height = 4;
    s.points = {{0, 0, 0, 1}, {1, 1, 10, -1}, {3, 2, 20, 1}, {2, 3, 30, 1}};
    return s;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    for (const auto& l : lines) out << l << '\n';
}

FrameTensor counting_tensor(int64_t t, int64_t c, int64_t h, int64_t w) {
    FrameTensor f;
    f.frames = t;
    f.channels = c;
    f.height = h;
    f.width = w;
    f.data.resize(static_cast<size_t>(t * c * h * w));
    for (size_t i = 0; i < f.data.size(); ++i) f.data[i] = static_cast<float>(i);
    return f;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("manifests survive a save and load round trip") {
    ScratchDir sd("evslt_manifest_rt");
    write_events(tiny_stream(), sd.file("a.evst"));
    write_events(tiny_stream(), sd.file("b.evst"));

    std::vector<ManifestEntry> entries = {
        {"a", "a.evst", "w0 w1", "train"},
        {"b", "b.evst", "w2", "val"},
    };
    const std::string path = sd.file("manifest.jsonl");
    save_manifest(path, entries);

    const Manifest m = load_manifest(path);
    REQUIRE(m.entries.size() == 2);
    CHECK(m.dir == sd.dir.string());
    CHECK(m.entries[0].id == "a");
    CHECK(m.entries[0].events_path == "a.evst");
    CHECK(m.entries[0].text == "w0 w1");
    CHECK(m.entries[0].split == "train");
    CHECK(m.entries[1].id == "b");
    CHECK(m.entries[1].split == "val");
}

TEST_CASE("manifest validation rejects broken inputs") {
    ScratchDir sd("evslt_manifest_bad");
    write_events(tiny_stream(), sd.file("a.evst"));
    const std::string path = sd.file("manifest.jsonl");

    SUBCASE("missing manifest file") {
        CHECK_THROWS_AS((void)load_manifest(sd.file("nowhere.jsonl")), IoFailure);
    }
    SUBCASE("line that is not JSON") {
        write_lines(path, {R"({"id":"a","events_path":"a.evst","text":"w0","split":"train"})",
                           "not json"});
        try {
            (void)load_manifest(path);
            FAIL("expected MalformedFile");
        } catch (const MalformedFile& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
    SUBCASE("unknown key") {
        write_lines(path, {R"({"id":"a","events_path":"a.evst","text":"w0","split":"train","note":"x"})"});
        CHECK_THROWS_AS((void)load_manifest(path), MalformedFile);
    }
    SUBCASE("missing field") {
        write_lines(path, {R"({"id":"a","events_path":"a.evst","split":"train"})"});
        CHECK_THROWS_AS((void)load_manifest(path), MalformedFile);
    }
    SUBCASE("non-string field") {
        write_lines(path, {R"({"id":7,"events_path":"a.evst","text":"w0","split":"train"})"});
        CHECK_THROWS_AS((void)load_manifest(path), MalformedFile);
    }
    SUBCASE("bad split") {
        write_lines(path, {R"({"id":"a","events_path":"a.evst","text":"w0","split":"dev"})"});
        CHECK_THROWS_AS((void)load_manifest(path), MalformedFile);
    }
    SUBCASE("duplicate id") {
        write_lines(path, {R"({"id":"a","events_path":"a.evst","text":"w0","split":"train"})",
                           R"({"id":"a","events_path":"a.evst","text":"w1","split":"val"})"});
        CHECK_THROWS_AS((void)load_manifest(path), MalformedFile);
    }
    SUBCASE("missing events file") {
        write_lines(path, {R"({"id":"a","events_path":"gone.evst","text":"w0","split":"train"})"});
        CHECK_THROWS_AS((void)load_manifest(path), MalformedFile);
    }
}

TEST_CASE("split_indices filters by split name") {
    Manifest m;
    m.entries = {{"a", "", "", "train"},
                 {"b", "", "", "val"},
                 {"c", "", "", "train"},
                 {"d", "", "", "test"}};
    CHECK(split_indices(m, "train") == std::vector<size_t>{0, 2});
    CHECK(split_indices(m, "val") == std::vector<size_t>{1});
    CHECK(split_indices(m, "test") == std::vector<size_t>{3});
    CHECK(split_indices(m, "dev").empty());
}

TEST_CASE("subsample keeps every k-th frame") {
    const FrameTensor f = counting_tensor(5, 2, 1, 3);

    SUBCASE("k = 1 is the identity") {
        const FrameTensor out = subsample_frames(f, 1);
        CHECK(out.frames == 5);
        CHECK(out.data == f.data);
    }
    SUBCASE("k = 2 keeps frames 0, 2, 4") {
        const FrameTensor out = subsample_frames(f, 2);
        REQUIRE(out.frames == 3);  // ceil(5 / 2)
        CHECK(out.channels == 2);
        CHECK(out.height == 1);
        CHECK(out.width == 3);
        const int64_t per = 2 * 1 * 3;
        for (int64_t t = 0; t < 3; ++t)
            for (int64_t i = 0; i < per; ++i)
                CHECK(out.data[static_cast<size_t>(t * per + i)] ==
                      f.data[static_cast<size_t>(2 * t * per + i)]);
    }
    SUBCASE("k = 3 keeps frames 0, 3") {
        CHECK(subsample_frames(f, 3).frames == 2);
    }
    SUBCASE("k = 0 is rejected") {
        CHECK_THROWS_AS((void)subsample_frames(f, 0), ConfigError);
    }
}

TEST_CASE("load_sample runs the whole pipeline") {
    ScratchDir sd("evslt_load_sample");
    write_events(tiny_stream(), sd.file("a.evst"));
    save_manifest(sd.file("manifest.jsonl"), {{"a", "a.evst", "w0 w1", "train"}});
    const Manifest m = load_manifest(sd.file("manifest.jsonl"));

    Vocabulary vocab;
    vocab.add("w0");
    vocab.add("w1");

    RunConfig rc;
    rc.frames = 4;
    rc.subsample = 2;
    rc.height = 2;
    rc.width = 2;

    const LoadedSample s = load_sample(m, m.entries[0], rc, vocab);
    CHECK(s.id == "a");
    CHECK(s.text == "w0 w1");
    CHECK(s.frames.frames == 2);  // 4 stacked, every 2nd kept
    CHECK(s.frames.channels == 2);
    CHECK(s.frames.height == 2);
    CHECK(s.frames.width == 2);
    float peak = 0;
    for (float v : s.frames.data) {
        CHECK(v >= 0);
        peak = std::max(peak, v);
    }
    CHECK(peak == 1.0f);  // normalized by the max entry
    CHECK(s.sentence.front() == Vocabulary::kBos);
    CHECK(s.sentence.back() == Vocabulary::kEos);
    CHECK(s.sentence == frame_sentence(vocab.encode("w0 w1")));
}

TEST_CASE("make_batch stacks compatible samples") {
    LoadedSample a;
    a.id = "a";
    a.frames = counting_tensor(2, 2, 1, 2);
    a.sentence = {Vocabulary::kBos, 5, Vocabulary::kEos};
    LoadedSample b;
    b.id = "b";
    b.frames = counting_tensor(2, 2, 1, 2);
    for (auto& v : b.frames.data) v += 100;
    b.sentence = {Vocabulary::kBos, 6, 7, Vocabulary::kEos};

    const Batch batch = make_batch({&a, &b});
    CHECK(batch.shape == std::vector<int64_t>{2, 2, 2, 1, 2});
    REQUIRE(batch.values.size() == 16);
    CHECK(batch.values[0] == a.frames.data[0]);
    CHECK(batch.values[8] == b.frames.data[0]);
    REQUIRE(batch.sentences.size() == 2);
    CHECK(batch.sentences[0] == a.sentence);
    CHECK(batch.sentences[1] == b.sentence);

    SUBCASE("shape disagreement is rejected") {
        b.frames = counting_tensor(3, 2, 1, 2);
        CHECK_THROWS_AS((void)make_batch({&a, &b}), ShapeMismatch);
    }
    SUBCASE("empty batches are rejected") {
        CHECK_THROWS_AS((void)make_batch({}), ShapeMismatch);
    }
}

}  // TEST_SUITE
