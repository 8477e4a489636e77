#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "evframes/dataset.hpp"
#include "evframes/error.hpp"
#include "evframes/synth.hpp"
#include "test_support.hpp"

using namespace evframes;
namespace fs = std::filesystem;

namespace {

AnnotationRecord box(double x, double y, double w, double h, std::uint64_t t = 0, int cls = 0) {
    AnnotationRecord b;
    b.t = t;
    b.x = x;
    b.y = y;
    b.w = w;
    b.h = h;
    b.class_id = cls;
    return b;
}

FrameRecord record(const std::string& seq, std::uint64_t window, std::size_t boxes) {
    FrameRecord r;
    r.sequence = seq;
    r.window = window;
    r.image = "images/" + seq + "/" + std::to_string(window) + "_fusion.ppm";
    r.label = "labels/" + seq + "/" + std::to_string(window) + ".txt";
    for (std::size_t i = 0; i < boxes; ++i) {
        r.boxes.push_back(box(static_cast<double>(i), 0, 4, 4));
        r.verdicts.push_back(Verdict::unverified);
    }
    return r;
}

// Writes a moving-bar sequence (events + ground-truth annotations) and returns its config entry.
SequenceInput write_bar_sequence(const fs::path& dir, const std::string& id, const MovingBarScenario& sc,
                                 std::uint64_t tau = 10000, int cls = 0) {
    const auto seq = generate_moving_bar(sc, tau, cls);
    SequenceInput in{id, dir / (id + ".evt1"), dir / (id + ".csv")};
    save_events(seq.stream, in.events);
    std::vector<AnnotationRecord> boxes;
    for (const auto& t : seq.truth) boxes.push_back(t.box);
    std::ofstream out(in.annotations);
    write_annotations_csv(boxes, out);
    return in;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
    if (!fs::exists(dir)) return 0;
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        n += e.is_regular_file() && e.path().extension() == ext;
    }
    return n;
}

}  // namespace

TEST_CASE("filter_sequences_by_class") {
    std::vector<SequenceAnnotations> seqs{{"a", {box(0, 0, 4, 4, 0, 1)}}, {"b", {box(0, 0, 4, 4, 0, 5)}}, {"c", {}}};
    auto r = filter_sequences_by_class(seqs, 5);
    REQUIRE(r.kept.size() == 1);
    CHECK(r.kept[0].id == "b");
    CHECK_FALSE(r.warning.has_value());

    auto none = filter_sequences_by_class(seqs, 9);
    CHECK(none.kept.empty());
    CHECK(none.warning.has_value());

    std::vector<SequenceAnnotations> all{{"x", {box(0, 0, 4, 4, 0, 2)}}, {"y", {box(0, 0, 4, 4, 0, 2)}}};
    auto same = filter_sequences_by_class(all, 2);
    REQUIRE(same.kept.size() == 2);
    CHECK(same.kept[0].id == "x");
    CHECK(same.kept[1].id == "y");
}

TEST_CASE("crop extraction resamples by nearest neighbour") {
    Image src(200, 150, 3);
    for (std::uint32_t y = 0; y < src.height; ++y)
        for (std::uint32_t x = 0; x < src.width; ++x)
            for (std::uint32_t c = 0; c < 3; ++c) src.at(x, y, c) = static_cast<std::uint8_t>((x * 7 + y * 13 + c * 5) % 256);

    const auto crops = extract_crops(src, std::vector{box(10, 20, 64, 64), box(30, 5, 128, 128), box(50, 60, 1, 1)}, 64,
                                     "seq", 4);
    REQUIRE(crops.size() == 3);
    CHECK(crops[1].box_index == 1);
    CHECK(crops[1].sequence == "seq");
    CHECK(crops[1].window == 4);
    bool identity = true;
    bool doubled = true;
    bool constant = true;
    for (std::uint32_t j = 0; j < 64; ++j) {
        for (std::uint32_t i = 0; i < 64; ++i) {
            for (std::uint32_t c = 0; c < 3; ++c) {
                identity = identity && crops[0].image.at(i, j, c) == src.at(10 + i, 20 + j, c);
                doubled = doubled && crops[1].image.at(i, j, c) == src.at(30 + 2 * i, 5 + 2 * j, c);
                constant = constant && crops[2].image.at(i, j, c) == src.at(50, 60, c);
            }
        }
    }
    CHECK(identity);
    CHECK(doubled);
    CHECK(constant);
    CHECK_THROWS_AS(extract_crops(src, std::vector{box(500, 500, 10, 10)}), Error);
}

TEST_CASE("crop resampling matches a brute-force resampler for odd sizes") {
    Image src(50, 40, 1);
    for (std::size_t i = 0; i < src.data.size(); ++i) src.data[i] = static_cast<std::uint8_t>(i * 31 % 251);
    const PixelRect rect{3, 7, 40, 30};
    const auto crop = resample_region(src, rect, 64);
    for (std::uint32_t j = 0; j < 64; ++j) {
        for (std::uint32_t i = 0; i < 64; ++i) {
            // Pixel whose centre-left edge covers output sample i: floor(i * w / side).
            const double fx = std::floor(i * 37.0 / 64.0);
            const double fy = std::floor(j * 23.0 / 64.0);
            CHECK(crop.at(i, j) == src.at(3 + static_cast<std::uint32_t>(fx), 7 + static_cast<std::uint32_t>(fy)));
        }
    }
}

TEST_CASE("density verdict") {
    const SensorGeometry g{100, 100};
    // Empty region.
    std::vector<Event> ev;
    for (std::uint16_t i = 0; i < 50; ++i) ev.push_back({i, static_cast<std::uint16_t>(80 + i % 10), static_cast<std::uint16_t>(80 + i / 10), 1});
    auto m = accumulate(ev, g, {10000, 0}, 0);
    const auto empty = density_verdict(m, box(0, 0, 20, 20));
    CHECK(empty.verdict == Verdict::rejected);
    CHECK(empty.score == 0.0);

    // All events inside a box covering 10% of the frame.
    std::vector<Event> inside;
    for (std::uint16_t y = 0; y < 100; ++y)
        for (std::uint16_t x = 0; x < 10; ++x) inside.push_back({static_cast<std::uint64_t>(y), x, y, 1});
    m = accumulate(inside, g, {10000, 0}, 0);
    const auto dense = density_verdict(m, box(0, 0, 10, 100));
    CHECK(dense.score == doctest::Approx(10.0).epsilon(1e-6));
    CHECK(dense.inside_events == 1000);
    CHECK(dense.verdict == Verdict::accepted);

    // Uniform field.
    std::vector<Event> uniform;
    for (std::uint16_t y = 0; y < 100; ++y)
        for (std::uint16_t x = 0; x < 100; ++x) uniform.push_back({0, x, y, -1});
    m = accumulate(uniform, g, {10000, 0}, 0);
    const auto flat = density_verdict(m, box(20, 20, 30, 30));
    CHECK(flat.score == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(flat.verdict == Verdict::rejected);

    // Dense but too few events.
    m = accumulate(std::vector<Event>{{0, 1, 1, 1}, {1, 1, 1, 1}}, g, {10000, 0}, 0);
    const auto sparse = density_verdict(m, box(0, 0, 2, 2));
    CHECK(sparse.score > 1.5);
    CHECK(sparse.verdict == Verdict::rejected);
    CHECK(density_verdict(m, box(0, 0, 2, 2), {1.5, 2}).verdict == Verdict::accepted);
}

TEST_CASE("apply_verdicts") {
    DatasetManifest base;
    base.records = {record("s1", 0, 2), record("s1", 1, 1), record("s2", 0, 1)};

    const std::vector<VerdictRow> all_yes{{"s1", 0, 0, true}, {"s1", 0, 1, true}, {"s1", 1, 0, true}, {"s2", 0, 0, true}};
    auto m = apply_verdicts(base, all_yes);
    REQUIRE(m.records.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(m.records[i].boxes == base.records[i].boxes);
        for (auto v : m.records[i].verdicts) CHECK(v == Verdict::accepted);
    }

    const std::vector<VerdictRow> all_no{{"s1", 0, 0, false}, {"s1", 0, 1, false}, {"s1", 1, 0, false}, {"s2", 0, 0, false}};
    CHECK(apply_verdicts(base, all_no).records.empty());

    const std::vector<VerdictRow> mixed{{"s1", 0, 0, false}, {"s1", 0, 1, true}, {"s1", 1, 0, false}};
    m = apply_verdicts(base, mixed);
    REQUIRE(m.records.size() == 1);
    CHECK(m.records[0].window == 0);
    CHECK(m.records[0].verdicts == std::vector{Verdict::rejected, Verdict::accepted});

    try {
        apply_verdicts(base, std::vector<VerdictRow>{{"s3", 0, 0, true}});
        FAIL("expected UnknownReference");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::unknown_reference);
    }
    CHECK_THROWS_AS(apply_verdicts(base, std::vector<VerdictRow>{{"s1", 0, 2, true}}), Error);
}

TEST_CASE("verdict CSV parsing") {
    const auto rows = read_verdicts_csv("sequence,window,box_index,verdict\nseq_a,12,0,1\nseq_a,12,1,0\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].sequence == "seq_a");
    CHECK(rows[0].window == 12);
    CHECK(rows[0].accepted);
    CHECK_FALSE(rows[1].accepted);
    CHECK_THROWS_AS(read_verdicts_csv("sequence,window,box_index,verdict\na,1,0,2\n"), Error);
    CHECK_THROWS_AS(read_verdicts_csv("seq,window\n"), Error);
}

TEST_CASE("split_dataset partitions by sequence") {
    DatasetManifest four;
    for (const char* s : {"a", "b", "c", "d"})
        for (std::uint64_t w = 0; w < 5; ++w) four.records.push_back(record(s, w, 1));
    const auto m = split_dataset(four, 0.25, 42);
    std::set<std::string> test;
    std::set<std::string> train;
    for (const auto& r : m.records) (r.split == Split::test ? test : train).insert(r.sequence);
    CHECK(test.size() == 1);
    CHECK(train.size() == 3);
    for (const auto& t : test) CHECK_FALSE(train.contains(t));

    const auto again = split_dataset(four, 0.25, 42);
    for (std::size_t i = 0; i < m.records.size(); ++i) CHECK(again.records[i].split == m.records[i].split);

    DatasetManifest hundred;
    for (int s = 0; s < 100; ++s) hundred.records.push_back(record("s" + std::to_string(s), 0, 1));
    std::set<std::string> first_tests;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto h = split_dataset(hundred, 0.25, seed);
        std::size_t n_test = 0;
        for (const auto& r : h.records) n_test += r.split == Split::test;
        const double frac = static_cast<double>(n_test) / 100.0;
        CHECK(frac >= 0.20);
        CHECK(frac <= 0.30);
        std::string key;
        for (const auto& r : h.records) key += r.split == Split::test ? '1' : '0';
        first_tests.insert(key);
    }
    CHECK(first_tests.size() > 1);  // different seeds give different splits
    CHECK_THROWS_AS(split_dataset(four, 0.0, 1), Error);
    CHECK_THROWS_AS(split_dataset(four, 1.0, 1), Error);
}

TEST_CASE("manifest JSON Lines round-trip") {
    DatasetManifest m;
    m.geometry = {1280, 720};
    m.window = {10000, 0};
    m.params = {{"seed", "3"}};
    m.records = {record("s1", 2, 2), record("s2", 5, 1)};
    m.records[0].verdicts = {Verdict::accepted, Verdict::rejected};
    m.records[0].scores = {3.5, 0.25};
    m.records[0].split = Split::train;
    m.records[1].verdicts = {Verdict::accepted};
    m.records[1].kind = RepKind::decay;
    m.records[1].split = Split::test;
    const auto text = manifest_to_jsonl(m);
    const auto back = manifest_from_jsonl(text);
    CHECK(manifest_to_jsonl(back) == text);
    CHECK(back.records[1].kind == RepKind::decay);
    CHECK(back.records[0].scores == std::vector{3.5, 0.25});
    CHECK(text.find("\"boxes_accepted\":2") != std::string::npos);
    CHECK_THROWS_AS(manifest_from_jsonl("{\"record\":\"frame\"}\n"), Error);
}

TEST_CASE("dataset config parsing") {
    const auto cfg = parse_dataset_config(
        "# comment\n"
        "sequence = seq_a, a.evt1, a.csv\n"
        "sequence = seq_b, /abs/b.evt1, b.csv\n"
        "out = build/ds\n"
        "tau_us = 5000\n"
        "reps = frame, fusion\n"
        "fusion_order = decay,freq,frame\n"
        "freq_mode = count\n"
        "class_id = 5\n"
        "density_threshold = 2.5\n"
        "density_min_events = 10\n"
        "test_fraction = 0.3\n"
        "seed = 17\n"
        "width = 64\nheight = 48\n"
        "jobs = 2\n",
        "/base");
    REQUIRE(cfg.sequences.size() == 2);
    CHECK(cfg.sequences[0].events == fs::path("/base/a.evt1"));
    CHECK(cfg.sequences[1].events == fs::path("/abs/b.evt1"));
    CHECK(cfg.out_dir == fs::path("/base/build/ds"));
    CHECK(cfg.window.tau == 5000);
    CHECK(cfg.reps == std::vector{RepKind::event_frame, RepKind::fusion});
    CHECK(cfg.render.order == FusionOrder{RepKind::decay, RepKind::frequency, RepKind::event_frame});
    CHECK(cfg.render.frequency_mode == FrequencyMode::event_count);
    CHECK(cfg.class_id == 5);
    CHECK(cfg.density.threshold == 2.5);
    CHECK(cfg.density.min_events == 10);
    CHECK(cfg.test_fraction == 0.3);
    CHECK(cfg.seed == 17);
    CHECK(cfg.geometry == SensorGeometry{64, 48});
    CHECK(cfg.jobs == 2);

    CHECK_THROWS_AS(parse_dataset_config("bogus = 1\n", "/"), Error);
    CHECK_THROWS_AS(parse_dataset_config("sequence = ../x, a, b\n", "/"), Error);
    CHECK_THROWS_AS(parse_dataset_config("tau_us = ten\n", "/"), Error);
    CHECK_THROWS_AS(parse_dataset_config("width = 3\n", "/"), Error);
}

TEST_CASE("build_dataset: 30 ms of a visible box gives three frames") {
    testing::TempDir dir;
    MovingBarScenario sc;
    sc.duration_us = 30000;
    DatasetConfig cfg;
    cfg.sequences = {write_bar_sequence(dir.path(), "seq0", sc)};
    cfg.out_dir = dir / "out";
    const auto summary = build_dataset(cfg);
    CHECK(summary.manifest.records.size() == 3);
    CHECK(summary.images_written == 3);
    CHECK(summary.labels_written == 3);
    CHECK(count_files(dir / "out" / "images", ".ppm") == 3);
    CHECK(count_files(dir / "out" / "labels", ".txt") == 3);
    CHECK(fs::exists(dir / "out" / "images" / "seq0" / "0_fusion.ppm"));
    CHECK(fs::exists(dir / "out" / "labels" / "seq0" / "2.txt"));
    for (const auto& r : summary.manifest.records) CHECK(r.accepted_count() == 1);
    const auto fused = import_image(dir / "out" / "images" / "seq0" / "1_fusion.ppm");
    CHECK(fused.channels == 3);
    CHECK(fused.width == 64);

    // Manifest on disk matches the returned one.
    CHECK(testing::read_file(dir / "out" / "manifest.jsonl") == manifest_to_jsonl(summary.manifest));
}

TEST_CASE("build_dataset: two representations share label files") {
    testing::TempDir dir;
    MovingBarScenario sc;
    sc.duration_us = 30000;
    DatasetConfig cfg;
    cfg.sequences = {write_bar_sequence(dir.path(), "seq0", sc)};
    cfg.out_dir = dir / "out";
    cfg.reps = {RepKind::fusion, RepKind::decay};
    const auto summary = build_dataset(cfg);
    CHECK(summary.images_written == 6);
    CHECK(summary.labels_written == 3);
    CHECK(count_files(dir / "out" / "images", ".ppm") == 3);
    CHECK(count_files(dir / "out" / "images", ".pgm") == 3);
    CHECK(count_files(dir / "out" / "labels", ".txt") == 3);
}

TEST_CASE("build_dataset: nothing accepted gives an empty dataset") {
    testing::TempDir dir;
    MovingBarScenario sc;
    sc.duration_us = 30000;
    DatasetConfig cfg;
    cfg.sequences = {write_bar_sequence(dir.path(), "seq0", sc)};
    cfg.out_dir = dir / "out";
    cfg.density.threshold = 1e9;
    const auto summary = build_dataset(cfg);
    CHECK(summary.manifest.records.empty());
    CHECK(summary.candidate_windows == 3);
    CHECK_FALSE(fs::exists(dir / "out" / "images"));
    CHECK_FALSE(fs::exists(dir / "out" / "labels"));
    const auto m = manifest_from_jsonl(testing::read_file(dir / "out" / "manifest.jsonl"));
    CHECK(m.records.empty());
}

TEST_CASE("build_dataset: class filter drops sequences without the class") {
    testing::TempDir dir;
    MovingBarScenario sc;
    sc.duration_us = 20000;
    DatasetConfig cfg;
    cfg.sequences = {write_bar_sequence(dir.path(), "cars", sc, 10000, 2),
                     write_bar_sequence(dir.path(), "signs", sc, 10000, 5)};
    cfg.out_dir = dir / "out";
    cfg.class_id = 5;
    const auto summary = build_dataset(cfg);
    CHECK(summary.sequences_kept == 1);
    for (const auto& r : summary.manifest.records) CHECK(r.sequence == "signs");
    CHECK(summary.manifest.records.size() == 2);

    cfg.class_id = 9;
    cfg.out_dir = dir / "out2";
    const auto none = build_dataset(cfg);
    CHECK(none.manifest.records.empty());
    CHECK_FALSE(none.warnings.empty());
}

TEST_CASE("build_dataset: external verdicts and candidate crops") {
    testing::TempDir dir;
    MovingBarScenario sc;
    sc.duration_us = 30000;
    DatasetConfig cfg;
    cfg.sequences = {write_bar_sequence(dir.path(), "seq0", sc)};
    cfg.out_dir = dir / "out";
    cfg.emit_crops = true;
    testing::write_file(dir / "verdicts.csv", "sequence,window,box_index,verdict\nseq0,0,0,1\nseq0,1,0,0\n");
    cfg.verdicts = dir / "verdicts.csv";
    const auto summary = build_dataset(cfg);
    REQUIRE(summary.manifest.records.size() == 1);
    CHECK(summary.manifest.records[0].window == 0);
    CHECK(summary.manifest.records[0].scores.empty());
    CHECK(count_files(dir / "out" / "crops", ".ppm") == 3);
    const auto crop = import_image(dir / "out" / "crops" / "seq0" / "1_0.ppm");
    CHECK(crop.width == 64);
    CHECK(crop.height == 64);
    const auto candidates = manifest_from_jsonl(testing::read_file(dir / "out" / "candidates.jsonl"));
    CHECK(candidates.records.size() == 3);

    testing::write_file(dir / "bad.csv", "sequence,window,box_index,verdict\nseq0,7,0,1\n");
    cfg.verdicts = dir / "bad.csv";
    cfg.out_dir = dir / "out_bad";
    try {
        build_dataset(cfg);
        FAIL("expected UnknownReference");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::unknown_reference);
    }
}

TEST_CASE("build_dataset: external reconstructions are copied alongside") {
    testing::TempDir dir;
    MovingBarScenario sc;
    sc.duration_us = 20000;
    DatasetConfig cfg;
    cfg.sequences = {write_bar_sequence(dir.path(), "seq0", sc)};
    cfg.out_dir = dir / "out";
    fs::create_directories(dir / "recon" / "seq0");
    export_image(Image(64, 64, 1, 42), dir / "recon" / "seq0" / "1.pgm");
    cfg.reconstruction_dir = dir / "recon";
    const auto summary = build_dataset(cfg);
    std::size_t recon = 0;
    for (const auto& r : summary.manifest.records) {
        if (r.kind == RepKind::reconstruction) {
            ++recon;
            CHECK(r.window == 1);
            CHECK(import_image(dir / "out" / r.image) == Image(64, 64, 1, 42));
        }
    }
    CHECK(recon == 1);
}

TEST_CASE("build_dataset is deterministic and jobs do not change the output") {
    testing::TempDir dir;
    DatasetConfig cfg;
    for (int i = 0; i < 8; ++i) {
        MovingBarScenario sc;
        sc.duration_us = 20000;
        sc.velocity = 800.0 + 100.0 * i;
        sc.noise_rate = 5.0;
        sc.seed = static_cast<std::uint64_t>(i);
        cfg.sequences.push_back(write_bar_sequence(dir.path(), "s" + std::to_string(i), sc));
    }
    cfg.seed = 9;
    cfg.out_dir = dir / "a";
    build_dataset(cfg);
    cfg.out_dir = dir / "b";
    cfg.jobs = 4;
    build_dataset(cfg);
    const auto a = testing::read_file(dir / "a" / "manifest.jsonl");
    CHECK(a == testing::read_file(dir / "b" / "manifest.jsonl"));
    CHECK(testing::read_file(dir / "a" / "labels" / "s3" / "1.txt") == testing::read_file(dir / "b" / "labels" / "s3" / "1.txt"));

    const auto m = manifest_from_jsonl(a);
    std::map<std::string, Split> per_seq;
    for (const auto& r : m.records) {
        auto [it, inserted] = per_seq.emplace(r.sequence, r.split);
        CHECK(it->second == r.split);
        CHECK(r.accepted_count() >= 1);
    }
}
