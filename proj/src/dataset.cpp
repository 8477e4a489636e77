#include "evframes/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <iterator>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "evframes/error.hpp"

namespace evframes {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::unverified: return "unverified";
        case Verdict::accepted: return "accepted";
        case Verdict::rejected: return "rejected";
    }
    return "unverified";
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::unassigned: return "unassigned";
        case Split::train: return "train";
        case Split::test: return "test";
    }
    return "unassigned";
}

namespace {

Verdict parse_verdict(std::string_view s) {
    for (auto v : {Verdict::unverified, Verdict::accepted, Verdict::rejected}) {
        if (s == to_string(v)) return v;
    }
    throw Error(ErrorKind::parse_error, "unknown verdict '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
    for (auto v : {Split::unassigned, Split::train, Split::test}) {
        if (s == to_string(v)) return v;
    }
    throw Error(ErrorKind::parse_error, "unknown split '" + std::string(s) + "'");
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_list(std::string_view text, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = text.find(sep, start);
        out.emplace_back(trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T parse_value(std::string_view key, std::string_view text) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        throw Error(ErrorKind::invalid_config, "bad value for " + std::string(key) + ": '" + std::string(text) + "'");
    }
    return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "1" || text == "true" || text == "yes") return true;
    if (text == "0" || text == "false" || text == "no") return false;
    throw Error(ErrorKind::invalid_config, "bad boolean for " + std::string(key) + ": '" + std::string(text) + "'");
}

void require_safe_id(const std::string& id) {
    const bool ok = !id.empty() && id != "." && id != ".." &&
                    std::all_of(id.begin(), id.end(), [](char c) {
                        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
                    });
    if (!ok) {
        throw Error(ErrorKind::invalid_config, "sequence id '" + id + "' must be [A-Za-z0-9_.-]+");
    }
}

json box_to_json(const AnnotationRecord& b) {
    return json{{"t_us", b.t},         {"x", b.x},
                {"y", b.y},            {"w", b.w},
                {"h", b.h},            {"class_id", b.class_id},
                {"track_id", b.track_id}, {"confidence", b.confidence}};
}

AnnotationRecord box_from_json(const json& j) {
    AnnotationRecord b;
    b.t = j.at("t_us").get<std::uint64_t>();
    b.x = j.at("x").get<double>();
    b.y = j.at("y").get<double>();
    b.w = j.at("w").get<double>();
    b.h = j.at("h").get<double>();
    b.class_id = j.at("class_id").get<int>();
    b.track_id = j.at("track_id").get<std::int64_t>();
    b.confidence = j.at("confidence").get<double>();
    return b;
}

// Fisher-Yates over mt19937_64 with rejection sampling; identical on every standard library.
template <class T>
void portable_shuffle(std::vector<T>& items, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::uint64_t bound = i;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t r = rng();
        while (r >= limit) r = rng();
        std::swap(items[i - 1], items[static_cast<std::size_t>(r % bound)]);
    }
}

template <class T, class F>
std::vector<T> parallel_map(std::size_t n, unsigned jobs, F&& f) {
    std::vector<T> out;
    out.reserve(n);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) out.push_back(f(i));
        return out;
    }
    for (std::size_t base = 0; base < n; base += jobs) {
        std::vector<std::future<T>> wave;
        for (std::size_t i = base; i < std::min(n, base + jobs); ++i) {
            wave.push_back(std::async(std::launch::async, [&f, i] { return f(i); }));
        }
        for (auto& w : wave) out.push_back(w.get());
    }
    return out;
}

std::string image_extension(RepKind kind) { return kind == RepKind::fusion ? ".ppm" : ".pgm"; }

std::string image_rel_path(const std::string& seq, std::uint64_t window, RepKind kind, const std::string& ext) {
    return "images/" + seq + "/" + std::to_string(window) + "_" + std::string(to_string(kind)) + ext;
}

std::string label_rel_path(const std::string& seq, std::uint64_t window) {
    return "labels/" + seq + "/" + std::to_string(window) + ".txt";
}

std::optional<fs::path> find_reconstruction(const fs::path& dir, const std::string& seq, std::uint64_t window) {
    for (const char* ext : {".pgm", ".ppm", ".png", ".jpg"}) {
        auto p = dir / seq / (std::to_string(window) + ext);
        if (fs::exists(p)) return p;
    }
    return std::nullopt;
}

// Reads a sequence's events and feeds them, in order, to a streamer built once the geometry is known.
template <class OnGeometry>
void stream_sequence(const fs::path& events, const DatasetConfig& cfg, OnGeometry&& on_geometry) {
    if (detect_event_format(events) == EventFileFormat::evt1) {
        std::ifstream in(events, std::ios::binary);
        Evt1Reader reader(in);
        WindowStreamer& streamer = on_geometry(reader.geometry());
        std::vector<Event> buf(Evt1Reader::buffer_records);
        while (const auto n = reader.read(buf)) {
            streamer.push(std::span<const Event>(buf.data(), n));
        }
        streamer.finish();
        return;
    }
    CsvReadOptions opts{cfg.geometry, cfg.zero_is_negative};
    auto s = normalize_stream(load_events(events, opts)).stream;
    WindowStreamer& streamer = on_geometry(s.geometry);
    streamer.push(s.events);
    streamer.finish();
}

struct WindowCandidate {
    std::uint64_t window = 0;
    std::vector<AnnotationRecord> boxes;
    std::vector<Verdict> verdicts;
    std::vector<double> scores;
    std::optional<fs::path> reconstruction;
};

struct SequenceCandidates {
    SensorGeometry geometry;
    std::vector<WindowCandidate> windows;
    std::size_t dropped_boxes = 0;
};

SequenceCandidates collect_candidates(const SequenceInput& in, const std::vector<AnnotationRecord>& boxes,
                                      const DatasetConfig& cfg) {
    SequenceCandidates out;
    std::map<std::uint64_t, std::vector<AnnotationRecord>> by_window;
    std::set<std::uint64_t> visited;
    std::optional<WindowStreamer> streamer;

    auto evaluate = [&](const PixelStateMap& m) {
        auto it = by_window.find(m.ordinal());
        if (it == by_window.end()) return;
        visited.insert(m.ordinal());
        WindowCandidate c;
        c.window = m.ordinal();
        c.boxes = it->second;
        for (const auto& b : c.boxes) {
            if (cfg.verdicts) {
                c.verdicts.push_back(Verdict::unverified);
            } else {
                const auto r = density_verdict(m, b, cfg.density);
                c.verdicts.push_back(r.verdict);
                c.scores.push_back(r.score);
            }
        }
        if (cfg.reconstruction_dir) {
            c.reconstruction = find_reconstruction(*cfg.reconstruction_dir, in.id, c.window);
        }
        if (cfg.emit_crops) {
            const auto dir = cfg.out_dir / "crops" / in.id;
            fs::create_directories(dir);
            const auto fused = fuse(m, cfg.render).interleaved();
            for (const auto& crop : extract_crops(fused, c.boxes, cfg.crop_side, in.id, c.window)) {
                export_image(crop.image, dir / (std::to_string(c.window) + "_" + std::to_string(crop.box_index) + ".ppm"));
            }
        }
        out.windows.push_back(std::move(c));
    };

    stream_sequence(in.events, cfg, [&](SensorGeometry g) -> WindowStreamer& {
        out.geometry = g;
        for (const auto& b : boxes) {
            try {
                clip_box(b, g);
            } catch (const Error&) {
                ++out.dropped_boxes;
                continue;
            }
            by_window[window_index(b.t, cfg.window)].push_back(b);
        }
        streamer.emplace(g, cfg.window, evaluate);
        return *streamer;
    });

    // Annotated windows outside the span of the event stream are evaluated as empty windows.
    for (const auto& [window, _] : by_window) {
        if (!visited.contains(window)) {
            const auto start = cfg.window.origin + window * cfg.window.tau;
            evaluate(PixelStateMap(out.geometry, start, start + cfg.window.tau, window));
        }
    }
    std::sort(out.windows.begin(), out.windows.end(),
              [](const WindowCandidate& a, const WindowCandidate& b) { return a.window < b.window; });
    return out;
}

// Writes images and labels for the frames of one sequence that survived verification.
std::pair<std::size_t, std::size_t> render_sequence(const SequenceInput& in, const std::vector<const FrameRecord*>& frames,
                                                    const DatasetConfig& cfg) {
    // window -> records of that window (one per representation)
    std::map<std::uint64_t, std::vector<const FrameRecord*>> by_window;
    for (const auto* r : frames) by_window[r->window].push_back(r);
    std::set<std::uint64_t> visited;
    std::size_t images = 0;
    std::size_t labels = 0;
    SensorGeometry geometry;
    std::optional<WindowStreamer> streamer;

    auto write = [&](const PixelStateMap& m) {
        auto it = by_window.find(m.ordinal());
        if (it == by_window.end()) return;
        visited.insert(m.ordinal());
        const auto& records = it->second;
        for (const auto* r : records) {
            const auto path = cfg.out_dir / r->image;
            fs::create_directories(path.parent_path());
            if (r->kind == RepKind::reconstruction) {
                const auto src = find_reconstruction(*cfg.reconstruction_dir, in.id, r->window);
                if (!src) {
                    throw Error(ErrorKind::io_error, "reconstruction for " + in.id + " window " +
                                                         std::to_string(r->window) + " disappeared");
                }
                fs::copy_file(*src, path, fs::copy_options::overwrite_existing);
            } else {
                export_image(render(m, r->kind, cfg.render), path);
            }
            ++images;
        }
        std::vector<AnnotationRecord> accepted;
        const auto* first = records.front();
        for (std::size_t i = 0; i < first->boxes.size(); ++i) {
            if (first->verdicts[i] == Verdict::accepted) accepted.push_back(first->boxes[i]);
        }
        const auto label = cfg.out_dir / first->label;
        fs::create_directories(label.parent_path());
        std::ofstream(label, std::ios::binary) << write_yolo_labels(accepted, m.geometry());
        ++labels;
    };

    stream_sequence(in.events, cfg, [&](SensorGeometry g) -> WindowStreamer& {
        geometry = g;
        streamer.emplace(g, cfg.window, write);
        return *streamer;
    });
    for (const auto& [window, _] : by_window) {
        if (!visited.contains(window)) {
            const auto start = cfg.window.origin + window * cfg.window.tau;
            write(PixelStateMap(geometry, start, start + cfg.window.tau, window));
        }
    }
    return {images, labels};
}

std::map<std::string, std::string> creation_params(const DatasetConfig& cfg) {
    std::map<std::string, std::string> p;
    p["tau_us"] = std::to_string(cfg.window.tau);
    p["origin_us"] = std::to_string(cfg.window.origin);
    std::string reps;
    for (auto r : cfg.reps) reps += (reps.empty() ? "" : ",") + std::string(to_string(r));
    p["reps"] = reps;
    p["fusion_order"] = std::string(to_string(cfg.render.order[0])) + "," + std::string(to_string(cfg.render.order[1])) +
                        "," + std::string(to_string(cfg.render.order[2]));
    p["freq_mode"] = cfg.render.frequency_mode == FrequencyMode::signed_sum ? "signed" : "count";
    p["class_id"] = std::to_string(cfg.class_id);
    p["verifier"] = cfg.verdicts ? "file:" + cfg.verdicts->filename().string() : "density";
    std::ostringstream threshold;
    threshold << cfg.density.threshold;
    p["density_threshold"] = threshold.str();
    p["density_min_events"] = std::to_string(cfg.density.min_events);
    std::ostringstream fraction;
    fraction << cfg.test_fraction;
    p["test_fraction"] = fraction.str();
    p["seed"] = std::to_string(cfg.seed);
    std::string ids;
    for (const auto& s : cfg.sequences) ids += (ids.empty() ? "" : ",") + s.id;
    p["sequences"] = ids;
    return p;
}

}  // namespace

std::size_t FrameRecord::accepted_count() const {
    return static_cast<std::size_t>(std::count(verdicts.begin(), verdicts.end(), Verdict::accepted));
}

// --- manifest ---------------------------------------------------------------------

std::string manifest_to_jsonl(const DatasetManifest& m) {
    std::set<std::string> train;
    std::set<std::string> test;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t unverified = 0;
    std::set<std::pair<std::string, std::uint64_t>> windows;
    for (const auto& r : m.records) {
        (r.split == Split::test ? test : train).insert(r.sequence);
        // Box verdicts are shared by all representations of a window; count them once.
        if (!windows.insert({r.sequence, r.window}).second) continue;
        for (auto v : r.verdicts) {
            accepted += v == Verdict::accepted;
            rejected += v == Verdict::rejected;
            unverified += v == Verdict::unverified;
        }
    }
    json header{{"record", "header"},
                {"geometry", {{"width", m.geometry.width}, {"height", m.geometry.height}}},
                {"tau_us", m.window.tau},
                {"origin_us", m.window.origin},
                {"params", m.params},
                {"counts",
                 {{"images", m.records.size()},
                  {"windows", windows.size()},
                  {"boxes_accepted", accepted},
                  {"boxes_rejected", rejected},
                  {"boxes_unverified", unverified},
                  {"sequences_train", train.size()},
                  {"sequences_test", test.size()}}}};
    std::string out = header.dump() + "\n";
    for (const auto& r : m.records) {
        json boxes = json::array();
        for (std::size_t i = 0; i < r.boxes.size(); ++i) {
            auto b = box_to_json(r.boxes[i]);
            b["verdict"] = to_string(r.verdicts[i]);
            if (i < r.scores.size()) b["score"] = r.scores[i];
            boxes.push_back(std::move(b));
        }
        json rec{{"record", "frame"},         {"sequence", r.sequence}, {"window", r.window},
                 {"kind", to_string(r.kind)}, {"image", r.image},       {"label", r.label},
                 {"split", to_string(r.split)}, {"boxes", std::move(boxes)}};
        out += rec.dump() + "\n";
    }
    return out;
}

DatasetManifest manifest_from_jsonl(std::string_view text) {
    DatasetManifest m;
    std::istringstream in{std::string(text)};
    std::string line;
    bool header = false;
    try {
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            const auto j = json::parse(line);
            const auto kind = j.at("record").get<std::string>();
            if (kind == "header") {
                m.geometry = {j.at("geometry").at("width").get<std::uint32_t>(),
                              j.at("geometry").at("height").get<std::uint32_t>()};
                m.window = {j.at("tau_us").get<std::uint64_t>(), j.at("origin_us").get<std::uint64_t>()};
                m.params = j.at("params").get<std::map<std::string, std::string>>();
                header = true;
                continue;
            }
            FrameRecord r;
            r.sequence = j.at("sequence").get<std::string>();
            r.window = j.at("window").get<std::uint64_t>();
            r.kind = parse_rep_kind(j.at("kind").get<std::string>());
            r.image = j.at("image").get<std::string>();
            r.label = j.at("label").get<std::string>();
            r.split = parse_split(j.at("split").get<std::string>());
            for (const auto& b : j.at("boxes")) {
                r.boxes.push_back(box_from_json(b));
                r.verdicts.push_back(parse_verdict(b.at("verdict").get<std::string>()));
                if (b.contains("score")) r.scores.push_back(b.at("score").get<double>());
            }
            m.records.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse_error, std::string("manifest: ") + e.what());
    }
    if (!header) {
        throw Error(ErrorKind::parse_error, "manifest has no header record");
    }
    return m;
}

// --- filtering ----------------------------------------------------------------------

FilterResult filter_sequences_by_class(std::span<const SequenceAnnotations> sequences, int class_id) {
    FilterResult r;
    for (const auto& s : sequences) {
        if (std::any_of(s.boxes.begin(), s.boxes.end(), [&](const AnnotationRecord& b) { return b.class_id == class_id; })) {
            r.kept.push_back(s);
        }
    }
    if (r.kept.empty()) {
        r.warning = "no sequence contains a box of class " + std::to_string(class_id);
    }
    return r;
}

// --- verification ---------------------------------------------------------------------

Image resample_region(const Image& src, const PixelRect& rect, std::uint32_t side) {
    if (rect.width() == 0 || rect.height() == 0 || rect.x1 > src.width || rect.y1 > src.height) {
        throw Error(ErrorKind::degenerate_box, "crop region is empty or off the image");
    }
    Image out(side, side, src.channels);
    for (std::uint32_t j = 0; j < side; ++j) {
        const auto sy = rect.y0 + static_cast<std::uint32_t>(std::uint64_t{j} * rect.height() / side);
        for (std::uint32_t i = 0; i < side; ++i) {
            const auto sx = rect.x0 + static_cast<std::uint32_t>(std::uint64_t{i} * rect.width() / side);
            for (std::uint32_t c = 0; c < src.channels; ++c) {
                out.at(i, j, c) = src.at(sx, sy, c);
            }
        }
    }
    return out;
}

std::vector<Crop> extract_crops(const Image& img, std::span<const AnnotationRecord> boxes, std::uint32_t side,
                                std::string_view sequence, std::uint64_t window) {
    std::vector<Crop> crops;
    const SensorGeometry g{img.width, img.height};
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        crops.push_back({std::string(sequence), window, i, resample_region(img, pixel_rect(boxes[i], g), side)});
    }
    return crops;
}

DensityResult density_verdict(const PixelStateMap& m, const AnnotationRecord& box, const DensityParams& params) {
    const auto g = m.geometry();
    const auto rect = pixel_rect(box, g);
    std::uint64_t inside = 0;
    for (auto y = rect.y0; y < rect.y1; ++y) {
        for (auto x = rect.x0; x < rect.x1; ++x) {
            inside += m.at(x, y).count;
        }
    }
    const double inside_density = static_cast<double>(inside) / static_cast<double>(rect.area());
    const double frame_density = static_cast<double>(m.total_events()) / static_cast<double>(g.pixel_count());
    DensityResult r;
    r.inside_events = inside;
    r.score = inside_density / (frame_density + 1e-9);
    r.verdict = r.score >= params.threshold && inside >= params.min_events ? Verdict::accepted : Verdict::rejected;
    return r;
}

std::vector<VerdictRow> read_verdicts_csv(std::istream& in) {
    std::vector<VerdictRow> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) continue;
        if (!header) {
            if (text != "sequence,window,box_index,verdict") {
                throw Error(ErrorKind::parse_error, "line " + std::to_string(line_no) +
                                                        ": expected header 'sequence,window,box_index,verdict'");
            }
            header = true;
            continue;
        }
        const auto f = split_list(text);
        try {
            if (f.size() != 4) throw Error(ErrorKind::invalid_config, "expected 4 fields");
            VerdictRow r;
            r.sequence = f[0];
            r.window = parse_value<std::uint64_t>("window", f[1]);
            r.box_index = parse_value<std::size_t>("box_index", f[2]);
            const int v = parse_value<int>("verdict", f[3]);
            if (v != 0 && v != 1) throw Error(ErrorKind::invalid_config, "verdict must be 0 or 1");
            r.accepted = v == 1;
            rows.push_back(std::move(r));
        } catch (const Error& e) {
            throw Error(ErrorKind::parse_error, "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!header) {
        throw Error(ErrorKind::parse_error, "verdict file has no header");
    }
    return rows;
}

std::vector<VerdictRow> read_verdicts_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    return read_verdicts_csv(in);
}

DatasetManifest apply_verdicts(DatasetManifest m, std::span<const VerdictRow> rows) {
    std::map<std::pair<std::string, std::uint64_t>, std::vector<FrameRecord*>> index;
    for (auto& r : m.records) index[{r.sequence, r.window}].push_back(&r);
    for (const auto& row : rows) {
        auto it = index.find({row.sequence, row.window});
        if (it == index.end() || row.box_index >= it->second.front()->boxes.size()) {
            throw Error(ErrorKind::unknown_reference, "verdict for " + row.sequence + " window " +
                                                          std::to_string(row.window) + " box " +
                                                          std::to_string(row.box_index) + " matches no candidate");
        }
        for (auto* r : it->second) {
            r->verdicts[row.box_index] = row.accepted ? Verdict::accepted : Verdict::rejected;
        }
    }
    return drop_unaccepted(std::move(m));
}

DatasetManifest drop_unaccepted(DatasetManifest m) {
    std::erase_if(m.records, [](const FrameRecord& r) { return r.accepted_count() == 0; });
    return m;
}

DatasetManifest split_dataset(DatasetManifest m, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw Error(ErrorKind::invalid_config, "test fraction must be in (0, 1)");
    }
    std::set<std::string> unique;
    for (const auto& r : m.records) unique.insert(r.sequence);
    std::vector<std::string> ids(unique.begin(), unique.end());
    portable_shuffle(ids, seed);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ids.size())));
    if (ids.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, ids.size() - 1);
    const std::set<std::string> test(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    for (auto& r : m.records) r.split = test.contains(r.sequence) ? Split::test : Split::train;
    return m;
}

// --- config -------------------------------------------------------------------------------

DatasetConfig parse_dataset_config(std::string_view text, const fs::path& base_dir) {
    DatasetConfig cfg;
    cfg.out_dir = base_dir / "dataset";
    std::optional<std::uint32_t> width;
    std::optional<std::uint32_t> height;
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::invalid_config, "line " + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = std::string(trim(line.substr(0, eq)));
        const auto value = std::string(trim(line.substr(eq + 1)));
        if (key == "sequence") {
            const auto f = split_list(value);
            if (f.size() != 3) {
                throw Error(ErrorKind::invalid_config, "line " + std::to_string(line_no) +
                                                           ": sequence = id,events_path,annotations_path");
            }
            require_safe_id(f[0]);
            cfg.sequences.push_back({f[0], resolve(f[1]), resolve(f[2])});
        } else if (key == "out") {
            cfg.out_dir = resolve(value);
        } else if (key == "tau_us") {
            cfg.window.tau = parse_value<std::uint64_t>(key, value);
        } else if (key == "origin_us") {
            cfg.window.origin = parse_value<std::uint64_t>(key, value);
        } else if (key == "reps") {
            cfg.reps.clear();
            for (const auto& r : split_list(value)) cfg.reps.push_back(parse_rep_kind(r));
        } else if (key == "fusion_order") {
            cfg.render.order = parse_fusion_order(value);
        } else if (key == "freq_mode") {
            if (value != "signed" && value != "count") {
                throw Error(ErrorKind::invalid_config, "freq_mode is 'signed' or 'count'");
            }
            cfg.render.frequency_mode = value == "signed" ? FrequencyMode::signed_sum : FrequencyMode::event_count;
        } else if (key == "class_id") {
            cfg.class_id = parse_value<int>(key, value);
        } else if (key == "verdicts") {
            cfg.verdicts = resolve(value);
        } else if (key == "density_threshold") {
            cfg.density.threshold = parse_value<double>(key, value);
        } else if (key == "density_min_events") {
            cfg.density.min_events = parse_value<std::uint64_t>(key, value);
        } else if (key == "test_fraction") {
            cfg.test_fraction = parse_value<double>(key, value);
        } else if (key == "seed") {
            cfg.seed = parse_value<std::uint64_t>(key, value);
        } else if (key == "emit_crops") {
            cfg.emit_crops = parse_bool(key, value);
        } else if (key == "crop_side") {
            cfg.crop_side = parse_value<std::uint32_t>(key, value);
        } else if (key == "reconstruction_dir") {
            cfg.reconstruction_dir = resolve(value);
        } else if (key == "width") {
            width = parse_value<std::uint32_t>(key, value);
        } else if (key == "height") {
            height = parse_value<std::uint32_t>(key, value);
        } else if (key == "zero_is_negative") {
            cfg.zero_is_negative = parse_bool(key, value);
        } else if (key == "jobs") {
            cfg.jobs = parse_value<unsigned>(key, value);
        } else {
            throw Error(ErrorKind::invalid_config, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    if (width.has_value() != height.has_value()) {
        throw Error(ErrorKind::invalid_config, "width and height must be given together");
    }
    if (width) cfg.geometry = SensorGeometry{*width, *height};
    return cfg;
}

DatasetConfig load_dataset_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io_error, "cannot open " + path.string());
    }
    const std::string text(std::istreambuf_iterator<char>(in), {});
    return parse_dataset_config(text, path.parent_path());
}

// --- build --------------------------------------------------------------------------------

BuildSummary build_dataset(const DatasetConfig& cfg) {
    require_valid(cfg.window);
    if (cfg.reps.empty()) {
        throw Error(ErrorKind::invalid_config, "at least one representation is required");
    }
    if (std::find(cfg.reps.begin(), cfg.reps.end(), RepKind::reconstruction) != cfg.reps.end()) {
        throw Error(ErrorKind::invalid_config, "reconstructions are added through reconstruction_dir, not reps");
    }
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
        throw Error(ErrorKind::invalid_config, "test fraction must be in (0, 1)");
    }
    std::set<std::string> ids;
    for (const auto& s : cfg.sequences) {
        require_safe_id(s.id);
        if (!ids.insert(s.id).second) {
            throw Error(ErrorKind::invalid_config, "duplicate sequence id '" + s.id + "'");
        }
    }

    BuildSummary summary;
    summary.sequences_total = cfg.sequences.size();

    std::vector<SequenceAnnotations> annotations;
    for (const auto& s : cfg.sequences) annotations.push_back({s.id, load_annotations(s.annotations)});
    auto filtered = filter_sequences_by_class(annotations, cfg.class_id);
    if (filtered.warning) summary.warnings.push_back(*filtered.warning);
    summary.sequences_kept = filtered.kept.size();

    std::map<std::string, const SequenceInput*> input_by_id;
    for (const auto& s : cfg.sequences) input_by_id[s.id] = &s;
    // Only boxes of the selected class take part in verification and labels.
    for (auto& s : filtered.kept) {
        std::erase_if(s.boxes, [&](const AnnotationRecord& b) { return b.class_id != cfg.class_id; });
    }
    std::sort(filtered.kept.begin(), filtered.kept.end(),
              [](const SequenceAnnotations& a, const SequenceAnnotations& b) { return a.id < b.id; });

    const auto candidates = parallel_map<SequenceCandidates>(filtered.kept.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = filtered.kept[i];
        return collect_candidates(*input_by_id.at(s.id), s.boxes, cfg);
    });

    DatasetManifest manifest;
    manifest.window = cfg.window;
    manifest.params = creation_params(cfg);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& seq = filtered.kept[i].id;
        const auto& c = candidates[i];
        if (i == 0) {
            manifest.geometry = c.geometry;
        } else if (!(c.geometry == manifest.geometry)) {
            throw Error(ErrorKind::invalid_config, "sequence '" + seq + "' has a different sensor geometry");
        }
        if (c.dropped_boxes > 0) {
            summary.warnings.push_back(seq + ": dropped " + std::to_string(c.dropped_boxes) + " box(es) off the sensor plane");
        }
        summary.dropped_boxes += c.dropped_boxes;
        summary.candidate_windows += c.windows.size();
        for (const auto& w : c.windows) {
            auto make = [&](RepKind kind, const std::string& ext) {
                FrameRecord r;
                r.sequence = seq;
                r.window = w.window;
                r.kind = kind;
                r.image = image_rel_path(seq, w.window, kind, ext);
                r.label = label_rel_path(seq, w.window);
                r.boxes = w.boxes;
                r.verdicts = w.verdicts;
                r.scores = w.scores;
                manifest.records.push_back(std::move(r));
            };
            for (auto kind : cfg.reps) make(kind, image_extension(kind));
            if (w.reconstruction) make(RepKind::reconstruction, w.reconstruction->extension().string());
        }
    }

    if (cfg.emit_crops) {
        fs::create_directories(cfg.out_dir);
        std::ofstream(cfg.out_dir / "candidates.jsonl", std::ios::binary) << manifest_to_jsonl(manifest);
    }

    if (cfg.verdicts) {
        std::ifstream in(*cfg.verdicts);
        if (!in) {
            throw Error(ErrorKind::io_error, "cannot open " + cfg.verdicts->string());
        }
        manifest = apply_verdicts(std::move(manifest), read_verdicts_csv(in));
    } else {
        manifest = drop_unaccepted(std::move(manifest));
    }
    manifest = split_dataset(std::move(manifest), cfg.test_fraction, cfg.seed);

    std::map<std::string, std::vector<const FrameRecord*>> frames_by_seq;
    for (const auto& r : manifest.records) frames_by_seq[r.sequence].push_back(&r);
    std::vector<std::string> render_ids;
    for (const auto& [id, _] : frames_by_seq) render_ids.push_back(id);
    const auto written = parallel_map<std::pair<std::size_t, std::size_t>>(
        render_ids.size(), cfg.jobs,
        [&](std::size_t i) { return render_sequence(*input_by_id.at(render_ids[i]), frames_by_seq.at(render_ids[i]), cfg); });
    for (const auto& [images, labels] : written) {
        summary.images_written += images;
        summary.labels_written += labels;
    }

    fs::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir / "manifest.jsonl", std::ios::binary);
    out << manifest_to_jsonl(manifest);
    if (!out.flush()) {
        throw Error(ErrorKind::io_error, "failed writing manifest");
    }
    summary.manifest = std::move(manifest);
    return summary;
}

}  // namespace evframes
