#include "evframes/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "evframes/bench.hpp"
#include "evframes/dataset.hpp"
#include "evframes/error.hpp"
#include "evframes/io.hpp"
#include "evframes/representations.hpp"
#include "evframes/synth.hpp"
#include "evframes/windowing.hpp"

namespace evframes {

namespace fs = std::filesystem;

namespace {

struct GeometryFlags {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    bool zero_is_negative = false;

    void add(CLI::App* app) {
        app->add_option("--width", width, "Sensor width for CSV input (default: max x + 1)");
        app->add_option("--height", height, "Sensor height for CSV input (default: max y + 1)");
        app->add_flag("--zero-negative", zero_is_negative, "Read CSV polarity 0 as -1");
    }

    CsvReadOptions csv() const {
        if ((width == 0) != (height == 0)) {
            throw Error(ErrorKind::invalid_config, "--width and --height must be given together");
        }
        CsvReadOptions o;
        if (width != 0) o.geometry = SensorGeometry{width, height};
        o.zero_is_negative = zero_is_negative;
        return o;
    }
};

struct RenderFlags {
    std::string order = "frame,freq,decay";
    std::string freq_mode = "signed";

    void add(CLI::App* app) {
        app->add_option("--order", order, "Fusion channel order")->capture_default_str();
        app->add_option("--freq-mode", freq_mode, "Frequency channel input: signed polarity sum or event count")
            ->check(CLI::IsMember({"signed", "count"}))
            ->capture_default_str();
    }

    RenderOptions options() const {
        return {parse_fusion_order(order), freq_mode == "signed" ? FrequencyMode::signed_sum : FrequencyMode::event_count};
    }
};

struct ScenarioFlags {
    MovingBarScenario sc;

    void add(CLI::App* app) {
        app->add_option("--width", sc.geometry.width, "Sensor width")->capture_default_str();
        app->add_option("--height", sc.geometry.height, "Sensor height")->capture_default_str();
        app->add_option("--bar-width", sc.bar_width, "Bar width in pixels")->capture_default_str();
        app->add_option("--velocity", sc.velocity, "Bar velocity in pixels/s (sign = direction)")->capture_default_str();
        app->add_option("--duration-us", sc.duration_us, "Stream duration in microseconds")->capture_default_str();
        app->add_option("--events-per-crossing", sc.events_per_crossing, "Events per pixel per edge crossing")
            ->capture_default_str();
        app->add_option("--seed", sc.seed, "Noise seed")->capture_default_str();
        app->add_option("--noise-rate", sc.noise_rate, "Background noise, events/pixel/s")->capture_default_str();
    }
};

// Pushes every event of `path` (EVT1 streamed, CSV loaded and normalized) into a streamer built for its geometry.
template <class Make>
void stream_file(const fs::path& path, const CsvReadOptions& csv, Make&& make) {
    if (detect_event_format(path) == EventFileFormat::evt1) {
        std::ifstream in(path, std::ios::binary);
        Evt1Reader reader(in);
        auto& streamer = make(reader.geometry());
        std::vector<Event> buf(Evt1Reader::buffer_records);
        while (const auto n = reader.read(buf)) streamer.push(std::span<const Event>(buf.data(), n));
        streamer.finish();
        return;
    }
    auto s = normalize_stream(load_events(path, csv)).stream;
    auto& streamer = make(s.geometry);
    streamer.push(s.events);
    streamer.finish();
}

int cmd_convert(const fs::path& in_path, const fs::path& out_path, const GeometryFlags& geo, std::ostream& out) {
    const auto out_fmt = format_for_extension(out_path);
    std::uint64_t n = 0;
    if (detect_event_format(in_path) == EventFileFormat::evt1) {
        std::ifstream in(in_path, std::ios::binary);
        Evt1Reader reader(in);
        std::ofstream dst(out_path, std::ios::binary);
        if (!dst) throw Error(ErrorKind::io_error, "cannot create " + out_path.string());
        std::vector<Event> buf(Evt1Reader::buffer_records);
        if (out_fmt == EventFileFormat::evt1) {
            Evt1Writer writer(dst, reader.geometry());
            while (const auto k = reader.read(buf)) {
                for (std::size_t i = 0; i < k; ++i) writer.write(buf[i]);
            }
            writer.finish();
            n = writer.count();
        } else {
            dst << "t_us,x,y,p\n";
            EventStream chunk;
            while (const auto k = reader.read(buf)) {
                chunk.events.assign(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k));
                const auto text = write_events_csv(chunk);
                dst << std::string_view(text).substr(text.find('\n') + 1);
                n += k;
            }
        }
        if (!dst.flush()) throw Error(ErrorKind::io_error, "failed writing " + out_path.string());
    } else {
        const auto s = load_events(in_path, geo.csv());
        save_events(s, out_path);
        n = s.events.size();
    }
    out << "events=" << n << "\n";
    return 0;
}

int cmd_render(const fs::path& events, const std::string& annotations, const fs::path& out_dir,
               const std::vector<std::string>& rep_names, const WindowConfig& window, const RenderOptions& render_opts,
               int class_id, bool raw, const GeometryFlags& geo, std::ostream& out, std::ostream& err) {
    require_valid(window);
    std::vector<RepKind> reps;
    for (const auto& r : rep_names) {
        const auto k = parse_rep_kind(r);
        if (k == RepKind::reconstruction) throw Error(ErrorKind::invalid_config, "render cannot produce reconstructions");
        if (std::find(reps.begin(), reps.end(), k) == reps.end()) reps.push_back(k);
    }
    if (reps.empty()) throw Error(ErrorKind::invalid_config, "at least one --rep is required");

    std::map<std::uint64_t, std::vector<AnnotationRecord>> boxes;
    std::vector<AnnotationRecord> all_boxes;
    if (!annotations.empty()) {
        all_boxes = load_annotations(annotations);
        if (class_id >= 0) {
            std::erase_if(all_boxes, [&](const AnnotationRecord& b) { return b.class_id != class_id; });
        }
    }
    fs::create_directories(out_dir);
    std::size_t images = 0;
    std::size_t labels = 0;
    std::size_t dropped = 0;
    std::uint64_t windows = 0;
    std::optional<WindowStreamer> streamer;

    stream_file(events, geo.csv(), [&](SensorGeometry g) -> WindowStreamer& {
        for (const auto& b : all_boxes) {
            try {
                clip_box(b, g);
            } catch (const Error&) {
                ++dropped;
                continue;
            }
            if (b.t >= window.origin) boxes[window_index(b.t, window)].push_back(b);
        }
        streamer.emplace(g, window, [&](const PixelStateMap& m) {
            const auto stem = std::to_string(m.ordinal());
            for (auto k : reps) {
                const auto name = stem + "_" + std::string(to_string(k));
                export_image(render(m, k, render_opts), out_dir / (name + (k == RepKind::fusion ? ".ppm" : ".pgm")));
                ++images;
                if (raw && k != RepKind::fusion) {
                    export_raw_channel(raw_channel(m, k, render_opts), out_dir / (name + ".f64"));
                }
            }
            if (!annotations.empty()) {
                auto it = boxes.find(m.ordinal());
                const auto text = it == boxes.end() ? std::string() : write_yolo_labels(it->second, m.geometry());
                std::ofstream(out_dir / (stem + ".txt"), std::ios::binary) << text;
                ++labels;
            }
            ++windows;
        });
        return *streamer;
    });
    if (dropped > 0) err << "evframes: warning: dropped " << dropped << " box(es) off the sensor plane\n";
    out << "windows=" << windows << "\nimages=" << images << "\nlabels=" << labels << "\n";
    return 0;
}

int cmd_dataset(DatasetConfig cfg, std::ostream& out, std::ostream& err) {
    const auto summary = build_dataset(cfg);
    for (const auto& w : summary.warnings) err << "evframes: warning: " << w << "\n";
    out << "sequences=" << summary.sequences_total << "\nsequences_kept=" << summary.sequences_kept
        << "\ncandidate_windows=" << summary.candidate_windows << "\nrecords=" << summary.manifest.records.size()
        << "\nimages=" << summary.images_written << "\nlabels=" << summary.labels_written << "\n";
    return 0;
}

int cmd_synth(const MovingBarScenario& sc, const fs::path& out_path, const std::string& annotations,
              std::uint64_t tau, int class_id, std::ostream& out) {
    MovingBarGenerator gen(sc, tau, class_id);
    std::ofstream dst(out_path, std::ios::binary);
    if (!dst) throw Error(ErrorKind::io_error, "cannot create " + out_path.string());
    std::vector<Event> buf(1 << 14);
    std::uint64_t n = 0;
    if (format_for_extension(out_path) == EventFileFormat::evt1) {
        Evt1Writer writer(dst, sc.geometry);
        while (const auto k = gen.read(buf)) {
            for (std::size_t i = 0; i < k; ++i) writer.write(buf[i]);
        }
        writer.finish();
        n = writer.count();
    } else {
        dst << "t_us,x,y,p\n";
        EventStream chunk;
        while (const auto k = gen.read(buf)) {
            chunk.events.assign(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k));
            const auto text = write_events_csv(chunk);
            dst << std::string_view(text).substr(text.find('\n') + 1);
            n += k;
        }
    }
    if (!dst.flush()) throw Error(ErrorKind::io_error, "failed writing " + out_path.string());
    if (!annotations.empty()) {
        std::vector<AnnotationRecord> boxes;
        for (const auto& t : gen.truths()) boxes.push_back(t.box);
        std::ofstream ann(annotations, std::ios::binary);
        write_annotations_csv(boxes, ann);
        if (!ann.flush()) throw Error(ErrorKind::io_error, "failed writing " + annotations);
    }
    out << "events=" << n << "\nwindows_with_truth=" << gen.truths().size() << "\n";
    return 0;
}

int cmd_bench(const std::string& input, bool synthetic, const MovingBarScenario& sc, const BenchOptions& opts,
              const GeometryFlags& geo, std::ostream& out) {
    BenchReport report;
    if (synthetic || input.empty()) {
        MovingBarGenerator gen(sc);
        report = bench_throughput(sc.geometry, [&](std::span<Event> buf) { return gen.read(buf); }, opts);
    } else if (detect_event_format(input) == EventFileFormat::evt1) {
        std::ifstream in(input, std::ios::binary);
        Evt1Reader reader(in);
        report = bench_throughput(reader.geometry(), [&](std::span<Event> buf) { return reader.read(buf); }, opts);
    } else {
        report = bench_throughput(normalize_stream(load_events(input, geo.csv())).stream, opts);
    }
    out << report.to_text();
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Event-camera frame representations and detector dataset builder", "evframes"};
    app.require_subcommand(1);
    std::function<int()> action;

    // convert
    auto* convert = app.add_subcommand("convert", "Transcode events between CSV and EVT1 (format from extension)");
    std::string conv_in;
    std::string conv_out;
    GeometryFlags conv_geo;
    convert->add_option("input", conv_in, "Input events (.csv or EVT1)")->required();
    convert->add_option("output", conv_out, "Output path (.csv or .evt1)")->required();
    conv_geo.add(convert);
    convert->callback([&] { action = [&] { return cmd_convert(conv_in, conv_out, conv_geo, out); }; });

    // render
    auto* render_cmd = app.add_subcommand("render", "Render per-window representation images (+ YOLO labels)");
    std::string rend_events;
    std::string rend_ann;
    std::string rend_out;
    std::vector<std::string> rend_reps{"fusion"};
    WindowConfig rend_window;
    RenderFlags rend_flags;
    int rend_class = -1;
    bool rend_raw = false;
    GeometryFlags rend_geo;
    render_cmd->add_option("events", rend_events, "Input events (.csv or EVT1)")->required();
    render_cmd->add_option("-o,--out", rend_out, "Output directory")->required();
    render_cmd->add_option("--annotations", rend_ann, "Annotation CSV; writes <window>.txt YOLO labels");
    render_cmd->add_option("--rep", rend_reps, "Representation(s): frame, freq, decay, fusion")
        ->check(CLI::IsMember({"frame", "freq", "decay", "fusion"}))
        ->capture_default_str();
    render_cmd->add_option("--tau", rend_window.tau, "Window length in microseconds")->capture_default_str();
    render_cmd->add_option("--origin", rend_window.origin, "Window phase origin in microseconds")->capture_default_str();
    render_cmd->add_option("--class-id", rend_class, "Only label boxes of this class (-1: all)")->capture_default_str();
    render_cmd->add_flag("--raw", rend_raw, "Also dump single-channel planes as little-endian float64 (.f64)");
    rend_flags.add(render_cmd);
    rend_geo.add(render_cmd);
    render_cmd->callback([&] {
        action = [&] {
            return cmd_render(rend_events, rend_ann, rend_out, rend_reps, rend_window, rend_flags.options(), rend_class,
                              rend_raw, rend_geo, out, err);
        };
    });

    // dataset
    auto* dataset = app.add_subcommand("dataset", "Build a detector dataset: filter, render, verify, split, manifest");
    std::string ds_config;
    std::string ds_out;
    std::string ds_verdicts;
    std::optional<std::uint64_t> ds_seed;
    std::optional<double> ds_fraction;
    std::optional<unsigned> ds_jobs;
    bool ds_crops = false;
    dataset->add_option("config", ds_config, "key=value config file")->required();
    dataset->add_option("--out", ds_out, "Output directory (overrides config 'out')");
    dataset->add_option("--verdicts", ds_verdicts, "Verdict CSV from an external verifier (default: density heuristic)");
    dataset->add_option("--seed", ds_seed, "Split seed (default 0)");
    dataset->add_option("--test-fraction", ds_fraction, "Test split fraction (default 0.25)");
    dataset->add_option("--jobs", ds_jobs, "Sequences processed in parallel (default 1)");
    dataset->add_flag("--emit-crops", ds_crops, "Write 64x64 candidate crops and candidates.jsonl");
    dataset->callback([&] {
        action = [&] {
            auto cfg = load_dataset_config(ds_config);
            if (!ds_out.empty()) cfg.out_dir = ds_out;
            if (!ds_verdicts.empty()) cfg.verdicts = fs::path(ds_verdicts);
            if (ds_seed) cfg.seed = *ds_seed;
            if (ds_fraction) cfg.test_fraction = *ds_fraction;
            if (ds_jobs) cfg.jobs = *ds_jobs;
            if (ds_crops) cfg.emit_crops = true;
            return cmd_dataset(std::move(cfg), out, err);
        };
    });

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a moving-bar event stream with ground-truth boxes");
    ScenarioFlags synth_sc;
    std::string synth_out;
    std::string synth_ann;
    std::uint64_t synth_tau = 10000;
    int synth_class = 0;
    synth->add_option("-o,--out", synth_out, "Output events (.csv or .evt1)")->required();
    synth->add_option("--annotations", synth_ann, "Write per-window ground-truth boxes as annotation CSV");
    synth->add_option("--tau", synth_tau, "Window length for ground-truth boxes")->capture_default_str();
    synth->add_option("--class-id", synth_class, "Class id of ground-truth boxes")->capture_default_str();
    synth_sc.add(synth);
    synth->callback([&] {
        action = [&] { return cmd_synth(synth_sc.sc, synth_out, synth_ann, synth_tau, synth_class, out); };
    });

    // bench
    auto* bench = app.add_subcommand("bench", "Throughput of windowing + fusion; prints key=value report");
    std::string bench_in;
    bool bench_synth = false;
    ScenarioFlags bench_sc;
    bench_sc.sc.geometry = {320, 240};
    bench_sc.sc.velocity = 10000.0;
    bench_sc.sc.duration_us = 1000000;
    BenchOptions bench_opts;
    RenderFlags bench_flags;
    GeometryFlags bench_geo;
    bench->add_option("input", bench_in, "Input events (.csv or EVT1); omit with --synthetic");
    bench->add_flag("--synthetic", bench_synth, "Benchmark a generated moving-bar stream");
    bench->add_option("--tau", bench_opts.window.tau, "Window length in microseconds")->capture_default_str();
    bench->add_option("--jobs", bench_opts.jobs, "Worker threads fusing windows")->capture_default_str();
    bench_sc.add(bench);
    bench_flags.add(bench);
    bench->add_flag("--zero-negative", bench_geo.zero_is_negative, "Read CSV polarity 0 as -1");
    bench->callback([&] {
        action = [&] {
            bench_opts.render = bench_flags.options();
            return cmd_bench(bench_in, bench_synth, bench_sc.sc, bench_opts, bench_geo, out);
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "evframes: usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        return action ? action() : 2;
    } catch (const Error& e) {
        err << "evframes: error: " << e.what() << "\n";
        return e.kind() == ErrorKind::invalid_config ? 2 : 1;
    } catch (const std::exception& e) {
        err << "evframes: error: " << e.what() << "\n";
        return 1;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace evframes
