#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evframes/image.hpp"
#include "evframes/io.hpp"
#include "evframes/representations.hpp"
#include "evframes/windowing.hpp"

namespace evframes {

enum class Verdict { unverified, accepted, rejected };
enum class Split { unassigned, train, test };

std::string_view to_string(Verdict v);
std::string_view to_string(Split s);

/// One representation image of one window of one sequence, with its candidate boxes.
struct FrameRecord {
    std::string sequence;
    std::uint64_t window = 0;
    RepKind kind = RepKind::fusion;
    std::string image;  // relative to the dataset root
    std::string label;  // relative to the dataset root
    std::vector<AnnotationRecord> boxes;
    std::vector<Verdict> verdicts;
    /// Heuristic scores, parallel to boxes; empty when an external verifier decided.
    std::vector<double> scores;
    Split split = Split::unassigned;

    std::size_t accepted_count() const;
};

struct DatasetManifest {
    SensorGeometry geometry;
    WindowConfig window;
    /// Creation parameters, recorded verbatim in the header line.
    std::map<std::string, std::string> params;
    std::vector<FrameRecord> records;
};

/// JSON Lines: a header record, then one record per frame, in record order.
std::string manifest_to_jsonl(const DatasetManifest& m);
DatasetManifest manifest_from_jsonl(std::string_view text);

// --- filtering ---------------------------------------------------------------

struct SequenceAnnotations {
    std::string id;
    std::vector<AnnotationRecord> boxes;
};

struct FilterResult {
    std::vector<SequenceAnnotations> kept;
    /// Set when no sequence qualifies.
    std::optional<std::string> warning;
};

/// Keeps, in order, the sequences with at least one box of `class_id`.
FilterResult filter_sequences_by_class(std::span<const SequenceAnnotations> sequences, int class_id);

// --- verification --------------------------------------------------------------

struct Crop {
    std::string sequence;
    std::uint64_t window = 0;
    std::size_t box_index = 0;
    Image image;
};

/// Nearest-neighbour resample of `rect` to side x side: out(i, j) = src(x0 + i*w/side, y0 + j*h/side).
Image resample_region(const Image& src, const PixelRect& rect, std::uint32_t side);

/// One crop per box. Throws DegenerateBox for boxes off the image.
std::vector<Crop> extract_crops(const Image& img, std::span<const AnnotationRecord> boxes, std::uint32_t side = 64,
                                std::string_view sequence = {}, std::uint64_t window = 0);

struct DensityParams {
    double threshold = 1.5;
    std::uint64_t min_events = 20;
};

struct DensityResult {
    Verdict verdict = Verdict::rejected;
    double score = 0.0;
    std::uint64_t inside_events = 0;
};

/// score = (events per pixel inside the box) / (events per pixel over the frame + 1e-9).
/// Accepted iff score >= threshold and the box holds at least min_events events.
DensityResult density_verdict(const PixelStateMap& m, const AnnotationRecord& box, const DensityParams& params = {});

struct VerdictRow {
    std::string sequence;
    std::uint64_t window = 0;
    std::size_t box_index = 0;
    bool accepted = false;
};

/// CSV with header `sequence,window,box_index,verdict`, verdict in {0,1}.
std::vector<VerdictRow> read_verdicts_csv(std::istream& in);
std::vector<VerdictRow> read_verdicts_csv(std::string_view text);

/// Marks boxes from the rows, then drops frames without an accepted box.
/// Throws UnknownReference for rows that match no frame or box.
DatasetManifest apply_verdicts(DatasetManifest m, std::span<const VerdictRow> rows);

/// Drops frames that have no accepted box.
DatasetManifest drop_unaccepted(DatasetManifest m);

/// Sequence-level split: round(test_fraction * n) sequences go to test (at least one
/// on each side when n >= 2). Deterministic for a given seed on every platform.
DatasetManifest split_dataset(DatasetManifest m, double test_fraction = 0.25, std::uint64_t seed = 0);

// --- end-to-end build ------------------------------------------------------------

struct SequenceInput {
    std::string id;
    std::filesystem::path events;
    std::filesystem::path annotations;
};

struct DatasetConfig {
    std::vector<SequenceInput> sequences;
    std::filesystem::path out_dir;
    WindowConfig window;
    std::vector<RepKind> reps{RepKind::fusion};
    RenderOptions render;
    int class_id = 0;
    /// External verifier output; the density heuristic decides when absent.
    std::optional<std::filesystem::path> verdicts;
    DensityParams density;
    double test_fraction = 0.25;
    std::uint64_t seed = 0;
    /// Write 64x64 crops of every candidate box plus candidates.jsonl for an external verifier.
    bool emit_crops = false;
    std::uint32_t crop_side = 64;
    /// Externally reconstructed frames, looked up as <dir>/<sequence>/<window>.{pgm,ppm,png,jpg}.
    std::optional<std::filesystem::path> reconstruction_dir;
    /// Geometry for CSV event files (EVT1 files carry their own).
    std::optional<SensorGeometry> geometry;
    bool zero_is_negative = false;
    unsigned jobs = 1;
};

/// Parses `key = value` lines (`#` comments). Relative paths resolve against `base_dir`.
/// Repeated `sequence = id,events,annotations` lines list the inputs.
DatasetConfig parse_dataset_config(std::string_view text, const std::filesystem::path& base_dir);
DatasetConfig load_dataset_config(const std::filesystem::path& path);

struct BuildSummary {
    DatasetManifest manifest;
    std::size_t sequences_total = 0;
    std::size_t sequences_kept = 0;
    std::size_t candidate_windows = 0;
    std::size_t images_written = 0;
    std::size_t labels_written = 0;
    std::size_t dropped_boxes = 0;
    std::vector<std::string> warnings;
};

/// filter -> candidate windows -> verify -> split -> render images + YOLO labels -> manifest.jsonl
BuildSummary build_dataset(const DatasetConfig& cfg);

}  // namespace evframes
