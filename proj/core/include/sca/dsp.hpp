#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sca/synth.hpp"

namespace sca::dsp {

struct PowerSeries {
    std::vector<double> power;  // W
    double sample_rate = 400.0;

    void validate() const;
};

/// (mean, median, standard deviation) of a power window. The median is
/// sort(P)[n/2] with zero-based indexing and the deviation uses the
/// population divisor n.
struct FeatureVector {
    double p_mea = 0.0;
    double p_mid = 0.0;
    double p_std = 0.0;
};

/// Half-open sample range [start, end).
struct Segment {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const { return end - start; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

struct SegmentationOptions {
    // Idle power estimate; unset means auto (median of the quiet side of
    // the trace's two power levels).
    std::optional<double> idle_estimate;
    // Activation margin = margin_scale * robust noise std (MAD * 1.4826)
    // of the idle region.
    double margin_scale = 3.0;
    // Runs shorter than this are discarded as glitches.
    std::size_t min_peak_width = 10;
    // Boxcar width used only for run detection; boundaries are refined
    // on the raw series so noiseless segments stay exact.
    std::size_t smooth_width = 11;
};

/// Element-wise power: p[i] = u[i] * i[i].
PowerSeries compute_power(const synth::PowerTrace& trace);

/// Idle power estimate: median of the quiet side of the trace.
double estimate_idle(const PowerSeries& series);

/// Maximal above-threshold runs, one per image inference.
std::vector<Segment> detect_peaks(const PowerSeries& series,
                                  const SegmentationOptions& opts = {});

/// Smallest segment containing every above-threshold sample (the span
/// of the detected peaks). Throws if nothing is active.
Segment segment_active(const PowerSeries& series,
                       const SegmentationOptions& opts = {});

/// Groups consecutive peaks group_size at a time; each window spans from
/// its first peak's start to its last peak's end, valleys included
/// (include_valleys=false keeps only the peak samples). A trailing
/// incomplete group is dropped.
std::vector<PowerSeries> group_windows(const PowerSeries& series,
                                       const std::vector<Segment>& peaks,
                                       std::size_t group_size = 5,
                                       bool include_valleys = true);

FeatureVector extract_features(const PowerSeries& window);

/// Labeled feature rows as written to feature CSV files. Labels may be
/// empty/unset for unlabeled attack inputs.
struct FeatureRow {
    FeatureVector features;
    std::string arch_label;
    std::optional<double> sparsity_label;
};

void write_feature_csv(const std::vector<FeatureRow>& rows, std::ostream& out);
std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path);

}  // namespace sca::dsp
