#include "sca/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sca::dsp {

void PowerSeries::validate() const {
    if (power.empty()) throw ValidationError("power series is empty");
    if (!(sample_rate > 0)) throw ValidationError("sample_rate must be positive");
    for (double p : power)
        if (!std::isfinite(p)) throw ValidationError("non-finite power sample");
}

PowerSeries compute_power(const synth::PowerTrace& trace) {
    trace.validate();
    PowerSeries series;
    series.sample_rate = trace.sample_rate;
    series.power.resize(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i)
        series.power[i] = trace.voltage[i] * trace.current[i];
    return series;
}

namespace {

// Power traces are two-level: idle floor plus inference plateaus. The
// midpoint of the 1st/99th percentiles splits the modes regardless of
// duty cycle; the idle level is the median of the quiet side.
struct IdleStats {
    double idle;
    double mad;
};

IdleStats idle_stats(const PowerSeries& series) {
    std::vector<double> sorted = series.power;
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    double cut = 0.5 * (sorted[n / 100] + sorted[n - 1 - n / 100]);
    auto quiet_end = std::upper_bound(sorted.begin(), sorted.end(), cut);
    if (quiet_end == sorted.begin()) quiet_end = sorted.end();
    std::vector<double> quiet(sorted.begin(), quiet_end);
    double idle = quiet[quiet.size() / 2];
    for (double& q : quiet) q = std::abs(q - idle);
    std::sort(quiet.begin(), quiet.end());
    return {idle, quiet[quiet.size() / 2]};
}

}  // namespace

double estimate_idle(const PowerSeries& series) {
    series.validate();
    return idle_stats(series).idle;
}

namespace {

double median_of(std::vector<double> values) {
    // sort(P)[n/2], zero-based
    std::sort(values.begin(), values.end());
    return values[values.size() / 2];
}

struct Threshold {
    double idle;
    double value;
};

Threshold compute_threshold(const PowerSeries& series, const SegmentationOptions& opts) {
    IdleStats stats = idle_stats(series);
    double idle = opts.idle_estimate.value_or(stats.idle);
    return Threshold{idle, idle + opts.margin_scale * 1.4826 * stats.mad};
}

std::vector<double> boxcar(const std::vector<double>& x, std::size_t width) {
    if (width <= 1) return x;
    std::size_t n = x.size();
    std::size_t half = width / 2;
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t lo = i >= half ? i - half : 0;
        std::size_t hi = std::min(n, i + half + 1);
        out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    }
    return out;
}

}  // namespace

std::vector<Segment> detect_peaks(const PowerSeries& series,
                                  const SegmentationOptions& opts) {
    series.validate();
    Threshold thr = compute_threshold(series, opts);
    std::vector<double> smooth = boxcar(series.power, opts.smooth_width);

    std::vector<Segment> peaks;
    std::size_t n = series.power.size();
    std::size_t i = 0;
    while (i < n) {
        if (smooth[i] <= thr.value) {
            ++i;
            continue;
        }
        std::size_t run_start = i;
        while (i < n && smooth[i] > thr.value) ++i;
        Segment run{run_start, i};
        if (run.length() < opts.min_peak_width) continue;
        // refine on the raw series so exact staircases keep exact bounds
        std::size_t first = run.end, last = run.start;
        for (std::size_t k = run.start; k < run.end; ++k) {
            if (series.power[k] > thr.value) {
                first = std::min(first, k);
                last = k;
            }
        }
        if (first >= run.end) continue;
        Segment refined{first, last + 1};
        if (refined.length() < opts.min_peak_width) continue;
        peaks.push_back(refined);
    }
    return peaks;
}

Segment segment_active(const PowerSeries& series, const SegmentationOptions& opts) {
    auto peaks = detect_peaks(series, opts);
    if (peaks.empty()) throw ValidationError("no active region");
    return Segment{peaks.front().start, peaks.back().end};
}

std::vector<PowerSeries> group_windows(const PowerSeries& series,
                                       const std::vector<Segment>& peaks,
                                       std::size_t group_size, bool include_valleys) {
    series.validate();
    if (group_size < 1) throw ValidationError("group_size must be >= 1");
    std::vector<PowerSeries> windows;
    for (std::size_t g = 0; g + group_size <= peaks.size(); g += group_size) {
        PowerSeries window;
        window.sample_rate = series.sample_rate;
        if (include_valleys) {
            std::size_t start = peaks[g].start;
            std::size_t end = peaks[g + group_size - 1].end;
            window.power.assign(series.power.begin() + start,
                                series.power.begin() + end);
        } else {
            for (std::size_t k = g; k < g + group_size; ++k)
                window.power.insert(window.power.end(),
                                    series.power.begin() + peaks[k].start,
                                    series.power.begin() + peaks[k].end);
        }
        windows.push_back(std::move(window));
    }
    return windows;
}

FeatureVector extract_features(const PowerSeries& window) {
    window.validate();
    const auto& p = window.power;
    double n = static_cast<double>(p.size());
    double mean = std::accumulate(p.begin(), p.end(), 0.0) / n;
    double sq = 0.0;
    for (double v : p) sq += (v - mean) * (v - mean);
    FeatureVector out;
    out.p_mea = mean;
    out.p_mid = median_of(p);
    out.p_std = std::sqrt(sq / n);
    return out;
}

void write_feature_csv(const std::vector<FeatureRow>& rows, std::ostream& out) {
    out << "p_mea,p_mid,p_std,arch_label,sparsity_label\n";
    char buf[128];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", row.features.p_mea,
                      row.features.p_mid, row.features.p_std);
        out << buf << ',' << row.arch_label << ',';
        if (row.sparsity_label) {
            std::snprintf(buf, sizeof buf, "%g", *row.sparsity_label);
            out << buf;
        }
        out << '\n';
    }
}

std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open feature file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("p_mea", 0) != 0)
        throw IoError("bad feature header in " + path.string());
    std::vector<FeatureRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        FeatureRow row;
        auto next = [&]() {
            if (!std::getline(ss, field, ','))
                throw IoError("bad feature row: " + line);
            return field;
        };
        row.features.p_mea = std::stod(next());
        row.features.p_mid = std::stod(next());
        row.features.p_std = std::stod(next());
        row.arch_label = std::getline(ss, field, ',') ? field : "";
        if (std::getline(ss, field) && !field.empty())
            row.sparsity_label = std::stod(field);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace sca::dsp
