#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adafsnet/tensor.hpp"

namespace adafsnet {

// One labeled series: D*W values, row-major [dim][time].
struct Sample {
    std::vector<double> values;
    int label = 0;
    std::vector<std::uint8_t> constant_dims;  // set by z-normalization
};

struct TimeSeriesDataset {
    std::string name;
    std::string split;  // "train" | "test"
    int width = 0;      // W, common post-padding length
    int dims = 1;       // D
    std::vector<std::string> class_names;  // sorted lexicographically
    std::vector<Sample> samples;

    int num_classes() const { return static_cast<int>(class_names.size()); }
    std::size_t size() const { return samples.size(); }
};

struct LoadOptions {
    bool normalize = true;
    bool interpolate_missing = false;
};

// UCR-style rows: label, then the series values, tab- or comma-separated.
TimeSeriesDataset parse_ucr_tsv(std::string_view text, const LoadOptions& opts = {});

// sktime-style .ts files: @problemName/@univariate/@classLabel/@data header,
// then one line per case with ':'-separated dimensions and a trailing label.
TimeSeriesDataset parse_ts(std::string_view text, const LoadOptions& opts = {});

// (x - mean) / population std; constant series (std < 1e-8) go to all zeros.
// Returns true when the series was flagged constant.
bool znormalize(std::vector<double>& series);

// Zero-pads every series at the end to the given width (>= current width).
void pad_to_length(TimeSeriesDataset& dataset, int width);

// Sorted distinct label tokens (string comparison, numeric-looking included).
std::vector<std::string> encode_labels(const std::vector<std::string>& raw);

// Loads <name>_TRAIN.<ext> / <name>_TEST.<ext> with ext in {tsv, ts}; both
// splits end up with a shared class encoding and a common width.
std::pair<TimeSeriesDataset, TimeSeriesDataset> load_pair(const std::filesystem::path& dir,
                                                          const std::string& name,
                                                          const LoadOptions& opts = {});

std::string to_tsv(const TimeSeriesDataset& dataset);
std::string to_ts(const TimeSeriesDataset& dataset);

// [B, D, W] batch for the given sample indices.
Tensor batch_tensor(const TimeSeriesDataset& dataset, const std::vector<int>& indices);
std::vector<int> batch_labels(const TimeSeriesDataset& dataset, const std::vector<int>& indices);

// FNV-1a over the dataset's structure and raw values; variants sharing a data
// pipeline must agree on it.
std::string dataset_fingerprint(const TimeSeriesDataset& train, const TimeSeriesDataset& test);

}  // namespace adafsnet
