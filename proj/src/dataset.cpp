#include "adafsnet/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "adafsnet/error.hpp"

namespace adafsnet {

namespace {

struct RawSample {
    std::string label;
    std::vector<std::vector<double>> dims;  // [D][length], pre-padding
    int line = 0;
};

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (end == text.size()) break;
        start = end + 1;
    }
    return lines;
}

std::vector<std::string_view> split_on(std::string_view line, char sep) {
    std::vector<std::string_view> tokens;
    std::size_t start = 0;
    while (start <= line.size()) {
        std::size_t end = line.find(sep, start);
        if (end == std::string_view::npos) end = line.size();
        tokens.push_back(line.substr(start, end - start));
        if (end == line.size()) break;
        start = end + 1;
    }
    return tokens;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_missing_token(std::string_view tok) {
    if (tok == "?") return true;
    if (tok.size() != 3) return false;
    return (tok[0] == 'n' || tok[0] == 'N') && (tok[1] == 'a' || tok[1] == 'A') &&
           (tok[2] == 'n' || tok[2] == 'N');
}

double parse_value(std::string_view tok, int line, int column) {
    const std::string s(trim(tok));
    if (s.empty()) {
        throw DataError("parse: empty value at line " + std::to_string(line) + ", column " +
                        std::to_string(column));
    }
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) {
        throw DataError("parse: non-numeric value '" + s + "' at line " + std::to_string(line) +
                        ", column " + std::to_string(column));
    }
    return v;
}

// Linear in-fill of NaN runs; edge runs copy the nearest finite value.
void interpolate_series(std::vector<double>& v, int line) {
    const int n = static_cast<int>(v.size());
    int first = -1;
    for (int i = 0; i < n; ++i) {
        if (!std::isnan(v[static_cast<std::size_t>(i)])) {
            first = i;
            break;
        }
    }
    if (first < 0) {
        throw DataError("parse: series at line " + std::to_string(line) + " has no finite values");
    }
    for (int i = 0; i < first; ++i) v[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(first)];
    int last_known = first;
    for (int i = first + 1; i < n; ++i) {
        if (std::isnan(v[static_cast<std::size_t>(i)])) continue;
        if (i > last_known + 1) {
            const double lo = v[static_cast<std::size_t>(last_known)];
            const double hi = v[static_cast<std::size_t>(i)];
            const int span = i - last_known;
            for (int j = last_known + 1; j < i; ++j) {
                v[static_cast<std::size_t>(j)] = lo + (hi - lo) * (j - last_known) / span;
            }
        }
        last_known = i;
    }
    for (int i = last_known + 1; i < n; ++i) {
        v[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(last_known)];
    }
}

void check_missing(std::vector<double>& v, bool interpolate, int line) {
    bool has_nan = false;
    for (double x : v) has_nan = has_nan || std::isnan(x);
    if (!has_nan) return;
    if (!interpolate) {
        throw DataError("parse: missing value (NaN) at line " + std::to_string(line) +
                        "; rerun with missing-value interpolation enabled to in-fill");
    }
    interpolate_series(v, line);
}

TimeSeriesDataset assemble(std::string name, std::vector<RawSample> raw, int dims,
                           const LoadOptions& opts) {
    if (raw.empty()) throw DataError("parse: no samples found");

    std::vector<std::string> labels;
    labels.reserve(raw.size());
    for (const RawSample& r : raw) labels.push_back(r.label);
    TimeSeriesDataset out;
    out.name = std::move(name);
    out.dims = dims;
    out.class_names = encode_labels(labels);

    std::map<std::string, int> index;
    for (std::size_t i = 0; i < out.class_names.size(); ++i) {
        index[out.class_names[i]] = static_cast<int>(i);
    }

    int width = 0;
    for (const RawSample& r : raw) {
        for (const auto& dim : r.dims) width = std::max(width, static_cast<int>(dim.size()));
    }

    out.width = width;
    out.samples.reserve(raw.size());
    for (RawSample& r : raw) {
        Sample s;
        s.label = index.at(r.label);
        s.constant_dims.assign(static_cast<std::size_t>(dims), 0);
        s.values.assign(static_cast<std::size_t>(dims) * width, 0.0);
        for (int d = 0; d < dims; ++d) {
            std::vector<double>& series = r.dims[static_cast<std::size_t>(d)];
            if (opts.normalize) {
                s.constant_dims[static_cast<std::size_t>(d)] = znormalize(series) ? 1 : 0;
            }
            std::copy(series.begin(), series.end(),
                      s.values.begin() + static_cast<std::ptrdiff_t>(d) * width);
        }
        out.samples.push_back(std::move(s));
    }
    return out;
}

}  // namespace

bool znormalize(std::vector<double>& series) {
    if (series.empty()) return true;
    const double n = static_cast<double>(series.size());
    double mean = 0;
    for (double v : series) mean += v;
    mean /= n;
    double var = 0;
    for (double v : series) var += (v - mean) * (v - mean);
    var /= n;
    const double sd = std::sqrt(var);
    if (sd < 1e-8) {
        std::fill(series.begin(), series.end(), 0.0);
        return true;
    }
    for (double& v : series) v = (v - mean) / sd;
    return false;
}

std::vector<std::string> encode_labels(const std::vector<std::string>& raw) {
    if (raw.empty()) throw DataError("encode_labels: no labels");
    std::set<std::string> unique(raw.begin(), raw.end());
    return {unique.begin(), unique.end()};
}

void pad_to_length(TimeSeriesDataset& dataset, int width) {
    if (width < dataset.width) {
        throw DataError("pad_to_length: target width " + std::to_string(width) +
                        " below current width " + std::to_string(dataset.width));
    }
    if (width == dataset.width) return;
    for (Sample& s : dataset.samples) {
        std::vector<double> padded(static_cast<std::size_t>(dataset.dims) * width, 0.0);
        for (int d = 0; d < dataset.dims; ++d) {
            std::copy(s.values.begin() + static_cast<std::ptrdiff_t>(d) * dataset.width,
                      s.values.begin() + static_cast<std::ptrdiff_t>(d + 1) * dataset.width,
                      padded.begin() + static_cast<std::ptrdiff_t>(d) * width);
        }
        s.values = std::move(padded);
    }
    dataset.width = width;
}

TimeSeriesDataset parse_ucr_tsv(std::string_view text, const LoadOptions& opts) {
    std::vector<RawSample> raw;
    int expected_width = -1;
    const auto lines = split_lines(text);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::string_view line = trim(lines[li]);
        if (line.empty()) continue;
        const int line_no = static_cast<int>(li) + 1;
        const char sep = line.find('\t') != std::string_view::npos ? '\t' : ',';
        const auto tokens = split_on(line, sep);
        if (tokens.size() < 2) {
            throw DataError("parse: line " + std::to_string(line_no) +
                            " has a label but no values");
        }
        RawSample r;
        r.line = line_no;
        r.label = std::string(trim(tokens[0]));
        if (r.label.empty()) {
            throw DataError("parse: empty label at line " + std::to_string(line_no));
        }
        std::vector<double> series;
        series.reserve(tokens.size() - 1);
        for (std::size_t t = 1; t < tokens.size(); ++t) {
            const std::string_view tok = trim(tokens[t]);
            if (is_missing_token(tok)) {
                series.push_back(std::numeric_limits<double>::quiet_NaN());
            } else {
                series.push_back(parse_value(tok, line_no, static_cast<int>(t) + 1));
            }
        }
        check_missing(series, opts.interpolate_missing, line_no);
        const int width = static_cast<int>(series.size());
        if (expected_width < 0) {
            expected_width = width;
        } else if (width != expected_width) {
            throw DataError("parse: line " + std::to_string(line_no) + " has " +
                            std::to_string(width) + " values, expected " +
                            std::to_string(expected_width));
        }
        r.dims.push_back(std::move(series));
        raw.push_back(std::move(r));
    }
    return assemble("", std::move(raw), 1, opts);
}

TimeSeriesDataset parse_ts(std::string_view text, const LoadOptions& opts) {
    std::string problem_name;
    bool univariate = true, saw_univariate = false;
    bool has_labels = false;
    std::vector<std::string> declared_labels;
    bool in_data = false;

    std::vector<RawSample> raw;
    int dims = -1;

    const auto lines = split_lines(text);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::string_view line = trim(lines[li]);
        const int line_no = static_cast<int>(li) + 1;
        if (line.empty() || line.front() == '#') continue;
        if (!in_data && line.front() == '@') {
            const std::size_t sp = line.find_first_of(" \t");
            const std::string_view directive = line.substr(0, sp);
            const std::string_view rest = sp == std::string_view::npos ? "" : trim(line.substr(sp));
            if (directive == "@problemName") {
                problem_name = std::string(rest);
            } else if (directive == "@univariate") {
                saw_univariate = true;
                univariate = rest == "true";
            } else if (directive == "@classLabel") {
                auto fields = split_on(rest, ' ');
                std::erase_if(fields, [](std::string_view f) { return trim(f).empty(); });
                if (fields.empty()) {
                    throw DataError("parse: @classLabel needs true|false at line " +
                                    std::to_string(line_no));
                }
                has_labels = trim(fields[0]) == "true";
                for (std::size_t i = 1; i < fields.size(); ++i) {
                    declared_labels.emplace_back(trim(fields[i]));
                }
            } else if (directive == "@data") {
                in_data = true;
            }
            // other directives (@seriesLength, @equalLength, ...) carry no
            // information we cannot recover from the data itself
            continue;
        }
        if (!in_data) {
            throw DataError("parse: series data before @data at line " + std::to_string(line_no));
        }
        if (!has_labels) {
            throw DataError("parse: @classLabel false/missing; labeled data required");
        }
        auto fields = split_on(line, ':');
        if (fields.size() < 2) {
            throw DataError("parse: line " + std::to_string(line_no) +
                            " has no ':' separated label field");
        }
        RawSample r;
        r.line = line_no;
        r.label = std::string(trim(fields.back()));
        if (std::find(declared_labels.begin(), declared_labels.end(), r.label) ==
            declared_labels.end()) {
            throw DataError("parse: label '" + r.label + "' at line " + std::to_string(line_no) +
                            " not declared in @classLabel");
        }
        const int d = static_cast<int>(fields.size()) - 1;
        if (dims < 0) {
            dims = d;
            if (saw_univariate && univariate && dims != 1) {
                throw DataError("parse: @univariate true but line " + std::to_string(line_no) +
                                " has " + std::to_string(dims) + " dimensions");
            }
        } else if (d != dims) {
            throw DataError("parse: line " + std::to_string(line_no) + " has " + std::to_string(d) +
                            " dimensions, expected " + std::to_string(dims));
        }
        for (int dim = 0; dim < d; ++dim) {
            const auto tokens = split_on(fields[static_cast<std::size_t>(dim)], ',');
            std::vector<double> series;
            series.reserve(tokens.size());
            for (std::size_t t = 0; t < tokens.size(); ++t) {
                const std::string_view tok = trim(tokens[t]);
                if (is_missing_token(tok)) {
                    series.push_back(std::numeric_limits<double>::quiet_NaN());
                } else {
                    series.push_back(parse_value(tok, line_no, static_cast<int>(t) + 1));
                }
            }
            check_missing(series, opts.interpolate_missing, line_no);
            r.dims.push_back(std::move(series));
        }
        raw.push_back(std::move(r));
    }
    if (!in_data) throw DataError("parse: missing @data directive");
    if (raw.empty()) throw DataError("parse: no samples after @data");
    return assemble(std::move(problem_name), std::move(raw), dims, opts);
}

namespace {

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

TimeSeriesDataset load_file(const std::filesystem::path& file, const LoadOptions& opts) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("load: cannot open " + file.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    if (file.extension() == ".ts") return parse_ts(text, opts);
    return parse_ucr_tsv(text, opts);
}

// Re-encodes with the union class list and pads both splits to one width.
void unify_pair(TimeSeriesDataset& train, TimeSeriesDataset& test) {
    std::vector<std::string> all = train.class_names;
    all.insert(all.end(), test.class_names.begin(), test.class_names.end());
    const std::vector<std::string> unified = encode_labels(all);
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < unified.size(); ++i) index[unified[i]] = static_cast<int>(i);

    for (TimeSeriesDataset* ds : {&train, &test}) {
        for (Sample& s : ds->samples) {
            s.label = index.at(ds->class_names[static_cast<std::size_t>(s.label)]);
        }
        ds->class_names = unified;
    }
    const int width = std::max(train.width, test.width);
    pad_to_length(train, width);
    pad_to_length(test, width);
    if (train.dims != test.dims) {
        throw DataError("load: train has " + std::to_string(train.dims) + " dimensions, test has " +
                        std::to_string(test.dims));
    }
}

}  // namespace

std::pair<TimeSeriesDataset, TimeSeriesDataset> load_pair(const std::filesystem::path& dir,
                                                          const std::string& name,
                                                          const LoadOptions& opts) {
    namespace fs = std::filesystem;
    const fs::path tsv_train = dir / (name + "_TRAIN.tsv");
    const fs::path tsv_test = dir / (name + "_TEST.tsv");
    const fs::path ts_train = dir / (name + "_TRAIN.ts");
    const fs::path ts_test = dir / (name + "_TEST.ts");

    const bool tsv = fs::exists(tsv_train) || fs::exists(tsv_test);
    const bool ts = fs::exists(ts_train) || fs::exists(ts_test);
    if (tsv && ts) {
        throw DataError("load: both .tsv and .ts files present for '" + name +
                        "'; formats must match");
    }
    if (!tsv && !ts) {
        throw DataError("load: no dataset files for '" + name + "' under " + dir.string() +
                        " (expected " + (name + "_TRAIN.tsv/.ts") + ")");
    }
    const fs::path train_file = tsv ? tsv_train : ts_train;
    const fs::path test_file = tsv ? tsv_test : ts_test;
    if (!fs::exists(train_file)) throw DataError("load: missing " + train_file.string());
    if (!fs::exists(test_file)) throw DataError("load: missing " + test_file.string());

    TimeSeriesDataset train = load_file(train_file, opts);
    TimeSeriesDataset test = load_file(test_file, opts);
    train.name = name;
    test.name = name;
    train.split = "train";
    test.split = "test";
    unify_pair(train, test);
    return {std::move(train), std::move(test)};
}

std::string to_tsv(const TimeSeriesDataset& dataset) {
    if (dataset.dims != 1) {
        throw DataError("to_tsv: univariate only; use to_ts for " + std::to_string(dataset.dims) +
                        " dimensions");
    }
    std::ostringstream out;
    for (const Sample& s : dataset.samples) {
        out << dataset.class_names[static_cast<std::size_t>(s.label)];
        for (double v : s.values) out << '\t' << format_value(v);
        out << '\n';
    }
    return out.str();
}

std::string to_ts(const TimeSeriesDataset& dataset) {
    std::ostringstream out;
    out << "@problemName " << (dataset.name.empty() ? "unnamed" : dataset.name) << '\n';
    out << "@univariate " << (dataset.dims == 1 ? "true" : "false") << '\n';
    out << "@classLabel true";
    for (const std::string& c : dataset.class_names) out << ' ' << c;
    out << '\n';
    out << "@data\n";
    for (const Sample& s : dataset.samples) {
        for (int d = 0; d < dataset.dims; ++d) {
            for (int w = 0; w < dataset.width; ++w) {
                if (w) out << ',';
                out << format_value(s.values[static_cast<std::size_t>(d) * dataset.width + w]);
            }
            out << ':';
        }
        out << dataset.class_names[static_cast<std::size_t>(s.label)] << '\n';
    }
    return out.str();
}

Tensor batch_tensor(const TimeSeriesDataset& dataset, const std::vector<int>& indices) {
    const int B = static_cast<int>(indices.size());
    const int D = dataset.dims, W = dataset.width;
    std::vector<real_t> values(static_cast<std::size_t>(B) * D * W);
    for (int b = 0; b < B; ++b) {
        const Sample& s = dataset.samples[static_cast<std::size_t>(indices[static_cast<std::size_t>(b)])];
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            values[static_cast<std::size_t>(b) * D * W + i] = static_cast<real_t>(s.values[i]);
        }
    }
    return Tensor::from_values({B, D, W}, std::move(values));
}

std::vector<int> batch_labels(const TimeSeriesDataset& dataset, const std::vector<int>& indices) {
    std::vector<int> labels;
    labels.reserve(indices.size());
    for (int i : indices) labels.push_back(dataset.samples[static_cast<std::size_t>(i)].label);
    return labels;
}

std::string dataset_fingerprint(const TimeSeriesDataset& train, const TimeSeriesDataset& test) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix_bytes = [&h](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    auto mix_dataset = [&](const TimeSeriesDataset& ds) {
        mix_bytes(ds.name.data(), ds.name.size());
        mix_bytes(&ds.width, sizeof(ds.width));
        mix_bytes(&ds.dims, sizeof(ds.dims));
        for (const std::string& c : ds.class_names) mix_bytes(c.data(), c.size());
        for (const Sample& s : ds.samples) {
            mix_bytes(&s.label, sizeof(s.label));
            mix_bytes(s.values.data(), s.values.size() * sizeof(double));
        }
    };
    mix_dataset(train);
    mix_dataset(test);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace adafsnet
