#include "sca/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace sca {

namespace {

std::vector<std::string> parse_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

std::optional<double> parse_double(const std::string& s) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    while (begin != end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
    while (end != begin && std::isspace(static_cast<unsigned char>(end[-1]))) --end;
    if (begin == end) return std::nullopt;
    double v = 0.0;
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end) return std::nullopt;
    return v;
}

double median_of(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
        return 0.5 * (v[mid - 1] + hi);
    }
    return hi;
}

}  // namespace

Schema Schema::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("schema file not readable: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("schema parse error in " + path + ": " + e.what());
    }
    Schema s;
    if (!j.contains("time") || !j.contains("event"))
        throw DataError("schema must name 'time' and 'event' columns");
    s.time_column = j["time"].get<std::string>();
    s.event_column = j["event"].get<std::string>();
    if (j.contains("categorical")) s.categorical = j["categorical"].get<std::vector<std::string>>();
    if (j.contains("drop")) s.drop = j["drop"].get<std::vector<std::string>>();
    return s;
}

RawTable load_csv(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("data file not readable: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file: " + path);
    const std::vector<std::string> header = parse_csv_line(line);

    std::ptrdiff_t time_idx = -1, event_idx = -1;
    std::vector<std::size_t> cov_idx;
    RawTable table;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& name = header[i];
        if (name == schema.time_column) {
            time_idx = static_cast<std::ptrdiff_t>(i);
        } else if (name == schema.event_column) {
            event_idx = static_cast<std::ptrdiff_t>(i);
        } else if (std::find(schema.drop.begin(), schema.drop.end(), name) == schema.drop.end()) {
            cov_idx.push_back(i);
            table.columns.push_back(name);
            const bool cat = std::find(schema.categorical.begin(), schema.categorical.end(),
                                       name) != schema.categorical.end();
            table.kinds.push_back(cat ? ColumnKind::Categorical : ColumnKind::Continuous);
        }
    }
    if (time_idx < 0) throw DataError("missing time column '" + schema.time_column + "'");
    if (event_idx < 0) throw DataError("missing event column '" + schema.event_column + "'");

    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        std::vector<std::string> fields = parse_csv_line(line);
        fields.resize(header.size());

        const auto tv = parse_double(fields[static_cast<std::size_t>(time_idx)]);
        const auto ev = parse_double(fields[static_cast<std::size_t>(event_idx)]);
        if (ev && *ev != 0.0 && *ev != 1.0)
            throw DataError("row " + std::to_string(row_no) + ": event value outside {0,1}");

        table.time.push_back(tv ? *tv : -1.0);  // missing time flagged non-positive
        table.event.push_back(ev && *ev == 1.0 ? 1 : 0);
        if (!ev) table.time.back() = -1.0;      // missing event drops the row too

        std::vector<std::string> row;
        row.reserve(cov_idx.size());
        for (std::size_t c : cov_idx) {
            std::string cell = fields[c];
            if (table.kinds[row.size()] == ColumnKind::Continuous && !parse_double(cell))
                cell.clear();  // unparseable becomes missing
            row.push_back(std::move(cell));
        }
        table.cells.push_back(std::move(row));
    }
    if (table.n_rows() == 0) throw DataError("no data rows in " + path);
    return table;
}

std::vector<Split> split_labels(const std::vector<std::uint8_t>& events, std::uint64_t seed) {
    const std::size_t n = events.size();
    if (n < 10) throw DataError("split: need at least 10 rows");
    Rng rng(seed);

    std::vector<std::size_t> observed, censored;
    for (std::size_t i = 0; i < n; ++i) (events[i] ? observed : censored).push_back(i);

    std::vector<Split> out(n, Split::Train);
    const bool stratify = observed.size() >= 10 && censored.size() >= 10;
    auto assign_group = [&](std::vector<std::size_t>& idx) {
        std::shuffle(idx.begin(), idx.end(), rng.engine());
        const std::size_t n_test = idx.size() / 10;
        const std::size_t n_val = idx.size() / 10;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (i < n_test)
                out[idx[i]] = Split::Test;
            else if (i < n_test + n_val)
                out[idx[i]] = Split::Val;
        }
    };
    if (stratify) {
        assign_group(observed);
        assign_group(censored);
    } else {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        assign_group(all);
    }
    return out;
}

Dataset preprocess(const RawTable& table, const std::vector<Split>& split) {
    if (split.size() != table.n_rows()) throw DataError("preprocess: split length mismatch");

    // rows surviving the t > 0 filter
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < table.n_rows(); ++i)
        if (table.time[i] > 0.0) keep.push_back(i);
    if (keep.empty()) throw DataError("preprocess: no rows with positive time");

    std::vector<ColumnTransform> manifest;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        ColumnTransform tf;
        tf.name = table.columns[c];
        tf.kind = table.kinds[c];
        if (tf.kind == ColumnKind::Continuous) {
            std::vector<double> train_vals;
            for (std::size_t i : keep)
                if (split[i] == Split::Train)
                    if (auto v = parse_double(table.cells[i][c])) train_vals.push_back(*v);
            if (train_vals.empty())
                throw DataError("column '" + tf.name + "' has no usable training values");
            tf.impute_value = median_of(train_vals);
            double mean = 0.0;
            for (double v : train_vals) mean += v;
            mean /= static_cast<double>(train_vals.size());
            double var = 0.0;
            for (double v : train_vals) var += (v - mean) * (v - mean);
            var /= static_cast<double>(train_vals.size());
            tf.mean = mean;
            tf.stddev = var > 0.0 ? std::sqrt(var) : 1.0;
        } else {
            std::map<std::string, std::size_t> counts;
            for (std::size_t i : keep)
                if (split[i] == Split::Train && !table.cells[i][c].empty())
                    ++counts[table.cells[i][c]];
            if (counts.empty())
                throw DataError("column '" + tf.name + "' has no usable training values");
            tf.impute_category = counts.begin()->first;
            for (const auto& [cat, cnt] : counts) {
                tf.categories.push_back(cat);
                if (cnt > counts[tf.impute_category]) tf.impute_category = cat;
            }
        }
        manifest.push_back(std::move(tf));
    }

    std::size_t width = 0;
    for (const auto& tf : manifest)
        width += tf.kind == ColumnKind::Continuous ? 1 : tf.categories.size();

    Dataset data;
    data.manifest = manifest;
    data.dropped_rows = table.n_rows() - keep.size();
    data.x = Tensor2(keep.size(), width);
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const std::size_t i = keep[r];
        const std::vector<double> feat = apply_manifest(manifest, table.cells[i]);
        std::copy(feat.begin(), feat.end(), data.x.row(r).begin());
        data.t.push_back(table.time[i]);
        data.l.push_back(table.event[i]);
        data.split.push_back(split[i]);
    }
    return data;
}

std::vector<double> apply_manifest(const std::vector<ColumnTransform>& manifest,
                                   const std::vector<std::string>& raw_row) {
    if (raw_row.size() != manifest.size()) throw DataError("apply_manifest: row width mismatch");
    std::vector<double> out;
    for (std::size_t c = 0; c < manifest.size(); ++c) {
        const ColumnTransform& tf = manifest[c];
        if (tf.kind == ColumnKind::Continuous) {
            const auto v = parse_double(raw_row[c]);
            out.push_back(((v ? *v : tf.impute_value) - tf.mean) / tf.stddev);
        } else {
            const std::string& cat = raw_row[c].empty() ? tf.impute_category : raw_row[c];
            for (const std::string& known : tf.categories)
                out.push_back(known == cat ? 1.0 : 0.0);
        }
    }
    return out;
}

Dataset build_dataset(const std::string& csv_path, const Schema& schema, std::uint64_t seed) {
    const RawTable table = load_csv(csv_path, schema);
    // Split on the kept rows only, then map back to full-table labels.
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < table.n_rows(); ++i)
        if (table.time[i] > 0.0) keep.push_back(i);
    if (keep.size() < 10) throw DataError("build_dataset: too few usable rows");
    std::vector<std::uint8_t> kept_events;
    for (std::size_t i : keep) kept_events.push_back(table.event[i]);
    const std::vector<Split> kept_split = split_labels(kept_events, seed);
    std::vector<Split> full(table.n_rows(), Split::Train);
    for (std::size_t r = 0; r < keep.size(); ++r) full[keep[r]] = kept_split[r];
    return preprocess(table, full);
}

Dataset synth_generate(std::size_t n_per_cluster, std::size_t n_clusters, std::uint64_t seed) {
    if (n_clusters < 2) throw DataError("synth_generate: need at least 2 clusters");
    constexpr std::size_t kDim = 10;
    constexpr double kSeparation = 4.0;
    constexpr double kShape = 2.0;
    constexpr double kCensorTarget = 0.30;

    Rng rng(seed);
    const std::size_t n = n_per_cluster * n_clusters;
    Dataset data;
    data.x = Tensor2(n, kDim);
    data.t.resize(n);
    data.l.resize(n);
    data.true_labels.resize(n);

    std::vector<double> event_time(n);
    std::size_t row = 0;
    for (std::size_t k = 0; k < n_clusters; ++k) {
        const double scale =
            std::pow(10.0, static_cast<double>(k) / static_cast<double>(n_clusters - 1));
        // Cluster means sit on a single risk axis, so unsupervised feature
        // clustering cannot trivially recover the survival structure once the
        // covariates are standardized.
        const double mean0 = kSeparation * static_cast<double>(k);
        for (std::size_t i = 0; i < n_per_cluster; ++i, ++row) {
            data.x(row, 0) = mean0 + rng.normal();
            for (std::size_t j = 1; j < kDim; ++j) data.x(row, j) = rng.normal();
            // Weibull(shape, scale) via inverse CDF
            const double u = std::max(rng.uniform(), 1e-300);
            event_time[row] = scale * std::pow(-std::log(u), 1.0 / kShape);
            data.true_labels[row] = k;
        }
    }

    // z-score the covariates, mirroring the CSV preprocessing convention
    for (std::size_t j = 0; j < kDim; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += data.x(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = data.x(i, j) - mean;
            var += d * d;
        }
        const double stddev = std::sqrt(var / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) data.x(i, j) = (data.x(i, j) - mean) / stddev;
    }

    // Uniform(0, c_max) censoring; pick c_max so the expected censored
    // fraction hits the target: P(C < T) = min(T/c_max, 1) averaged over T.
    auto censor_fraction = [&](double c_max) {
        double f = 0.0;
        for (double t : event_time) f += std::min(t / c_max, 1.0);
        return f / static_cast<double>(n);
    };
    double lo = 1e-6, hi = 1e6;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (censor_fraction(mid) > kCensorTarget ? lo : hi) = mid;
    }
    const double c_max = 0.5 * (lo + hi);

    for (std::size_t i = 0; i < n; ++i) {
        const double c = rng.uniform(0.0, c_max);
        if (c < event_time[i]) {
            data.t[i] = c;
            data.l[i] = 0;
        } else {
            data.t[i] = event_time[i];
            data.l[i] = 1;
        }
    }
    data.split = split_labels(data.l, rng.fork_seed());
    return data;
}

Batch Dataset::subset(Split s) const {
    const std::vector<std::size_t> idx = indices(s);
    Batch b;
    b.x = Tensor2(idx.size(), x.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        auto src = x.row(idx[r]);
        std::copy(src.begin(), src.end(), b.x.row(r).begin());
        b.t.push_back(t[idx[r]]);
        b.l.push_back(l[idx[r]]);
    }
    return b;
}

std::vector<std::size_t> Dataset::indices(Split s) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) idx.push_back(i);
    return idx;
}

std::uint64_t dataset_fingerprint(const Dataset& data) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    auto mix = [&h](const void* p, std::size_t bytes) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    mix(data.x.data.data(), data.x.data.size() * sizeof(double));
    mix(data.t.data(), data.t.size() * sizeof(double));
    mix(data.l.data(), data.l.size());
    return h;
}

}  // namespace sca
