#pragma once

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "saflab/codec.hpp"
#include "saflab/data.hpp"
#include "saflab/errors.hpp"
#include "saflab/injector.hpp"
#include "saflab/network.hpp"
#include "saflab/optim.hpp"
#include "saflab/tensor.hpp"

namespace saflab {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

// Argmax with ties (and NaN-poisoned rows) resolved to the lowest index.
inline int argmax_class(const float* logits, int64_t classes) {
    int best = 0;
    for (int64_t j = 1; j < classes; ++j) {
        if (logits[j] > logits[best]) best = static_cast<int>(j);
    }
    return best;
}

// Top-1 accuracy in percent over the first `subset` samples (0 = all).
inline float top1(const Model& model, const Dataset& ds, int64_t subset = 0,
                  int64_t batch_size = 256) {
    const int64_t n = subset > 0 ? std::min(subset, ds.size()) : ds.size();
    require(n >= 1, ErrorCategory::input, "empty evaluation set");
    const int64_t per = ds.images.numel() / ds.size();
    int64_t correct = 0;
    std::vector<int64_t> shape = ds.images.shape;
    for (int64_t from = 0; from < n; from += batch_size) {
        const int64_t count = std::min(batch_size, n - from);
        shape[0] = count;
        Tensor batch(shape);
        std::copy(ds.images.data.begin() + static_cast<size_t>(from * per),
                  ds.images.data.begin() + static_cast<size_t>((from + count) * per),
                  batch.data.begin());
        const Tensor logits = forward(model, batch);
        for (int64_t i = 0; i < count; ++i) {
            const int pred = argmax_class(&logits.data[static_cast<size_t>(i * model.class_count)],
                                          model.class_count);
            if (pred == ds.labels[static_cast<size_t>(from + i)]) ++correct;
        }
    }
    return 100.0f * static_cast<float>(correct) / static_cast<float>(n);
}

// ---------------------------------------------------------------------------
// Monte Carlo campaigns
// ---------------------------------------------------------------------------

struct Campaign {
    StoredDType dtype = StoredDType::fp32;
    std::vector<double> bers;
    int rounds = 100;
    uint64_t seed = 0;
    int64_t subset = 0;  // 0 = full test split; always recorded in the manifest
    int workers = 1;

    void validate() const {
        require(rounds >= 1, ErrorCategory::input, "rounds must be >= 1");
        require(!bers.empty(), ErrorCategory::input, "at least one BER required");
        for (double b : bers) {
            require(b >= 0.0 && b <= 1.0, ErrorCategory::input, "BER must be in [0,1]");
        }
        require(workers >= 1, ErrorCategory::input, "workers must be >= 1");
    }
};

struct BerResult {
    double ber = 0.0;
    float clean_top1 = 0.0f;          // top-1 at BER 0 through the same dtype
    std::vector<float> round_top1;    // one entry per round
    std::vector<int64_t> flip_counts;
    float mean = 0.0f;
    float stddev = 0.0f;              // population formula (divide by n)
    double mean_flip_count = 0.0;
};

struct DegradationReport {
    float clean_top1 = 0.0f;  // same-dtype, fault-free baseline
    std::vector<BerResult> per_ber;
};

inline void finalize_stats(BerResult& r) {
    double s = 0.0;
    for (float v : r.round_top1) s += v;
    const double n = static_cast<double>(r.round_top1.size());
    const double mean = s / n;
    double sq = 0.0;
    for (float v : r.round_top1) sq += (v - mean) * (v - mean);
    r.mean = static_cast<float>(mean);
    r.stddev = static_cast<float>(std::sqrt(sq / n));
    double f = 0.0;
    for (int64_t c : r.flip_counts) f += static_cast<double>(c);
    r.mean_flip_count = f / n;
}

// Runs the protocol: evaluate the fault-free baseline once, then for each BER
// and each round r, read the model through (dtype, ber, seed, r) and score
// top-1 on the test split. Rounds are independent and may run on `workers`
// threads; results are keyed by round index so the schedule cannot change
// the report.
inline DegradationReport run_campaign(const Model& model, const Dataset& test_set,
                                      const Campaign& c) {
    c.validate();
    DegradationReport report;
    {
        const Model quantized = read_deployed(model, c.dtype, FaultConfig{0.0, c.seed, 0});
        report.clean_top1 = top1(quantized, test_set, c.subset);
    }
    for (double ber : c.bers) {
        BerResult r;
        r.ber = ber;
        r.clean_top1 = report.clean_top1;
        r.round_top1.assign(static_cast<size_t>(c.rounds), 0.0f);
        r.flip_counts.assign(static_cast<size_t>(c.rounds), 0);
        std::atomic<int> next{0};
        auto worker = [&]() {
            for (;;) {
                const int round = next.fetch_add(1);
                if (round >= c.rounds) return;
                int64_t flips = 0;
                const Model faulty = read_deployed(
                    model, c.dtype, FaultConfig{ber, c.seed, static_cast<uint64_t>(round)},
                    &flips);
                r.round_top1[static_cast<size_t>(round)] = top1(faulty, test_set, c.subset);
                r.flip_counts[static_cast<size_t>(round)] = flips;
            }
        };
        if (c.workers <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < c.workers; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        finalize_stats(r);
        report.per_ber.push_back(std::move(r));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------
// Layout: 8-byte magic, u32 version, u64 header length, JSON header
// (architecture + free-form manifest), then per weighted layer the raw FP32
// weights and bias as tagged little-endian bit buffers. Stored weights are
// always raw (pre-transform).

inline constexpr char kCheckpointMagic[8] = {'S', 'A', 'F', 'L', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kCheckpointVersion = 1;

inline json architecture_json(const Model& m) {
    json arch;
    arch["name"] = m.arch_name;
    arch["class_count"] = m.class_count;
    arch["input_shape"] = m.input_shape;
    arch["layers"] = json::array();
    for (const Layer& l : m.layers) {
        json lj;
        lj["kind"] = layer_kind_name(l.kind);
        if (l.has_params()) {
            lj["saf"] = saf_name(l.saf);
            lj["weight_shape"] = l.weights.shape;
            lj["bias_shape"] = l.bias.shape;
            if (l.kind == LayerKind::conv2d) lj["stride"] = l.stride;
        }
        arch["layers"].push_back(lj);
    }
    return arch;
}

inline void save_checkpoint(const Model& m, const json& manifest,
                            const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), ErrorCategory::io, "cannot write checkpoint " + path.string());
    json header;
    header["arch"] = architecture_json(m);
    header["manifest"] = manifest;
    const std::string hs = header.dump();
    os.write(kCheckpointMagic, 8);
    const uint32_t ver = kCheckpointVersion;
    for (int i = 0; i < 4; ++i) os.put(static_cast<char>((ver >> (8 * i)) & 0xFF));
    const auto hl = static_cast<uint64_t>(hs.size());
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((hl >> (8 * i)) & 0xFF));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const Layer& l : m.layers) {
        if (!l.has_params()) continue;
        serialize(encode(l.weights, StoredDType::fp32), os);
        serialize(encode(l.bias, StoredDType::fp32), os);
    }
    require(os.good(), ErrorCategory::io, "short write on checkpoint " + path.string());
}

inline Model load_checkpoint(const std::filesystem::path& path, json* manifest_out = nullptr) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), ErrorCategory::io, "cannot open checkpoint " + path.string());
    char magic[8] = {};
    is.read(magic, 8);
    require(is.gcount() == 8 && std::equal(magic, magic + 8, kCheckpointMagic),
            ErrorCategory::format, path.string() + ": bad checkpoint magic");
    uint32_t ver = 0;
    for (int i = 0; i < 4; ++i) {
        const int ch = is.get();
        require(ch >= 0, ErrorCategory::format, "truncated checkpoint version");
        ver |= static_cast<uint32_t>(ch) << (8 * i);
    }
    require(ver == kCheckpointVersion, ErrorCategory::format,
            path.string() + ": unsupported checkpoint version " + std::to_string(ver));
    uint64_t hl = 0;
    for (int i = 0; i < 8; ++i) {
        const int ch = is.get();
        require(ch >= 0, ErrorCategory::format, "truncated checkpoint header length");
        hl |= static_cast<uint64_t>(ch) << (8 * i);
    }
    std::string hs(hl, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(hl));
    require(static_cast<uint64_t>(is.gcount()) == hl, ErrorCategory::format,
            "truncated checkpoint header");
    json header;
    try {
        header = json::parse(hs);
    } catch (const json::exception& e) {
        fail(ErrorCategory::format, path.string() + ": bad checkpoint header: " + e.what());
    }

    Model m;
    const json& arch = header.at("arch");
    m.arch_name = arch.value("name", "custom");
    m.class_count = arch.at("class_count").get<int64_t>();
    m.input_shape = arch.at("input_shape").get<std::vector<int64_t>>();
    for (const json& lj : arch.at("layers")) {
        Layer l;
        l.kind = parse_layer_kind(lj.at("kind").get<std::string>());
        if (l.kind == LayerKind::dense || l.kind == LayerKind::conv2d) {
            l.saf = parse_saf(lj.at("saf").get<std::string>());
            const auto wshape = lj.at("weight_shape").get<std::vector<int64_t>>();
            const auto bshape = lj.at("bias_shape").get<std::vector<int64_t>>();
            if (l.kind == LayerKind::conv2d) l.stride = lj.value("stride", 1);
            BitBuffer wb = deserialize_bitbuffer(is);
            require(wb.dtype == StoredDType::fp32 && wb.count == Tensor::numel_of(wshape),
                    ErrorCategory::format, "checkpoint weight payload mismatch");
            l.weights = decode(wb).reshaped(wshape);
            BitBuffer bb = deserialize_bitbuffer(is);
            require(bb.dtype == StoredDType::fp32 && bb.count == Tensor::numel_of(bshape),
                    ErrorCategory::format, "checkpoint bias payload mismatch");
            l.bias = decode(bb).reshaped(bshape);
        }
        m.layers.push_back(std::move(l));
    }
    if (manifest_out) *manifest_out = header.value("manifest", json::object());
    return m;
}

// ---------------------------------------------------------------------------
// Sweep emission: results.csv / summary.csv / manifest.json
// ---------------------------------------------------------------------------

// Shortest round-trip decimal ('.' decimal point, locale-free).
inline std::string format_float(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_float(float v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct SweepMeta {
    std::string dataset;
    std::string arch;
    std::string saf;
    json manifest_extra;  // replay config and provenance, free form
};

// Writes results.csv (one row per (ber, round)), summary.csv (one row per
// ber), and manifest.json (everything needed to replay). UTF-8, LF line
// endings, header rows.
inline void sweep_and_emit(const DegradationReport& report, const Campaign& c,
                           const SweepMeta& meta, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const auto results_path = out_dir / "results.csv";
    const auto summary_path = out_dir / "summary.csv";
    const auto manifest_path = out_dir / "manifest.json";

    {
        std::ofstream os(results_path, std::ios::binary);
        require(os.good(), ErrorCategory::io, "cannot write " + results_path.string());
        os << "dataset,arch,saf,dtype,ber,round,top1,flip_count\n";
        for (const BerResult& r : report.per_ber) {
            for (size_t round = 0; round < r.round_top1.size(); ++round) {
                os << meta.dataset << ',' << meta.arch << ',' << meta.saf << ','
                   << dtype_name(c.dtype) << ',' << format_float(r.ber) << ',' << round << ','
                   << format_float(r.round_top1[round]) << ',' << r.flip_counts[round] << '\n';
            }
        }
        require(os.good(), ErrorCategory::io, "short write on " + results_path.string());
    }
    {
        std::ofstream os(summary_path, std::ios::binary);
        require(os.good(), ErrorCategory::io, "cannot write " + summary_path.string());
        os << "dataset,arch,saf,dtype,ber,clean_top1,mean_top1,std_top1,mean_flip_count\n";
        for (const BerResult& r : report.per_ber) {
            os << meta.dataset << ',' << meta.arch << ',' << meta.saf << ','
               << dtype_name(c.dtype) << ',' << format_float(r.ber) << ','
               << format_float(r.clean_top1) << ',' << format_float(r.mean) << ','
               << format_float(r.stddev) << ',' << format_float(r.mean_flip_count) << '\n';
        }
        require(os.good(), ErrorCategory::io, "short write on " + summary_path.string());
    }
    {
        json manifest = meta.manifest_extra;
        manifest["dataset"] = meta.dataset;
        manifest["arch"] = meta.arch;
        manifest["saf"] = meta.saf;
        manifest["dtype"] = dtype_name(c.dtype);
        manifest["ber"] = c.bers;
        manifest["rounds"] = c.rounds;
        manifest["seed"] = c.seed;
        manifest["subset"] = c.subset;
        manifest["workers"] = c.workers;
        manifest["std_formula"] = "population";
        manifest["results"] = "results.csv";
        manifest["summary"] = "summary.csv";
        std::ofstream os(manifest_path, std::ios::binary);
        require(os.good(), ErrorCategory::io, "cannot write " + manifest_path.string());
        os << manifest.dump(2) << '\n';
        require(os.good(), ErrorCategory::io, "short write on " + manifest_path.string());
    }
}

}  // namespace saflab
