#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "saflab/errors.hpp"
#include "saflab/rng.hpp"
#include "saflab/tensor.hpp"

namespace saflab {

enum class Split { train, test };

struct Dataset {
    Tensor images;             // [N, C, H, W]
    std::vector<int> labels;   // length N, values in [0, class_count)
    int class_count = 0;
    std::string name = "unnamed";
    bool standardized = false;
    std::vector<float> norm_mean;  // per channel, set once standardize() runs
    std::vector<float> norm_std;

    int64_t size() const { return static_cast<int64_t>(labels.size()); }
    int64_t channels() const { return images.shape[1]; }
};

struct ChannelStats {
    std::vector<float> mean;
    std::vector<float> stddev;
};

// ---------------------------------------------------------------------------
// CIFAR-10 binary distribution: 3073-byte records, 1 label byte then 3072
// pixel bytes in R,G,B plane order, each plane 32x32 row-major.
// ---------------------------------------------------------------------------

namespace detail {

constexpr int64_t kCifarRecord = 3073;
constexpr int64_t kCifarPixels = 3072;

inline void load_cifar_file(const std::filesystem::path& file, Dataset& ds, int64_t& n) {
    std::ifstream is(file, std::ios::binary);
    require(is.good(), ErrorCategory::io, "cannot open " + file.string());
    is.seekg(0, std::ios::end);
    const int64_t bytes = static_cast<int64_t>(is.tellg());
    is.seekg(0);
    require(bytes % kCifarRecord == 0, ErrorCategory::format,
            file.string() + ": truncated record at byte offset " +
                std::to_string((bytes / kCifarRecord) * kCifarRecord));
    const int64_t records = bytes / kCifarRecord;
    std::vector<uint8_t> rec(static_cast<size_t>(kCifarRecord));
    for (int64_t r = 0; r < records; ++r, ++n) {
        is.read(reinterpret_cast<char*>(rec.data()), kCifarRecord);
        require(is.gcount() == kCifarRecord, ErrorCategory::format,
                file.string() + ": truncated record at byte offset " +
                    std::to_string(r * kCifarRecord));
        require(rec[0] < 10, ErrorCategory::format,
                file.string() + ": label byte " + std::to_string(rec[0]) + " out of range");
        ds.labels.push_back(static_cast<int>(rec[0]));
        float* dst = &ds.images.data[static_cast<size_t>(n * kCifarPixels)];
        for (int64_t i = 0; i < kCifarPixels; ++i) {
            dst[i] = static_cast<float>(rec[static_cast<size_t>(i + 1)]) * (1.0f / 255.0f);
        }
    }
}

}  // namespace detail

// Loads pixel values scaled to [0,1]; standardization is a separate step so
// the constants can be computed on the train split and recorded.
inline Dataset load_cifar10(const std::filesystem::path& dir, Split split) {
    std::vector<std::filesystem::path> files;
    if (split == Split::train) {
        for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    } else {
        files.push_back(dir / "test_batch.bin");
    }
    int64_t total = 0;
    for (const auto& f : files) {
        std::error_code ec;
        const auto sz = std::filesystem::file_size(f, ec);
        require(!ec, ErrorCategory::io, "cannot stat " + f.string());
        total += static_cast<int64_t>(sz) / detail::kCifarRecord;
    }
    require(total > 0, ErrorCategory::format, "no records under " + dir.string());
    Dataset ds;
    ds.name = "cifar10";
    ds.class_count = 10;
    ds.images = Tensor({total, 3, 32, 32});
    ds.labels.reserve(static_cast<size_t>(total));
    int64_t n = 0;
    for (const auto& f : files) detail::load_cifar_file(f, ds, n);
    return ds;
}

// Re-emits a dataset slice in the CIFAR-10 binary record layout. The loader
// scales by 1/255 exactly, so parse -> serialize reproduces input bytes.
inline void write_cifar10_batch(const Dataset& ds, int64_t from, int64_t count,
                                const std::filesystem::path& file) {
    require(!ds.standardized, ErrorCategory::input, "cannot serialize standardized pixels");
    std::ofstream os(file, std::ios::binary);
    require(os.good(), ErrorCategory::io, "cannot write " + file.string());
    for (int64_t r = from; r < from + count; ++r) {
        os.put(static_cast<char>(ds.labels[static_cast<size_t>(r)]));
        const float* src = &ds.images.data[static_cast<size_t>(r * detail::kCifarPixels)];
        for (int64_t i = 0; i < detail::kCifarPixels; ++i) {
            os.put(static_cast<char>(static_cast<uint8_t>(std::lround(src[i] * 255.0f))));
        }
    }
}

// ---------------------------------------------------------------------------
// MNIST IDX: big-endian headers, magic 0x803 for images / 0x801 for labels.
// ---------------------------------------------------------------------------

namespace detail {

inline uint32_t read_be32(std::istream& is, const std::string& what) {
    std::array<unsigned char, 4> b{};
    is.read(reinterpret_cast<char*>(b.data()), 4);
    require(is.gcount() == 4, ErrorCategory::format, "truncated " + what);
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

}  // namespace detail

inline Dataset load_mnist_idx(const std::filesystem::path& dir, Split split) {
    const std::string stem = split == Split::train ? "train" : "t10k";
    const auto image_file = dir / (stem + "-images-idx3-ubyte");
    const auto label_file = dir / (stem + "-labels-idx1-ubyte");

    std::ifstream imgs(image_file, std::ios::binary);
    require(imgs.good(), ErrorCategory::io, "cannot open " + image_file.string());
    require(detail::read_be32(imgs, "image magic") == 0x00000803u, ErrorCategory::format,
            image_file.string() + ": bad image magic (want 0x00000803)");
    const int64_t n = detail::read_be32(imgs, "image count");
    const int64_t rows = detail::read_be32(imgs, "row count");
    const int64_t cols = detail::read_be32(imgs, "column count");

    std::ifstream labs(label_file, std::ios::binary);
    require(labs.good(), ErrorCategory::io, "cannot open " + label_file.string());
    require(detail::read_be32(labs, "label magic") == 0x00000801u, ErrorCategory::format,
            label_file.string() + ": bad label magic (want 0x00000801)");
    const int64_t ln = detail::read_be32(labs, "label count");
    require(ln == n, ErrorCategory::format, "image/label counts disagree");

    Dataset ds;
    ds.name = "mnist";
    ds.class_count = 10;
    ds.images = Tensor({n, 1, rows, cols});
    ds.labels.resize(static_cast<size_t>(n));
    std::vector<uint8_t> buf(static_cast<size_t>(rows * cols));
    for (int64_t i = 0; i < n; ++i) {
        imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        require(imgs.gcount() == static_cast<std::streamsize>(buf.size()), ErrorCategory::format,
                image_file.string() + ": truncated image " + std::to_string(i));
        float* dst = &ds.images.data[static_cast<size_t>(i * rows * cols)];
        for (size_t p = 0; p < buf.size(); ++p) dst[p] = static_cast<float>(buf[p]) * (1.0f / 255.0f);
        const int c = labs.get();
        require(c >= 0 && c <= 9, ErrorCategory::format,
                label_file.string() + ": bad label for image " + std::to_string(i));
        ds.labels[static_cast<size_t>(i)] = c;
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian blobs: `classes` unit-sphere directions scaled by
// `separation`, plus unit-variance noise. Deterministic by seed. Centers
// depend only on the seed; `sample_stream` picks the noise stream, so
// train/test splits share centers but draw independent samples.
// ---------------------------------------------------------------------------

inline Dataset synth_blobs(int classes, int n_per_class, int dim, uint64_t seed,
                           float separation = 10.0f, uint64_t sample_stream = 1) {
    require(classes >= 2, ErrorCategory::input, "synth_blobs needs >= 2 classes");
    require(n_per_class >= 1 && dim >= 1, ErrorCategory::input, "bad blob dimensions");
    require(sample_stream >= 1, ErrorCategory::input, "sample_stream 0 is the center stream");
    Rng root(seed);
    Rng center_rng = root.split(0);
    std::vector<std::vector<float>> centers(static_cast<size_t>(classes));
    for (auto& cvec : centers) {
        cvec.resize(static_cast<size_t>(dim));
        double norm = 0.0;
        for (float& v : cvec) {
            v = static_cast<float>(center_rng.next_normal());
            norm += static_cast<double>(v) * v;
        }
        const float scale = separation / static_cast<float>(std::sqrt(norm));
        for (float& v : cvec) v *= scale;
    }
    const int64_t total = static_cast<int64_t>(classes) * n_per_class;
    Dataset ds;
    ds.name = "synth";
    ds.class_count = classes;
    ds.images = Tensor({total, dim, 1, 1});
    ds.labels.resize(static_cast<size_t>(total));
    Rng noise_rng = root.split(sample_stream);
    int64_t idx = 0;
    for (int c = 0; c < classes; ++c) {
        for (int s = 0; s < n_per_class; ++s, ++idx) {
            ds.labels[static_cast<size_t>(idx)] = c;
            float* dst = &ds.images.data[static_cast<size_t>(idx * dim)];
            for (int d = 0; d < dim; ++d) {
                dst[d] = centers[static_cast<size_t>(c)][static_cast<size_t>(d)] +
                         static_cast<float>(noise_rng.next_normal());
            }
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

inline ChannelStats channel_stats(const Dataset& ds) {
    const int64_t c = ds.images.shape[1];
    const int64_t per = ds.images.numel() / (ds.size() * c);
    ChannelStats st;
    st.mean.assign(static_cast<size_t>(c), 0.0f);
    st.stddev.assign(static_cast<size_t>(c), 0.0f);
    std::vector<double> sum(static_cast<size_t>(c), 0.0), sq(static_cast<size_t>(c), 0.0);
    for (int64_t i = 0; i < ds.size(); ++i) {
        for (int64_t ch = 0; ch < c; ++ch) {
            const float* p = &ds.images.data[static_cast<size_t>((i * c + ch) * per)];
            for (int64_t j = 0; j < per; ++j) {
                sum[static_cast<size_t>(ch)] += p[j];
                sq[static_cast<size_t>(ch)] += static_cast<double>(p[j]) * p[j];
            }
        }
    }
    const double n = static_cast<double>(ds.size() * per);
    for (int64_t ch = 0; ch < c; ++ch) {
        const double m = sum[static_cast<size_t>(ch)] / n;
        const double var = sq[static_cast<size_t>(ch)] / n - m * m;
        st.mean[static_cast<size_t>(ch)] = static_cast<float>(m);
        st.stddev[static_cast<size_t>(ch)] = static_cast<float>(std::sqrt(std::max(var, 1e-12)));
    }
    return st;
}

// Applies (x - mean) / std per channel, exactly once per dataset.
inline void standardize(Dataset& ds, const ChannelStats& st) {
    require(!ds.standardized, ErrorCategory::input, "dataset already standardized");
    const int64_t c = ds.images.shape[1];
    require(static_cast<int64_t>(st.mean.size()) == c, ErrorCategory::dimension,
            "stats channel count mismatch");
    const int64_t per = ds.images.numel() / (ds.size() * c);
    for (int64_t i = 0; i < ds.size(); ++i) {
        for (int64_t ch = 0; ch < c; ++ch) {
            const float m = st.mean[static_cast<size_t>(ch)];
            const float inv = 1.0f / st.stddev[static_cast<size_t>(ch)];
            float* p = &ds.images.data[static_cast<size_t>((i * c + ch) * per)];
            for (int64_t j = 0; j < per; ++j) p[j] = (p[j] - m) * inv;
        }
    }
    ds.standardized = true;
    ds.norm_mean = st.mean;
    ds.norm_std = st.stddev;
}

// First n samples (datasets are stored shuffled or balanced by construction).
inline Dataset take(const Dataset& ds, int64_t n) {
    require(n >= 1 && n <= ds.size(), ErrorCategory::input, "subset size out of range");
    Dataset out;
    out.class_count = ds.class_count;
    out.name = ds.name;
    out.standardized = ds.standardized;
    out.norm_mean = ds.norm_mean;
    out.norm_std = ds.norm_std;
    std::vector<int64_t> shape = ds.images.shape;
    shape[0] = n;
    const int64_t per = ds.images.numel() / ds.size();
    out.images = Tensor(shape);
    std::copy(ds.images.data.begin(), ds.images.data.begin() + static_cast<size_t>(n * per),
              out.images.data.begin());
    out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<size_t>(n));
    return out;
}

// ---------------------------------------------------------------------------
// Train-time augmentation: horizontal flip (p = 1/2) and 4-pixel pad + crop.
// ---------------------------------------------------------------------------

struct AugmentPlan {
    struct Item {
        bool flip = false;
        int dx = 4;  // crop offsets into the padded image, in [0, 8]
        int dy = 4;
    };
    std::vector<Item> items;
};

inline AugmentPlan sample_augment_plan(Rng& rng, int64_t n) {
    AugmentPlan plan;
    plan.items.resize(static_cast<size_t>(n));
    for (auto& it : plan.items) {
        it.flip = (rng.next_u64() & 1u) != 0;
        it.dx = static_cast<int>(rng.next_below(9));
        it.dy = static_cast<int>(rng.next_below(9));
    }
    return plan;
}

// Mirror selected samples along the width axis. Involutive per mask.
inline Tensor flip_horizontal(const Tensor& batch, const std::vector<uint8_t>& mask) {
    require(batch.rank() == 4, ErrorCategory::dimension, "flip expects [batch,ch,h,w]");
    require(static_cast<int64_t>(mask.size()) == batch.shape[0], ErrorCategory::dimension,
            "flip mask length mismatch");
    Tensor out = batch;
    const int64_t c = batch.shape[1], h = batch.shape[2], w = batch.shape[3];
    for (int64_t i = 0; i < batch.shape[0]; ++i) {
        if (!mask[static_cast<size_t>(i)]) continue;
        for (int64_t ch = 0; ch < c; ++ch) {
            float* plane = &out.data[static_cast<size_t>(((i * c) + ch) * h * w)];
            for (int64_t y = 0; y < h; ++y) {
                float* row = plane + y * w;
                for (int64_t x = 0; x < w / 2; ++x) std::swap(row[x], row[w - 1 - x]);
            }
        }
    }
    return out;
}

// Zero-pad by 4 on each side and crop back to the original size at the
// plan's per-sample offsets.
inline Tensor pad_crop(const Tensor& batch, const AugmentPlan& plan) {
    require(batch.rank() == 4, ErrorCategory::dimension, "pad_crop expects [batch,ch,h,w]");
    const int64_t n = batch.shape[0], c = batch.shape[1], h = batch.shape[2], w = batch.shape[3];
    require(static_cast<int64_t>(plan.items.size()) == n, ErrorCategory::dimension,
            "augment plan length mismatch");
    Tensor out(batch.shape);
    for (int64_t i = 0; i < n; ++i) {
        const auto& it = plan.items[static_cast<size_t>(i)];
        require(it.dx >= 0 && it.dx <= 8 && it.dy >= 0 && it.dy <= 8, ErrorCategory::input,
                "crop offset outside [0,8]");
        for (int64_t ch = 0; ch < c; ++ch) {
            const float* src = &batch.data[static_cast<size_t>(((i * c) + ch) * h * w)];
            float* dst = &out.data[static_cast<size_t>(((i * c) + ch) * h * w)];
            for (int64_t y = 0; y < h; ++y) {
                const int64_t sy = y + it.dy - 4;
                for (int64_t x = 0; x < w; ++x) {
                    const int64_t sx = x + it.dx - 4;
                    dst[y * w + x] = (sy >= 0 && sy < h && sx >= 0 && sx < w)
                                         ? src[sy * w + sx]
                                         : 0.0f;
                }
            }
        }
    }
    return out;
}

inline Tensor augment_batch(const Tensor& batch, const AugmentPlan& plan) {
    std::vector<uint8_t> mask(plan.items.size());
    for (size_t i = 0; i < plan.items.size(); ++i) mask[i] = plan.items[i].flip ? 1 : 0;
    return pad_crop(flip_horizontal(batch, mask), plan);
}

inline Tensor augment_train(const Tensor& batch, Rng& rng) {
    return augment_batch(batch, sample_augment_plan(rng, batch.shape[0]));
}

}  // namespace saflab
