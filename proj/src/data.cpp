#include "evocnn/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "evocnn/error.hpp"
#include "evocnn/network.hpp"
#include "evocnn/rng.hpp"

namespace evocnn {

namespace fs = std::filesystem;

std::string_view split_name(SplitTag t) {
    switch (t) {
        case SplitTag::Raw: return "raw";
        case SplitTag::Train: return "train";
        case SplitTag::Val: return "val";
        case SplitTag::Test: return "test";
    }
    return "?";
}

Tensor4 Dataset::gather(std::span<const std::size_t> indices) const {
    Tensor4 t(indices.size(), shape);
    const std::size_t d = shape.size();
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const float* src = pixels.data() + indices[b] * d;
        double* dst = t.data() + b * d;
        for (std::size_t i = 0; i < d; ++i) dst[i] = src[i];
    }
    return t;
}

Tensor4 Dataset::slice(std::size_t first, std::size_t count) const {
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = first + i;
    return gather(idx);
}

std::vector<std::size_t> Dataset::class_histogram(std::size_t classes) const {
    std::vector<std::size_t> h(classes, 0);
    for (auto l : labels)
        if (l < classes) ++h[l];
    return h;
}

namespace {

std::vector<std::uint8_t> read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> bytes(size);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (!in) throw std::runtime_error("short read on " + file.string());
    return bytes;
}

void append(Dataset& into, const Dataset& from) {
    into.pixels.insert(into.pixels.end(), from.pixels.begin(), from.pixels.end());
    into.labels.insert(into.labels.end(), from.labels.begin(), from.labels.end());
}

}  // namespace

Dataset load_cifar10_batch(const fs::path& file) {
    const auto bytes = read_file(file);
    if (bytes.size() % kCifarRecordBytes != 0) {
        throw ParseError(file.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of " +
                             std::to_string(kCifarRecordBytes) + " (1 label byte + 3072 pixel bytes per record)",
                         bytes.size() - bytes.size() % kCifarRecordBytes);
    }
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    Dataset ds;
    ds.shape = {3, 32, 32};
    ds.labels.resize(n);
    ds.pixels.resize(n * kCifarImageBytes);
    for (std::size_t r = 0; r < n; ++r) {
        const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
        if (rec[0] > 9) throw ParseError("label byte " + std::to_string(rec[0]) + " out of range", r * kCifarRecordBytes);
        ds.labels[r] = rec[0];
        float* dst = ds.pixels.data() + r * kCifarImageBytes;
        for (std::size_t i = 0; i < kCifarImageBytes; ++i) dst[i] = static_cast<float>(rec[1 + i]) / 255.0f;
    }
    return ds;
}

Dataset load_cifar10(const fs::path& path) {
    if (!fs::is_directory(path)) return load_cifar10_batch(path);
    Dataset all;
    all.shape = {3, 32, 32};
    std::vector<fs::path> files;
    for (int i = 1; i <= 5; ++i) files.push_back(path / ("data_batch_" + std::to_string(i) + ".bin"));
    files.push_back(path / "test_batch.bin");
    for (const auto& f : files) {
        if (!fs::exists(f)) throw std::runtime_error("missing CIFAR-10 batch file " + f.string());
        append(all, load_cifar10_batch(f));
    }
    return all;
}

std::vector<std::uint8_t> serialize_cifar10(const Dataset& ds) {
    if (ds.shape != Shape3{3, 32, 32}) throw StructuralError("CIFAR-10 records are 3x32x32");
    std::vector<std::uint8_t> out(ds.size() * kCifarRecordBytes);
    for (std::size_t r = 0; r < ds.size(); ++r) {
        std::uint8_t* rec = out.data() + r * kCifarRecordBytes;
        rec[0] = ds.labels[r];
        const auto px = ds.sample(r);
        for (std::size_t i = 0; i < kCifarImageBytes; ++i)
            rec[1 + i] = static_cast<std::uint8_t>(std::lround(std::clamp(px[i], 0.0f, 1.0f) * 255.0f));
    }
    return out;
}

namespace {

Dataset subset(const Dataset& raw, const std::vector<std::size_t>& idx, SplitTag tag) {
    Dataset out;
    out.shape = raw.shape;
    out.split = tag;
    out.labels.reserve(idx.size());
    out.pixels.reserve(idx.size() * raw.shape.size());
    for (auto i : idx) {
        out.labels.push_back(raw.labels[i]);
        const auto s = raw.sample(i);
        out.pixels.insert(out.pixels.end(), s.begin(), s.end());
    }
    return out;
}

}  // namespace

Splits split_dataset(const Dataset& raw, std::uint64_t seed) {
    if (raw.pixels.size() != raw.size() * raw.shape.size())
        throw StructuralError("dataset pixel count does not match sample count");
    if (raw.size() < 12) throw PreconditionError("need at least 12 samples to split 45:5:10");
    Rng rng(seed);
    std::size_t classes = 0;
    for (auto l : raw.labels) classes = std::max<std::size_t>(classes, l + 1u);
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < raw.size(); ++i) by_class[raw.labels[i]].push_back(i);

    std::vector<std::size_t> train, val, test;
    for (auto& members : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        const std::size_t n = members.size();
        const std::size_t n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * 5.0 / 60.0));
        const std::size_t n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * 10.0 / 60.0));
        for (std::size_t k = 0; k < n; ++k) {
            if (k < n_val)
                val.push_back(members[k]);
            else if (k < n_val + n_test)
                test.push_back(members[k]);
            else
                train.push_back(members[k]);
        }
    }
    if (train.empty() || val.empty() || test.empty()) throw PreconditionError("a split came out empty");
    std::shuffle(train.begin(), train.end(), rng);
    std::shuffle(val.begin(), val.end(), rng);
    std::shuffle(test.begin(), test.end(), rng);
    return {subset(raw, train, SplitTag::Train), subset(raw, val, SplitTag::Val), subset(raw, test, SplitTag::Test)};
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed) {
    if (batch_size < 1) throw PreconditionError("batch size must be >= 1");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(epoch_seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches(n / batch_size);
    for (std::size_t b = 0; b < batches.size(); ++b)
        batches[b].assign(order.begin() + static_cast<std::ptrdiff_t>(b * batch_size),
                          order.begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_size));
    return batches;
}

Dataset encode_dataset(const Network& autoencoder, const Dataset& ds, std::size_t batch_size) {
    if (ds.shape != autoencoder.input_shape())
        throw StructuralError("dataset samples " + to_string(ds.shape) + " do not match encoder input " +
                              to_string(autoencoder.input_shape()));
    Dataset out;
    out.shape = autoencoder.encoding_shape();
    out.split = ds.split;
    out.labels = ds.labels;
    out.pixels.reserve(ds.size() * out.shape.size());
    for (std::size_t first = 0; first < ds.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, ds.size() - first);
        const Tensor4 z = autoencoder.encode(ds.slice(first, count));
        for (double v : z.values()) out.pixels.push_back(static_cast<float>(v));
    }
    return out;
}

Dataset synth_dataset(const SynthConfig& cfg) {
    if (cfg.classes < 2 || cfg.classes > 10) throw PreconditionError("synthetic classes must be in [2,10]");
    Dataset ds;
    ds.shape = {cfg.channels, cfg.height, cfg.width};
    ds.labels.resize(cfg.count);
    ds.pixels.resize(cfg.count * ds.shape.size());
    Rng rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, cfg.noise);
    const double pi = std::numbers::pi;
    for (std::size_t i = 0; i < cfg.count; ++i) {
        const std::size_t k = i % cfg.classes;
        ds.labels[i] = static_cast<std::uint8_t>(k);
        const double theta = pi * static_cast<double>(k) / static_cast<double>(cfg.classes);
        const double freq = 2.0 + 0.5 * (unit(rng) - 0.5);
        const double phase = 2.0 * pi * unit(rng);
        const double contrast = 0.25 + 0.1 * unit(rng);
        const double ct = std::cos(theta), st = std::sin(theta);
        float* px = ds.pixels.data() + i * ds.shape.size();
        for (std::size_t c = 0; c < cfg.channels; ++c) {
            const double gain = 1.0 - 0.15 * static_cast<double>(c);
            for (std::size_t y = 0; y < cfg.height; ++y) {
                for (std::size_t x = 0; x < cfg.width; ++x) {
                    const double u = (static_cast<double>(x) * ct + static_cast<double>(y) * st) /
                                     static_cast<double>(std::max(cfg.width, cfg.height));
                    double v = 0.5 + gain * contrast * std::sin(2.0 * pi * freq * u + phase) + noise(rng);
                    px[(c * cfg.height + y) * cfg.width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
            }
        }
    }
    return ds;
}

void write_encoded(const fs::path& file, const Dataset& ds) {
    std::vector<std::uint8_t> out;
    auto u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    auto u64 = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    out.insert(out.end(), {'E', 'V', 'O', 'D'});
    u32(1);
    u64(ds.size());
    u32(static_cast<std::uint32_t>(ds.shape.c));
    u32(static_cast<std::uint32_t>(ds.shape.h));
    u32(static_cast<std::uint32_t>(ds.shape.w));
    for (float f : ds.pixels) u32(std::bit_cast<std::uint32_t>(f));
    out.insert(out.end(), ds.labels.begin(), ds.labels.end());

    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
        if (!o) throw std::runtime_error("cannot write " + tmp.string());
        o.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
        if (!o) throw std::runtime_error("short write on " + tmp.string());
    }
    fs::rename(tmp, file);
}

Dataset read_encoded(const fs::path& file, SplitTag tag) {
    const auto b = read_file(file);
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
        if (b.size() - pos < n) throw ParseError("truncated encoded dataset " + file.string(), pos);
    };
    auto u32 = [&] {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos++]) << (8 * i);
        return v;
    };
    auto u64 = [&] {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[pos++]) << (8 * i);
        return v;
    };
    need(4);
    if (std::memcmp(b.data(), "EVOD", 4) != 0) throw ParseError("bad encoded dataset magic", 0);
    pos = 4;
    const std::size_t version_at = pos;
    const auto version = u32();
    if (version != 1) throw UnsupportedVersion(version, version_at);
    const auto count = u64();
    Dataset ds;
    ds.split = tag;
    ds.shape.c = u32();
    ds.shape.h = u32();
    ds.shape.w = u32();
    const std::size_t values = static_cast<std::size_t>(count) * ds.shape.size();
    need(values * 4 + static_cast<std::size_t>(count));
    ds.pixels.resize(values);
    for (auto& f : ds.pixels) f = std::bit_cast<float>(u32());
    ds.labels.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.begin() + static_cast<std::ptrdiff_t>(pos + count));
    pos += count;
    if (pos != b.size()) throw ParseError("trailing bytes in encoded dataset", pos);
    return ds;
}

}  // namespace evocnn
