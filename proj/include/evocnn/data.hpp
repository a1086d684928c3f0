#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evocnn/tensor.hpp"

namespace evocnn {

class Network;

enum class SplitTag : std::uint8_t { Raw = 0, Train = 1, Val = 2, Test = 3 };

std::string_view split_name(SplitTag t);

/// Images with labels. Pixels are kept as f32 in [0,1] (encodings may exceed 1), sample-major.
struct Dataset {
    Shape3 shape;
    std::vector<float> pixels;
    std::vector<std::uint8_t> labels;
    SplitTag split = SplitTag::Raw;

    std::size_t size() const { return labels.size(); }
    std::span<const float> sample(std::size_t i) const {
        return std::span<const float>(pixels).subspan(i * shape.size(), shape.size());
    }
    /// Gathers the listed samples into a batch tensor.
    Tensor4 gather(std::span<const std::size_t> indices) const;
    /// Samples [first, first + count) as a batch tensor.
    Tensor4 slice(std::size_t first, std::size_t count) const;
    std::vector<std::size_t> class_histogram(std::size_t classes) const;
};

// CIFAR-10 binary records: one label byte followed by 3072 pixel bytes, R, G, B planes of 32x32.
inline constexpr std::size_t kCifarImageBytes = 3 * 32 * 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarImageBytes;

/// Parses one batch file. Throws ParseError when the size is not a whole number of records.
Dataset load_cifar10_batch(const std::filesystem::path& file);
/// Parses a batch file or, for a directory, data_batch_1..5.bin followed by test_batch.bin.
Dataset load_cifar10(const std::filesystem::path& path);
/// Inverse of parsing: label byte plus round(pixel * 255) per record.
std::vector<std::uint8_t> serialize_cifar10(const Dataset& ds);

struct Splits {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Stratified 45:5:10 split under a seed. Each class is shuffled and apportioned on its own, so
/// every split keeps the class balance of the input within one sample per class.
Splits split_dataset(const Dataset& raw, std::uint64_t seed);

/// Shuffled order of the full batches of one epoch; the remainder (n mod batch_size) is dropped.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed);

/// Replaces every sample by its encoding under the autoencoder's encoder half.
Dataset encode_dataset(const Network& autoencoder, const Dataset& ds, std::size_t batch_size = 100);

struct SynthConfig {
    std::size_t count = 512;
    std::size_t classes = 4;
    std::size_t channels = 3;
    std::size_t height = 16;
    std::size_t width = 16;
    double noise = 0.1;
    std::uint64_t seed = 1;
};

/// Oriented sinusoidal gratings, one orientation per class, random phase, contrast and frequency
/// jitter, Gaussian noise. Labels cycle 0..classes-1 so the histogram is exactly uniform.
Dataset synth_dataset(const SynthConfig& cfg);

/// Little-endian "EVOD" file: version u32, sample count u64, per-sample shape as three u32, f32
/// samples, then one u8 label per sample. The split tag is not stored.
void write_encoded(const std::filesystem::path& file, const Dataset& ds);
Dataset read_encoded(const std::filesystem::path& file, SplitTag tag = SplitTag::Raw);

}  // namespace evocnn
