#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spectex {

/// One convolution layer as stored in a VGGW container.
struct WeightRecord {
    std::string name;
    std::uint32_t out_channels = 0;
    std::uint32_t in_channels = 0;
    std::uint32_t kernel_height = 3;
    std::uint32_t kernel_width = 3;
    std::vector<float> kernel; // [out][in][kh][kw]
    std::vector<float> bias;

    friend bool operator==(const WeightRecord&, const WeightRecord&) = default;
};

/// Pretrained convolution weights plus the per-channel preprocessing means.
struct WeightSet {
    static constexpr std::uint16_t current_version = 1;

    std::uint16_t version = current_version;
    std::array<float, 3> channel_means{}; // RGB order
    std::vector<WeightRecord> records;

    const WeightRecord* find(std::string_view name) const;

    friend bool operator==(const WeightSet&, const WeightSet&) = default;
};

// VGGW version 1, little-endian:
//   "VGGW" | u16 version | u16 record count | u8 channel order (0 = RGB) |
//   7 reserved zero bytes | 3 x f32 means |
//   per record: u16 name length, name, u32 C_out, C_in, kH, kW,
//               kernel f32[C_out*C_in*kH*kW], bias f32[C_out] |
//   u32 CRC-32 (IEEE) of everything before it.

/// Parses a VGGW byte image. Checks layout, the 3x3 kernel rule, channel
/// chaining between consecutive records and the trailing CRC.
WeightSet parse_weights(std::span<const std::byte> bytes);

WeightSet load_weights(const std::filesystem::path& path);

std::vector<std::byte> serialize_weights(const WeightSet& weights);

/// Writes the container atomically (temporary file, then rename).
void save_weights(const std::filesystem::path& path, const WeightSet& weights);

struct ExpectedLayer {
    std::string name;
    std::uint32_t out_channels = 0;
    std::uint32_t in_channels = 0;
};

/// VGG-19 convolution layers from conv1_1 through `last_conv` inclusive.
std::vector<ExpectedLayer> vgg19_expected_layers(std::string_view last_conv = "conv4_4");

/// Chain of `layers` with He-normal kernels (std sqrt(2 / (9 C_in))) and zero
/// biases, for smoke tests and small synthetic networks.
WeightSet make_random_weights(std::span<const ExpectedLayer> layers, std::uint64_t seed,
                              const std::array<float, 3>& channel_means = {123.68f, 116.779f, 103.939f});

/// `layers` with every width replaced by `width` (input of the first stays 3).
std::vector<ExpectedLayer> narrowed_layers(std::span<const ExpectedLayer> layers, std::uint32_t width);

/// Throws WeightValidationError naming the first record that is missing,
/// misnamed or mis-shaped. Extra trailing records are allowed.
void validate_against(const WeightSet& weights, std::span<const ExpectedLayer> expected);

/// CRC-32 of a record's kernel then bias, as raw little-endian f32 bytes.
std::uint32_t record_checksum(const WeightRecord& record);

/// Parsed `key=value` manifest written next to an exported container.
///
/// Keys read by the engine:
///   layers=conv1_1,conv1_2,...
///   checksum.<layer>=<crc32 as 8 hex digits>
///   reference.<capture>.sum=<real>   reference.<capture>.l2=<real>
///   reference.image=builtin | <path>
using Manifest = std::map<std::string, std::string>;

Manifest parse_manifest(std::string_view text);
Manifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const Manifest& manifest);

/// Checks every `checksum.<layer>` entry against the loaded records. Throws
/// CorruptionError on the first mismatch and WeightValidationError when a
/// listed layer is absent.
void verify_manifest_checksums(const WeightSet& weights, const Manifest& manifest);

} // namespace spectex
