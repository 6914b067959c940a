#include "spectex/weights_io.hpp"

#include "spectex/errors.hpp"
#include "spectex/file_util.hpp"

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace spectex {

namespace {

constexpr std::array<char, 4> magic{'V', 'G', 'G', 'W'};

std::uint32_t crc32_of(std::span<const std::byte> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks to stay within range.
    std::size_t offset = 0;
    while (offset < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + offset), static_cast<uInt>(n));
        offset += n;
    }
    return static_cast<std::uint32_t>(crc);
}

class Reader {
public:
    explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return offset_; }
    std::size_t remaining() const { return bytes_.size() - offset_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw IoError(std::string("weight file truncated while reading ") + what +
                          " at byte " + std::to_string(offset_));
        }
    }

    std::uint8_t u8(const char* what) {
        need(1, what);
        return std::to_integer<std::uint8_t>(bytes_[offset_++]);
    }

    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= std::uint16_t(std::to_integer<std::uint16_t>(bytes_[offset_ + i]) << (8 * i));
        offset_ += 2;
        return v;
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(bytes_[offset_ + i]) << (8 * i);
        offset_ += 4;
        return v;
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

    void floats(std::vector<float>& out, std::size_t count, const char* what) {
        need(count * 4, what);
        out.resize(count);
        for (auto& v : out) v = f32(what);
    }

    std::string text(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + offset_), n);
        offset_ += n;
        return s;
    }

private:
    std::span<const std::byte> bytes_;
    std::size_t offset_ = 0;
};

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(std::byte{v}); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) bytes_.push_back(std::byte(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(std::byte(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void text(std::string_view s) {
        for (char ch : s) bytes_.push_back(std::byte(static_cast<unsigned char>(ch)));
    }
    std::vector<std::byte>& bytes() { return bytes_; }

private:
    std::vector<std::byte> bytes_;
};

void check_record_layout(const WeightRecord& rec, const WeightRecord* previous) {
    if (rec.kernel_height != 3 || rec.kernel_width != 3) {
        throw WeightValidationError(rec.name, "kernel is " + std::to_string(rec.kernel_height) +
                                                  "x" + std::to_string(rec.kernel_width) +
                                                  ", expected 3x3");
    }
    if (rec.out_channels == 0 || rec.in_channels == 0) {
        throw WeightValidationError(rec.name, "zero channel count");
    }
    const std::uint32_t expected_in = previous ? previous->out_channels : 3;
    if (rec.in_channels != expected_in) {
        throw WeightValidationError(rec.name, "C_in " + std::to_string(rec.in_channels) +
                                                  " does not chain, expected " +
                                                  std::to_string(expected_in));
    }
}

} // namespace

const WeightRecord* WeightSet::find(std::string_view name) const {
    for (const auto& r : records) {
        if (r.name == name) return &r;
    }
    return nullptr;
}

WeightSet parse_weights(std::span<const std::byte> bytes) {
    Reader in(bytes);
    in.need(4, "magic");
    if (std::memcmp(bytes.data(), magic.data(), magic.size()) != 0) {
        throw WeightFormatError("not a VGGW container (bad magic)");
    }
    in.text(4, "magic");

    WeightSet ws;
    ws.version = in.u16("version");
    if (ws.version != WeightSet::current_version) {
        throw WeightFormatError("unsupported VGGW version " + std::to_string(ws.version));
    }
    const std::uint16_t count = in.u16("record count");
    const std::uint8_t order = in.u8("channel order");
    if (order != 0) {
        throw WeightFormatError("unsupported channel order flag " + std::to_string(order) +
                                " (only 0 = RGB)");
    }
    for (int i = 0; i < 7; ++i) {
        if (in.u8("reserved header bytes") != 0) {
            throw WeightFormatError("reserved header bytes must be zero");
        }
    }
    for (auto& m : ws.channel_means) m = in.f32("channel means");

    ws.records.reserve(count);
    for (std::uint16_t r = 0; r < count; ++r) {
        WeightRecord rec;
        const std::uint16_t name_len = in.u16("record name length");
        rec.name = in.text(name_len, "record name");
        rec.out_channels = in.u32("C_out");
        rec.in_channels = in.u32("C_in");
        rec.kernel_height = in.u32("kH");
        rec.kernel_width = in.u32("kW");
        const std::uint64_t kernel_count = std::uint64_t(rec.out_channels) * rec.in_channels *
                                           rec.kernel_height * rec.kernel_width;
        if (kernel_count * 4 > in.remaining()) {
            throw IoError("weight file truncated inside record " + rec.name);
        }
        in.floats(rec.kernel, static_cast<std::size_t>(kernel_count), "kernel");
        in.floats(rec.bias, rec.out_channels, "bias");
        for (const auto& existing : ws.records) {
            if (existing.name == rec.name) {
                throw WeightFormatError("duplicate record name " + rec.name);
            }
        }
        ws.records.push_back(std::move(rec));
    }

    const std::size_t payload = in.offset();
    const std::uint32_t stored = in.u32("checksum");
    if (in.remaining() != 0) {
        throw WeightFormatError(std::to_string(in.remaining()) + " unexpected trailing bytes");
    }
    if (crc32_of(bytes.first(payload)) != stored) {
        throw CorruptionError("VGGW checksum mismatch");
    }

    for (std::size_t i = 0; i < ws.records.size(); ++i) {
        check_record_layout(ws.records[i], i == 0 ? nullptr : &ws.records[i - 1]);
    }
    return ws;
}

WeightSet load_weights(const std::filesystem::path& path) {
    return parse_weights(read_file_bytes(path));
}

std::vector<std::byte> serialize_weights(const WeightSet& weights) {
    if (weights.records.size() > 0xFFFF) throw ConfigError("too many weight records");
    Writer out;
    out.text(std::string_view(magic.data(), magic.size()));
    out.u16(weights.version);
    out.u16(static_cast<std::uint16_t>(weights.records.size()));
    out.u8(0);
    for (int i = 0; i < 7; ++i) out.u8(0);
    for (float m : weights.channel_means) out.f32(m);
    for (const auto& rec : weights.records) {
        if (rec.name.size() > 0xFFFF) throw ConfigError("record name too long");
        const std::size_t kernel_count = std::size_t(rec.out_channels) * rec.in_channels *
                                         rec.kernel_height * rec.kernel_width;
        if (rec.kernel.size() != kernel_count || rec.bias.size() != rec.out_channels) {
            throw ConfigError("record " + rec.name + " has inconsistent value counts");
        }
        out.u16(static_cast<std::uint16_t>(rec.name.size()));
        out.text(rec.name);
        out.u32(rec.out_channels);
        out.u32(rec.in_channels);
        out.u32(rec.kernel_height);
        out.u32(rec.kernel_width);
        for (float v : rec.kernel) out.f32(v);
        for (float v : rec.bias) out.f32(v);
    }
    out.u32(crc32_of(out.bytes()));
    return std::move(out.bytes());
}

void save_weights(const std::filesystem::path& path, const WeightSet& weights) {
    write_file_atomic(path, serialize_weights(weights));
}

std::vector<ExpectedLayer> vgg19_expected_layers(std::string_view last_conv) {
    constexpr std::array<int, 5> block_convs{2, 2, 4, 4, 4};
    constexpr std::array<std::uint32_t, 5> widths{64, 128, 256, 512, 512};
    std::vector<ExpectedLayer> layers;
    std::uint32_t in = 3;
    for (std::size_t b = 0; b < block_convs.size(); ++b) {
        for (int i = 1; i <= block_convs[b]; ++i) {
            std::string name = "conv" + std::to_string(b + 1) + "_" + std::to_string(i);
            layers.push_back({name, widths[b], in});
            in = widths[b];
            if (name == last_conv) return layers;
        }
    }
    throw ConfigError("unknown VGG-19 convolution layer " + std::string(last_conv));
}

WeightSet make_random_weights(std::span<const ExpectedLayer> layers, std::uint64_t seed,
                              const std::array<float, 3>& channel_means) {
    WeightSet ws;
    ws.channel_means = channel_means;
    std::mt19937_64 rng(seed);
    for (const auto& layer : layers) {
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (9.0 * layer.in_channels)));
        WeightRecord rec{layer.name, layer.out_channels, layer.in_channels, 3, 3, {}, {}};
        rec.kernel.resize(std::size_t(layer.out_channels) * layer.in_channels * 9);
        for (auto& v : rec.kernel) v = static_cast<float>(normal(rng));
        rec.bias.assign(layer.out_channels, 0.0f);
        ws.records.push_back(std::move(rec));
    }
    return ws;
}

std::vector<ExpectedLayer> narrowed_layers(std::span<const ExpectedLayer> layers, std::uint32_t width) {
    std::vector<ExpectedLayer> out(layers.begin(), layers.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].out_channels = width;
        out[i].in_channels = i == 0 ? 3 : width;
    }
    return out;
}

void validate_against(const WeightSet& weights, std::span<const ExpectedLayer> expected) {
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& want = expected[i];
        if (i >= weights.records.size()) {
            throw WeightValidationError(want.name, "record missing");
        }
        const auto& rec = weights.records[i];
        if (rec.name != want.name) {
            // Report the expected layer when it is absent, else the misplaced record.
            throw WeightValidationError(weights.find(want.name) ? rec.name : want.name,
                                        weights.find(want.name)
                                            ? "out of order, expected " + want.name
                                            : "record missing");
        }
        if (rec.kernel_height != 3 || rec.kernel_width != 3) {
            throw WeightValidationError(rec.name, "kernel must be 3x3");
        }
        if (rec.out_channels != want.out_channels || rec.in_channels != want.in_channels) {
            throw WeightValidationError(
                rec.name, "shape " + std::to_string(rec.out_channels) + "x" +
                              std::to_string(rec.in_channels) + ", expected " +
                              std::to_string(want.out_channels) + "x" +
                              std::to_string(want.in_channels));
        }
    }
}

std::uint32_t record_checksum(const WeightRecord& record) {
    Writer out;
    for (float v : record.kernel) out.f32(v);
    for (float v : record.bias) out.f32(v);
    return crc32_of(out.bytes());
}

Manifest parse_manifest(std::string_view text) {
    Manifest manifest;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos || eq == 0) {
            throw WeightFormatError("manifest line " + std::to_string(line_no) +
                                    " is not key=value");
        }
        manifest[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
    }
    return manifest;
}

Manifest load_manifest(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string format_manifest(const Manifest& manifest) {
    std::ostringstream out;
    for (const auto& [key, value] : manifest) out << key << '=' << value << '\n';
    return out.str();
}

void verify_manifest_checksums(const WeightSet& weights, const Manifest& manifest) {
    constexpr std::string_view prefix = "checksum.";
    for (const auto& [key, value] : manifest) {
        if (!key.starts_with(prefix)) continue;
        const std::string layer = key.substr(prefix.size());
        const WeightRecord* rec = weights.find(layer);
        if (!rec) throw WeightValidationError(layer, "listed in manifest but not in weights");
        std::uint32_t expected = 0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), expected, 16);
        if (ec != std::errc{} || ptr != value.data() + value.size()) {
            throw WeightFormatError("manifest " + key + " is not a hex checksum");
        }
        if (record_checksum(*rec) != expected) {
            throw CorruptionError("checksum mismatch for " + layer);
        }
    }
}

} // namespace spectex
