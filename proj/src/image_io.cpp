#include "spectex/image_io.hpp"

#include "spectex/errors.hpp"
#include "spectex/file_util.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <string>

namespace spectex {

namespace {

struct ReadState {
    std::span<const std::byte> bytes;
    std::size_t offset = 0;
};

void read_bytes(png_structp png, png_bytep out, png_size_t length) {
    auto* state = static_cast<ReadState*>(png_get_io_ptr(png));
    if (state->bytes.size() - state->offset < length) png_error(png, "unexpected end of PNG data");
    std::memcpy(out, state->bytes.data() + state->offset, length);
    state->offset += length;
}

void write_bytes(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::byte>*>(png_get_io_ptr(png));
    const auto* first = reinterpret_cast<const std::byte*>(data);
    out->insert(out->end(), first, first + length);
}

void flush_nothing(png_structp) {}

struct ErrorSink {
    std::string message;
};

// libpng is C; errors leave through its setjmp buffer, never as exceptions.
[[noreturn]] void raise_error(png_structp png, png_const_charp message) {
    auto* sink = static_cast<ErrorSink*>(png_get_error_ptr(png));
    if (sink) sink->message = message;
    png_longjmp(png, 1);
}

void ignore_warning(png_structp, png_const_charp) {}

} // namespace

RgbImage read_png(const std::filesystem::path& path) {
    const std::vector<std::byte> bytes = read_file_bytes(path);
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
        throw IoError(path.string() + " is not a PNG file");
    }
    ErrorSink sink;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, raise_error, ignore_warning);
    if (!png) throw IoError("cannot create PNG reader");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("cannot create PNG info");
    }
    ReadState state{bytes, 0};
    RgbImage image;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path.string() + ": " + sink.message);
    }
    png_set_read_fn(png, &state, read_bytes);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    image.width = png_get_image_width(png, info);
    image.height = png_get_image_height(png, info);
    if (png_get_rowbytes(png, info) != image.width * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path.string() + ": unexpected PNG row layout");
    }
    image.pixels.resize(image.width * image.height * 3);
    rows.resize(image.height);
    for (std::size_t y = 0; y < image.height; ++y) rows[y] = image.pixels.data() + y * image.width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

std::vector<std::byte> encode_png(const RgbImage& image) {
    if (image.width == 0 || image.height == 0 || image.pixels.size() != image.width * image.height * 3) {
        throw ConfigError("encode_png: inconsistent image buffer");
    }
    ErrorSink sink;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, raise_error, ignore_warning);
    if (!png) throw IoError("cannot create PNG writer");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("cannot create PNG info");
    }
    std::vector<std::byte> out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encoding failed: " + sink.message);
    }
    png_set_write_fn(png, &out, write_bytes, flush_nothing);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height),
                 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < image.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * image.width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    write_file_atomic(path, encode_png(image));
}

} // namespace spectex
