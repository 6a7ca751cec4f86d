/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/imaging.cpp
 *
 * Copyright 2026 The cephalo authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "cephalo/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

namespace cephalo::imaging {

namespace {

std::uint8_t to_byte(double v)
{
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Netpbm header tokens are separated by whitespace and may carry '#' comments.
class PgmHeaderReader {
public:
    explicit PgmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    long next_int()
    {
        skip_space_and_comments();
        long value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000) {
                throw ParseError("PGM header value out of range");
            }
            ++pos_;
            ++digits;
        }
        if (digits == 0) {
            throw ParseError("malformed PGM header");
        }
        return value;
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t raster_offset()
    {
        if (pos_ >= bytes_.size()) {
            throw ParseError("truncated PGM header");
        }
        return pos_ + 1;
    }

    void skip(std::size_t n) { pos_ += n; }

private:
    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            const auto c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
                    ++pos_;
                }
            } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

GrayImage decode_pgm(std::span<const std::uint8_t> bytes)
{
    PgmHeaderReader reader(bytes);
    reader.skip(2);
    const long width = reader.next_int();
    const long height = reader.next_int();
    const long maxval = reader.next_int();
    if (width < 1 || height < 1) {
        throw ParseError("PGM has zero size");
    }
    if (maxval < 1 || maxval > 255) {
        throw ParseError("only 8-bit PGM is supported");
    }
    const std::size_t offset = reader.raster_offset();
    const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() < offset + n) {
        throw ParseError("truncated PGM raster");
    }
    std::vector<std::uint8_t> data(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(offset + n));
    if (maxval != 255) {
        for (auto& v : data) {
            v = to_byte(255.0 * std::min<long>(v, maxval) / static_cast<double>(maxval));
        }
    }
    return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

struct PngReadState {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
    char message[256] = "";
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length)
{
    auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (state->pos + length > state->bytes.size()) {
        png_error(png, "truncated PNG stream");
    }
    std::memcpy(out, state->bytes.data() + state->pos, length);
    state->pos += length;
}

void png_record_error(png_structp png, png_const_charp message)
{
    auto* state = static_cast<PngReadState*>(png_get_error_ptr(png));
    std::snprintf(state->message, sizeof(state->message), "%s", message);
    png_longjmp(png, 1);
}

void png_ignore_warning(png_structp, png_const_charp) {}

GrayImage decode_png(std::span<const std::uint8_t> bytes)
{
    // Everything with a destructor lives above setjmp so a longjmp back here skips none.
    PngReadState state{bytes, 0};
    std::vector<std::uint8_t> raw;
    std::vector<png_bytep> rows;
    int width = 0;
    int height = 0;
    int channels = 0;

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, png_record_error, png_ignore_warning);
    if (png == nullptr) {
        throw Error("cannot allocate PNG reader");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("cannot allocate PNG info");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(std::string("PNG decode error: ") + state.message);
    }

    png_set_read_fn(png, &state, png_read_from_span);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    channels = png_get_channels(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    raw.resize(rowbytes * static_cast<std::size_t>(height));
    rows.resize(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        rows[static_cast<std::size_t>(y)] = raw.data() + rowbytes * static_cast<std::size_t>(y);
    }
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    GrayImage out(width, height);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* row = rows[static_cast<std::size_t>(y)];
        for (int x = 0; x < width; ++x) {
            const std::uint8_t* px = row + static_cast<std::size_t>(x) * channels;
            out.at(x, y) = channels >= 3 ? to_byte(luminance(px[0], px[1], px[2])) : px[0];
        }
    }
    return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open image '" + path.string() + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename T>
GradientField gradients_impl(const Image<T>& img)
{
    if (img.width() < 3 || img.height() < 3) {
        throw Error("gradients need an image of at least 3x3 pixels");
    }
    GradientField f;
    f.width = img.width();
    f.height = img.height();
    const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
    f.gx.resize(n);
    f.gy.resize(n);
    f.magnitude.resize(n);
    f.orientation.resize(n);
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x) {
            const double gx = 0.5 * (static_cast<double>(img.clamped(x + 1, y)) - img.clamped(x - 1, y));
            const double gy = 0.5 * (static_cast<double>(img.clamped(x, y + 1)) - img.clamped(x, y - 1));
            const std::size_t i = f.index(x, y);
            f.gx[i] = static_cast<float>(gx);
            f.gy[i] = static_cast<float>(gy);
            f.magnitude[i] = static_cast<float>(std::sqrt(gx * gx + gy * gy));
            f.orientation[i] = static_cast<float>(wrap_half_turn(std::atan2(gy, gx)));
        }
    }
    return f;
}

template <bool Squared>
IntegralImage integral_impl(const GrayImage& img)
{
    const int w = img.width();
    const int h = img.height();
    std::vector<std::int64_t> table(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    for (int y = 0; y < h; ++y) {
        std::int64_t row = 0;
        for (int x = 0; x < w; ++x) {
            const std::int64_t v = img.at(x, y);
            row += Squared ? v * v : v;
            table[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
                table[static_cast<std::size_t>(y) * (w + 1) + x + 1] + row;
        }
    }
    return IntegralImage(w, h, std::move(table));
}

} // namespace

GrayImage decode_image(std::span<const std::uint8_t> bytes)
{
    static constexpr std::array<std::uint8_t, 8> kPngMagic = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::equal(kPngMagic.begin(), kPngMagic.end(), bytes.begin())) {
        return decode_png(bytes);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
        return decode_pgm(bytes);
    }
    throw ParseError("unsupported image format (expected PNG or binary PGM)");
}

GrayImage load_image(const std::filesystem::path& path)
{
    const auto bytes = read_bytes(path);
    try {
        return decode_image(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img)
{
    const std::string header =
        "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels().begin(), img.pixels().end());
    return out;
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path)
{
    const auto bytes = encode_pgm(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("failed writing '" + path.string() + "'");
    }
}

GrayImage preprocess(const GrayImage& img)
{
    std::array<std::uint64_t, 256> histogram{};
    for (std::uint8_t v : img.pixels()) {
        ++histogram[v];
    }
    const std::uint64_t total = img.pixels().size();
    std::array<std::uint8_t, 256> level{};
    std::uint64_t cdf = 0;
    for (std::size_t v = 0; v < 256; ++v) {
        cdf += histogram[v];
        level[v] = static_cast<std::uint8_t>(255 * cdf / total);
    }
    GrayImage out(img.width(), img.height());
    std::transform(img.pixels().begin(), img.pixels().end(), out.pixels().begin(),
                   [&](std::uint8_t v) { return level[v]; });
    return out;
}

IntegralImage integral(const GrayImage& img) { return integral_impl<false>(img); }

IntegralImage integral_squared(const GrayImage& img) { return integral_impl<true>(img); }

double wrap_half_turn(double angle)
{
    double a = std::fmod(angle, std::numbers::pi);
    if (a < 0.0) {
        a += std::numbers::pi;
    }
    if (a >= std::numbers::pi) {
        a = 0.0;
    }
    return a;
}

GradientField gradients(const GrayImage& img) { return gradients_impl(img); }

GradientField gradients(const FloatImage& img) { return gradients_impl(img); }

GrayImage mirror_horizontal(const GrayImage& img)
{
    GrayImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            out.at(img.width() - 1 - x, y) = img.at(x, y);
        }
    }
    return out;
}

} // namespace cephalo::imaging
