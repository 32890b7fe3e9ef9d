#pragma once

// Minimal dependency-free PNG writer: 8-bit RGB, deflate "stored" blocks
// (no compression beyond the format's required framing). Optionally embeds
// tEXt chunks for provenance.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "stdk/common.hpp"

namespace stdk {

struct RgbImage {
    size_t width = 0, height = 0;
    std::vector<uint8_t> pixels;  // row-major RGB triples

    static RgbImage make(size_t w, size_t h) {
        RgbImage img;
        img.width = w;
        img.height = h;
        img.pixels.assign(w * h * 3, 0);
        return img;
    }

    void set(size_t x, size_t y, uint8_t r, uint8_t g, uint8_t b) {
        size_t i = (y * width + x) * 3;
        pixels[i] = r;
        pixels[i + 1] = g;
        pixels[i + 2] = b;
    }
};

namespace png_detail {

inline uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t n = 0; n < 256; ++n) {
            uint32_t c = n;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[n] = c;
        }
        return t;
    }();
    crc ^= 0xffffffffu;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

inline uint32_t adler32(const uint8_t* data, size_t len) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < len; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

inline void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline void put_chunk(std::vector<uint8_t>& out, const char type[4],
                      const std::vector<uint8_t>& data) {
    put_u32_be(out, static_cast<uint32_t>(data.size()));
    size_t type_pos = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uint32_t crc = crc32(out.data() + type_pos, 4 + data.size());
    put_u32_be(out, crc);
}

// zlib stream around raw deflate "stored" blocks (max 65535 bytes each).
inline std::vector<uint8_t> zlib_stored(const std::vector<uint8_t>& raw) {
    std::vector<uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    size_t pos = 0;
    do {
        size_t n = std::min<size_t>(65535, raw.size() - pos);
        bool final = pos + n == raw.size();
        z.push_back(final ? 1 : 0);  // BFINAL, BTYPE=00
        z.push_back(static_cast<uint8_t>(n & 0xff));
        z.push_back(static_cast<uint8_t>(n >> 8));
        z.push_back(static_cast<uint8_t>(~n & 0xff));
        z.push_back(static_cast<uint8_t>((~n >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + pos, raw.begin() + pos + n);
        pos += n;
    } while (pos < raw.size());
    put_u32_be(z, adler32(raw.data(), raw.size()));
    return z;
}

}  // namespace png_detail

// key/value pairs become tEXt chunks (provenance: seed, config hash).
inline std::vector<uint8_t> encode_png(const RgbImage& img,
                                       const std::vector<std::pair<std::string, std::string>>&
                                           text_chunks = {}) {
    using namespace png_detail;
    if (img.width == 0 || img.height == 0)
        throw invalid_argument_error("encode_png: empty image");

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(img.width));
    put_u32_be(ihdr, static_cast<uint32_t>(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor RGB
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // interlace
    put_chunk(out, "IHDR", ihdr);

    for (const auto& [key, value] : text_chunks) {
        std::vector<uint8_t> text(key.begin(), key.end());
        text.push_back(0);
        text.insert(text.end(), value.begin(), value.end());
        put_chunk(out, "tEXt", text);
    }

    // Scanlines, each prefixed with filter type 0.
    std::vector<uint8_t> raw;
    raw.reserve(img.height * (1 + img.width * 3));
    for (size_t y = 0; y < img.height; ++y) {
        raw.push_back(0);
        const uint8_t* row = img.pixels.data() + y * img.width * 3;
        raw.insert(raw.end(), row, row + img.width * 3);
    }
    put_chunk(out, "IDAT", zlib_stored(raw));
    put_chunk(out, "IEND", {});
    return out;
}

inline void write_png(const std::string& path, const RgbImage& img,
                      const std::vector<std::pair<std::string, std::string>>& text_chunks = {}) {
    std::vector<uint8_t> bytes = encode_png(img, text_chunks);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open PNG for writing: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw io_error("PNG write failed: " + path);
}

}  // namespace stdk
