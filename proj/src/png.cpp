// Minimal PNG writer. Deflate stream uses stored blocks only, so the output
// depends on nothing but the pixels.

#include "unidomain/keyframes.hpp"

#include <array>

namespace unidomain::keyframes {

namespace {

const std::array<std::uint32_t, 256> &crc_table() {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t n = 0; n < 256; ++n) {
            std::uint32_t c = n;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[n] = c;
        }
        return t;
    }();
    return table;
}

std::uint32_t crc32(const std::string &bytes, std::size_t from) {
    std::uint32_t c = 0xffffffffu;
    for (std::size_t i = from; i < bytes.size(); ++i)
        c = crc_table()[(c ^ static_cast<unsigned char>(bytes[i])) & 0xff] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

void put_u32(std::string &out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
        out += static_cast<char>((v >> shift) & 0xff);
}

void chunk(std::string &out, const char *type, const std::string &data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    std::string body = type + data;
    out += body;
    put_u32(out, crc32(body, 0));
}

std::string zlib_stored(const std::string &raw) {
    std::string z = "\x78\x01";
    std::size_t pos = 0;
    do {
        std::size_t len = std::min<std::size_t>(65535, raw.size() - pos);
        bool last = pos + len == raw.size();
        z += static_cast<char>(last ? 1 : 0);
        z += static_cast<char>(len & 0xff);
        z += static_cast<char>(len >> 8);
        z += static_cast<char>(~len & 0xff);
        z += static_cast<char>((~len >> 8) & 0xff);
        z.append(raw, pos, len);
        pos += len;
    } while (pos < raw.size());
    std::uint32_t a = 1, b = 0;
    for (unsigned char c : raw) {
        a = (a + c) % 65521;
        b = (b + a) % 65521;
    }
    put_u32(z, (b << 16) | a);
    return z;
}

std::string encode(std::size_t width, std::size_t height, int channels, const std::vector<std::uint8_t> &pixels) {
    if (width == 0 || height == 0 || pixels.size() != width * height * channels)
        throw ImageError("cannot encode an empty or inconsistent image");
    std::string raw;
    raw.reserve(height * (1 + width * channels));
    for (std::size_t y = 0; y < height; ++y) {
        raw += '\0'; // filter: none
        raw.append(reinterpret_cast<const char *>(pixels.data() + y * width * channels), width * channels);
    }
    std::string out = "\x89PNG\r\n\x1a\n";
    std::string ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(width));
    put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr += '\x08';                             // bit depth
    ihdr += static_cast<char>(channels == 1 ? 0 : 2); // gray or truecolor
    ihdr += std::string(3, '\0');               // compression, filter, interlace
    chunk(out, "IHDR", ihdr);
    chunk(out, "IDAT", zlib_stored(raw));
    chunk(out, "IEND", "");
    return out;
}

} // namespace

std::string encode_png(const GrayFrame &frame) { return encode(frame.width, frame.height, 1, frame.pixels); }

std::string encode_png(const RgbImage &image) { return encode(image.width, image.height, 3, image.pixels); }

std::string load_as_png(const std::filesystem::path &path) {
    std::string ext = path.extension().string();
    for (auto &c : ext)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".ppm")
        return encode_png(read_ppm(path));
    return encode_png(read_pgm(path));
}

} // namespace unidomain::keyframes
