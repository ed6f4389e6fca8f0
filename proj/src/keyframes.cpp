#include "unidomain/keyframes.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

namespace unidomain::keyframes {

FrameSizeMismatch::FrameSizeMismatch(std::size_t index, std::size_t w, std::size_t h, std::size_t want_w,
                                     std::size_t want_h)
    : Error("frame " + std::to_string(index) + " is " + std::to_string(w) + "x" + std::to_string(h) +
            ", expected " + std::to_string(want_w) + "x" + std::to_string(want_h)) {}

std::string to_string(ExtremumKind kind) {
    switch (kind) {
    case ExtremumKind::max:
        return "max";
    case ExtremumKind::min:
        return "min";
    case ExtremumKind::both:
        return "both";
    }
    return "?";
}

std::uint64_t frame_energy(const GrayFrame &frame) {
    std::uint64_t sum = 0;
    for (std::uint8_t v : frame.pixels)
        sum += static_cast<std::uint64_t>(v) * v;
    return sum;
}

std::vector<Keyframe> extract_keyframes(const EnergySeries &energies, std::size_t K) {
    if (energies.empty())
        throw EmptySeries();
    if (K < 1)
        throw Error("window half-width K must be at least 1");

    const std::size_t n = energies.size();
    struct Candidate {
        std::size_t index;
        ExtremumKind kind;
    };
    std::vector<Candidate> candidates;
    for (std::size_t t = 0; t < n; ++t) {
        std::size_t lo = t >= K ? t - K : 0;
        std::size_t hi = std::min(n - 1, t + K);
        auto [mn, mx] = std::minmax_element(energies.begin() + lo, energies.begin() + hi + 1);
        bool is_max = energies[t] == *mx;
        bool is_min = energies[t] == *mn;
        if (is_max && is_min)
            candidates.push_back({t, ExtremumKind::both});
        else if (is_max)
            candidates.push_back({t, ExtremumKind::max});
        else if (is_min)
            candidates.push_back({t, ExtremumKind::min});
    }

    std::vector<Keyframe> out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Candidate &c = candidates[i];
        if (i > 0) {
            const Candidate &prev = candidates[i - 1];
            if (prev.index + 1 == c.index && prev.kind == c.kind && energies[prev.index] == energies[c.index])
                continue;
        }
        out.push_back({c.index, c.kind});
    }
    return out;
}

EnergySeries frame_energies(const std::vector<GrayFrame> &frames) {
    if (frames.empty())
        throw EmptySeries();
    const std::size_t w = frames.front().width, h = frames.front().height;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto &f = frames[i];
        if (f.width != w || f.height != h)
            throw FrameSizeMismatch(i, f.width, f.height, w, h);
        if (f.pixels.size() != w * h)
            throw ImageError("frame " + std::to_string(i) + " has " + std::to_string(f.pixels.size()) +
                             " pixels, expected " + std::to_string(w * h));
    }

    EnergySeries out(frames.size());
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<std::size_t>(workers, frames.size());
    auto run = [&](std::size_t begin) {
        for (std::size_t i = begin; i < frames.size(); i += workers)
            out[i] = frame_energy(frames[i]);
    };
    if (workers == 1) {
        run(0);
        return out;
    }
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k)
        pool.emplace_back(run, k);
    for (auto &t : pool)
        t.join();
    return out;
}

std::vector<Keyframe> segment_demo(const std::vector<GrayFrame> &frames, std::size_t K) {
    return extract_keyframes(frame_energies(frames), K);
}

// ---------------------------------------------------------------------------
// Netpbm IO

GrayFrame to_gray(const RgbImage &image) {
    GrayFrame g{image.width, image.height, std::vector<std::uint8_t>(image.width * image.height)};
    for (std::size_t i = 0; i < g.pixels.size(); ++i) {
        // Integer form of 0.299R + 0.587G + 0.114B, rounded half up.
        unsigned r = image.pixels[3 * i], gr = image.pixels[3 * i + 1], b = image.pixels[3 * i + 2];
        g.pixels[i] = static_cast<std::uint8_t>((299 * r + 587 * gr + 114 * b + 500) / 1000);
    }
    return g;
}

namespace {

struct Header {
    std::string magic;
    std::size_t width = 0, height = 0, maxval = 0;
};

void skip_space_and_comments(std::istream &in) {
    while (in) {
        int c = in.peek();
        if (c == '#') {
            std::string ignored;
            std::getline(in, ignored);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
}

std::size_t read_number(std::istream &in, const std::filesystem::path &path) {
    skip_space_and_comments(in);
    std::size_t v = 0;
    if (!(in >> v))
        throw ImageError(path.string() + ": malformed netpbm header");
    return v;
}

Header read_header(std::istream &in, const std::filesystem::path &path) {
    Header h;
    char magic[2] = {0, 0};
    in.read(magic, 2);
    h.magic.assign(magic, 2);
    h.width = read_number(in, path);
    h.height = read_number(in, path);
    h.maxval = read_number(in, path);
    if (h.maxval == 0 || h.maxval > 255)
        throw ImageError(path.string() + ": only 8-bit netpbm images are supported");
    return h;
}

std::ifstream open_binary(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ImageError("cannot open " + path.string());
    return in;
}

void read_raster(std::istream &in, std::vector<std::uint8_t> &out, const std::filesystem::path &path) {
    in.get(); // single whitespace after maxval
    in.read(reinterpret_cast<char *>(out.data()), static_cast<std::streamsize>(out.size()));
    if (in.gcount() != static_cast<std::streamsize>(out.size()))
        throw ImageError(path.string() + ": truncated raster");
}

} // namespace

GrayFrame read_pgm(const std::filesystem::path &path) {
    auto in = open_binary(path);
    Header h = read_header(in, path);
    GrayFrame f{h.width, h.height, std::vector<std::uint8_t>(h.width * h.height)};
    if (h.magic == "P5") {
        read_raster(in, f.pixels, path);
    } else if (h.magic == "P2") {
        for (auto &p : f.pixels) {
            std::size_t v = read_number(in, path);
            if (v > h.maxval)
                throw ImageError(path.string() + ": sample exceeds maxval");
            p = static_cast<std::uint8_t>(v);
        }
    } else {
        throw ImageError(path.string() + ": not a PGM file (magic " + h.magic + ")");
    }
    return f;
}

RgbImage read_ppm(const std::filesystem::path &path) {
    auto in = open_binary(path);
    Header h = read_header(in, path);
    if (h.magic != "P6")
        throw ImageError(path.string() + ": not a binary PPM file (magic " + h.magic + ")");
    RgbImage img{h.width, h.height, std::vector<std::uint8_t>(3 * h.width * h.height)};
    read_raster(in, img.pixels, path);
    return img;
}

GrayFrame read_frame(const std::filesystem::path &path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ppm")
        return to_gray(read_ppm(path));
    return read_pgm(path);
}

void write_pgm(const std::filesystem::path &path, const GrayFrame &frame) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ImageError("cannot write " + path.string());
    out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
    out.write(reinterpret_cast<const char *>(frame.pixels.data()), static_cast<std::streamsize>(frame.pixels.size()));
}

void write_ppm(const std::filesystem::path &path, const RgbImage &image) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ImageError("cannot write " + path.string());
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char *>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

std::vector<std::filesystem::path> list_frames(const std::filesystem::path &dir) {
    if (!std::filesystem::is_directory(dir))
        throw ImageError(dir.string() + " is not a directory");
    std::vector<std::filesystem::path> out;
    for (const auto &entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file())
            continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".pgm" || ext == ".ppm")
            out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.filename().string() < b.filename().string(); });
    return out;
}

EnergySeries read_energy_csv(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open " + path.string());
    std::vector<std::pair<std::size_t, std::uint64_t>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw Error(path.string() + ":" + std::to_string(lineno) + ": expected `index,energy`");
        std::string a = line.substr(0, comma), b = line.substr(comma + 1);
        if (lineno == 1 && !a.empty() && !std::isdigit(static_cast<unsigned char>(a.front())))
            continue; // header
        try {
            std::size_t used = 0;
            double energy = std::stod(b, &used);
            if (energy < 0)
                throw std::invalid_argument("negative");
            rows.push_back({std::stoul(a), static_cast<std::uint64_t>(energy + 0.5)});
        } catch (const std::exception &) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": bad row `" + line + "`");
        }
    }
    std::sort(rows.begin(), rows.end());
    EnergySeries out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].first != i)
            throw Error(path.string() + ": indices must be 0..N-1 without gaps");
        out.push_back(rows[i].second);
    }
    return out;
}

} // namespace unidomain::keyframes
