#pragma once

// Keyframe selection from demonstration videos. A frame's energy is the sum of
// its squared grayscale intensities; keyframes are the local extrema of the
// energy series over a sliding window.

#include "unidomain/errors.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace unidomain::keyframes {

inline constexpr std::size_t kDefaultWindow = 15;

class EmptySeries : public Error {
public:
    EmptySeries() : Error("energy series is empty") {}
};

class FrameSizeMismatch : public Error {
public:
    FrameSizeMismatch(std::size_t index, std::size_t w, std::size_t h, std::size_t want_w, std::size_t want_h);
};

class ImageError : public Error {
public:
    using Error::Error;
};

struct GrayFrame {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // row-major

    std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // row-major, interleaved RGB
};

enum class ExtremumKind { max, min, both };
std::string to_string(ExtremumKind kind);

struct Keyframe {
    std::size_t index = 0;
    ExtremumKind kind = ExtremumKind::max;

    bool operator==(const Keyframe &) const = default;
};

using EnergySeries = std::vector<std::uint64_t>;

std::uint64_t frame_energy(const GrayFrame &frame);

/// Selects t when E_t is the max or min of E over [t-K, t+K] clipped to the
/// series. In a run of consecutive selections of the same kind and equal
/// energy only the first index is kept.
std::vector<Keyframe> extract_keyframes(const EnergySeries &energies, std::size_t K);

/// Frame energies are computed in parallel; frames must share one size.
EnergySeries frame_energies(const std::vector<GrayFrame> &frames);
std::vector<Keyframe> segment_demo(const std::vector<GrayFrame> &frames, std::size_t K);

// Image IO ------------------------------------------------------------------

GrayFrame to_gray(const RgbImage &image); // BT.601 luma, rounded
GrayFrame read_pgm(const std::filesystem::path &path);
RgbImage read_ppm(const std::filesystem::path &path);
/// Reads a .pgm as is or converts a .ppm to gray.
GrayFrame read_frame(const std::filesystem::path &path);
void write_pgm(const std::filesystem::path &path, const GrayFrame &frame);
void write_ppm(const std::filesystem::path &path, const RgbImage &image);

/// Image files (.pgm/.ppm) of a directory in lexicographic order.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path &dir);

/// Uncompressed (stored-deflate) PNG; byte-identical output for equal input.
std::string encode_png(const GrayFrame &frame);
std::string encode_png(const RgbImage &image);
/// Reads a .pgm/.ppm file and returns it PNG-encoded, keeping color when present.
std::string load_as_png(const std::filesystem::path &path);

/// `index,energy` rows; an optional header line is skipped.
EnergySeries read_energy_csv(const std::filesystem::path &path);

} // namespace unidomain::keyframes
