#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mig/vec2.hpp"

namespace mig {

enum class SegmentKind { Line, Quadratic, Cubic };

/// A line or Bezier segment. Only the first point_count() entries of `points` are meaningful.
struct Segment {
    SegmentKind kind = SegmentKind::Line;
    std::array<Vec2, 4> points{};

    static Segment line(Vec2 a, Vec2 b);
    static Segment quadratic(Vec2 a, Vec2 c, Vec2 b);
    static Segment cubic(Vec2 a, Vec2 c1, Vec2 c2, Vec2 b);

    int point_count() const { return kind == SegmentKind::Line ? 2 : kind == SegmentKind::Quadratic ? 3 : 4; }
    int degree() const { return point_count() - 1; }
    Vec2 start() const { return points[0]; }
    Vec2 end() const { return points[point_count() - 1]; }

    Vec2 point(double t) const;
    Vec2 derivative(double t) const;
    /// Unit tangent direction at t = 0 / t = 1. Falls back to the next distinct control
    /// point when the derivative vanishes there; zero vector if all points coincide.
    Vec2 start_tangent() const;
    Vec2 end_tangent() const;

    bool operator==(const Segment &o) const;
};

/// Closed chain of segments: each segment ends where the next one starts, the last ends at the first start.
struct Contour {
    std::vector<Segment> segments;
};

struct Glyph {
    std::vector<Contour> contours;
    int label = 0;
    std::string family;
};

struct BoundingBox {
    Vec2 min{};
    Vec2 max{};
};

/// Parses the absolute-coordinate path grammar: M, L, Q, C, Z with whitespace-separated numbers.
/// Every subpath must start with M and end with Z; a closing Line is inserted at Z when needed.
std::vector<Contour> parse_path(std::string_view text);

/// Inverse of parse_path. Numbers are printed with round-trip precision.
std::string serialize_path(const std::vector<Contour> &contours);

/// Control-point bounding box (contains the curves).
BoundingBox bounding_box(const std::vector<Contour> &contours);

/// Uniform scale + translation: box center to the origin, largest extent to 2 * (1 - margin).
std::vector<Contour> normalize(const std::vector<Contour> &contours, double margin = 0.15);
Glyph normalize(const Glyph &glyph, double margin = 0.15);

/// Glyph label alphabet. Symbols are UTF-8 strings (one code point each).
class Alphabet {
public:
    Alphabet();
    explicit Alphabet(std::vector<std::string> symbols);
    /// Splits a UTF-8 string into one symbol per code point.
    static Alphabet from_string(std::string_view symbols);
    static Alphabet latin52();

    std::size_t size() const { return symbols_.size(); }
    const std::string &symbol(std::size_t index) const { return symbols_.at(index); }
    const std::vector<std::string> &symbols() const { return symbols_; }
    std::optional<int> index_of(std::string_view symbol) const;
    std::string to_string() const;

private:
    std::vector<std::string> symbols_;
};

struct ManifestEntry {
    std::string family;
    int family_index = 0;
    int label = 0;
    std::filesystem::path file;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    std::vector<std::string> families;  // first-appearance order = latent index
};

/// Reads a JSON array of {"family", "label", "file"} records; files resolve relative to the manifest.
Manifest load_manifest(const std::filesystem::path &path, const Alphabet &alphabet);

/// Reads and parses one path file. Parse errors are rethrown prefixed with the file name.
std::vector<Contour> load_glyph_file(const std::filesystem::path &path);

} // namespace mig
