#include "mig/glyph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "mig/error.hpp"

namespace mig {

Segment Segment::line(Vec2 a, Vec2 b) {
    return Segment{SegmentKind::Line, {a, b, Vec2{}, Vec2{}}};
}

Segment Segment::quadratic(Vec2 a, Vec2 c, Vec2 b) {
    return Segment{SegmentKind::Quadratic, {a, c, b, Vec2{}}};
}

Segment Segment::cubic(Vec2 a, Vec2 c1, Vec2 c2, Vec2 b) {
    return Segment{SegmentKind::Cubic, {a, c1, c2, b}};
}

Vec2 Segment::point(double t) const {
    const auto &p = points;
    double s = 1.0 - t;
    switch (kind) {
    case SegmentKind::Line:
        return p[0] * s + p[1] * t;
    case SegmentKind::Quadratic:
        return p[0] * (s * s) + p[1] * (2.0 * s * t) + p[2] * (t * t);
    case SegmentKind::Cubic:
        return p[0] * (s * s * s) + p[1] * (3.0 * s * s * t) + p[2] * (3.0 * s * t * t) + p[3] * (t * t * t);
    }
    return {};
}

Vec2 Segment::derivative(double t) const {
    const auto &p = points;
    double s = 1.0 - t;
    switch (kind) {
    case SegmentKind::Line:
        return p[1] - p[0];
    case SegmentKind::Quadratic:
        return (p[1] - p[0]) * (2.0 * s) + (p[2] - p[1]) * (2.0 * t);
    case SegmentKind::Cubic:
        return (p[1] - p[0]) * (3.0 * s * s) + (p[2] - p[1]) * (6.0 * s * t) + (p[3] - p[2]) * (3.0 * t * t);
    }
    return {};
}

Vec2 Segment::start_tangent() const {
    int n = point_count();
    for (int i = 1; i < n; ++i) {
        Vec2 d = points[i] - points[0];
        if (d.squared_length() > 0.0)
            return normalized(d);
    }
    return {};
}

Vec2 Segment::end_tangent() const {
    int n = point_count();
    for (int i = n - 2; i >= 0; --i) {
        Vec2 d = points[n - 1] - points[i];
        if (d.squared_length() > 0.0)
            return normalized(d);
    }
    return {};
}

bool Segment::operator==(const Segment &o) const {
    if (kind != o.kind)
        return false;
    for (int i = 0; i < point_count(); ++i)
        if (!(points[i] == o.points[i]))
            return false;
    return true;
}

namespace {

struct Token {
    std::string_view text;
    int line = 1;
    int column = 1;
    bool eof = false;
};

class Tokenizer {
public:
    explicit Tokenizer(std::string_view text) : text_(text) {}

    Token peek() {
        if (!peeked_) {
            next_ = read();
            peeked_ = true;
        }
        return next_;
    }

    Token take() {
        Token t = peek();
        peeked_ = false;
        return t;
    }

private:
    Token read() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            advance();
        }
        Token t;
        t.line = line_;
        t.column = column_;
        if (pos_ >= text_.size()) {
            t.eof = true;
            return t;
        }
        std::size_t begin = pos_;
        char c = text_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) && !starts_number()) {
            advance();
        } else {
            while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
                if (starts_number()) {
                    for (int k = 0; k < 3; ++k)
                        advance();
                    continue;
                }
                char d = text_[pos_];
                if (std::isalpha(static_cast<unsigned char>(d)) && d != 'e' && d != 'E' && pos_ != begin)
                    break;
                advance();
            }
        }
        t.text = text_.substr(begin, pos_ - begin);
        return t;
    }

    // "inf"/"nan" are lexed as numbers so they can be rejected as non-finite.
    bool starts_number() const {
        auto rest = text_.substr(pos_);
        auto starts = [&](std::string_view w) {
            if (rest.size() < w.size())
                return false;
            for (std::size_t i = 0; i < w.size(); ++i)
                if (std::tolower(static_cast<unsigned char>(rest[i])) != w[i])
                    return false;
            return true;
        };
        return starts("inf") || starts("nan");
    }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        ++pos_;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
    Token next_;
    bool peeked_ = false;
};

bool is_command(const Token &t) {
    return !t.eof && t.text.size() == 1 && std::isalpha(static_cast<unsigned char>(t.text[0]));
}

double parse_number(const Token &t, char command) {
    if (t.eof || is_command(t))
        throw ParseError(std::string("wrong arity for command '") + command + "'", t.line, t.column);
    std::string buf(t.text);
    const char *first = buf.c_str();
    const char *last = first + buf.size();
    if (*first == '+')
        ++first;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw ParseError("invalid number '" + buf + "'", t.line, t.column);
    if (!std::isfinite(value))
        throw ParseError("non-finite number '" + buf + "'", t.line, t.column);
    return value;
}

} // namespace

std::vector<Contour> parse_path(std::string_view text) {
    Tokenizer tok(text);
    std::vector<Contour> contours;
    std::optional<Contour> open;
    Vec2 pen{}, start{};
    Token open_token;

    auto read_point = [&](char command) {
        double x = parse_number(tok.take(), command);
        double y = parse_number(tok.take(), command);
        return Vec2{x, y};
    };

    while (true) {
        Token t = tok.take();
        if (t.eof)
            break;
        if (!is_command(t)) {
            if (open || !contours.empty())
                throw ParseError("wrong arity: unexpected number '" + std::string(t.text) + "'", t.line, t.column);
            throw ParseError("expected command, found '" + std::string(t.text) + "'", t.line, t.column);
        }
        char c = t.text[0];
        switch (c) {
        case 'M':
            if (open)
                throw ParseError("unclosed subpath before 'M'", t.line, t.column);
            start = pen = read_point(c);
            open.emplace();
            open_token = t;
            break;
        case 'L':
        case 'Q':
        case 'C': {
            if (!open)
                throw ParseError(std::string("command '") + c + "' outside a subpath (missing 'M')", t.line, t.column);
            if (c == 'L') {
                Vec2 b = read_point(c);
                open->segments.push_back(Segment::line(pen, b));
                pen = b;
            } else if (c == 'Q') {
                Vec2 k = read_point(c);
                Vec2 b = read_point(c);
                open->segments.push_back(Segment::quadratic(pen, k, b));
                pen = b;
            } else {
                Vec2 k1 = read_point(c);
                Vec2 k2 = read_point(c);
                Vec2 b = read_point(c);
                open->segments.push_back(Segment::cubic(pen, k1, k2, b));
                pen = b;
            }
            break;
        }
        case 'Z':
            if (!open)
                throw ParseError("'Z' outside a subpath", t.line, t.column);
            if (!(pen == start))
                open->segments.push_back(Segment::line(pen, start));
            if (open->segments.empty())
                throw ParseError("degenerate single-point contour", open_token.line, open_token.column);
            contours.push_back(std::move(*open));
            open.reset();
            pen = start;
            break;
        default:
            throw ParseError(std::string("unknown command '") + c + "'", t.line, t.column);
        }
    }
    if (open)
        throw ParseError("unclosed subpath at end of input", open_token.line, open_token.column);
    return contours;
}

namespace {

void append_number(std::string &out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    out.append(buf, ptr);
}

void append_point(std::string &out, Vec2 p) {
    out += ' ';
    append_number(out, p.x);
    out += ' ';
    append_number(out, p.y);
}

} // namespace

std::string serialize_path(const std::vector<Contour> &contours) {
    std::string out;
    for (const auto &contour : contours) {
        if (contour.segments.empty())
            continue;
        Vec2 start = contour.segments.front().start();
        out += 'M';
        append_point(out, start);
        std::size_t count = contour.segments.size();
        // The parser re-inserts a trailing closing line, so it is left implicit.
        const Segment &last = contour.segments.back();
        if (count > 1 && last.kind == SegmentKind::Line && last.end() == start && !(last.start() == start))
            --count;
        for (std::size_t i = 0; i < count; ++i) {
            const Segment &s = contour.segments[i];
            out += s.kind == SegmentKind::Line ? " L" : s.kind == SegmentKind::Quadratic ? " Q" : " C";
            for (int k = 1; k < s.point_count(); ++k)
                append_point(out, s.points[k]);
        }
        out += " Z\n";
    }
    return out;
}

BoundingBox bounding_box(const std::vector<Contour> &contours) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    BoundingBox box{{inf, inf}, {-inf, -inf}};
    for (const auto &c : contours)
        for (const auto &s : c.segments)
            for (int i = 0; i < s.point_count(); ++i) {
                box.min.x = std::min(box.min.x, s.points[i].x);
                box.min.y = std::min(box.min.y, s.points[i].y);
                box.max.x = std::max(box.max.x, s.points[i].x);
                box.max.y = std::max(box.max.y, s.points[i].y);
            }
    return box;
}

std::vector<Contour> normalize(const std::vector<Contour> &contours, double margin) {
    BoundingBox box = bounding_box(contours);
    double extent = std::max(box.max.x - box.min.x, box.max.y - box.min.y);
    if (!(extent > 0.0) || !std::isfinite(extent))
        throw DegenerateInputError("cannot normalize a glyph with zero bounding-box extent");
    Vec2 center = (box.min + box.max) * 0.5;
    double scale = 2.0 * (1.0 - margin) / extent;
    std::vector<Contour> out = contours;
    for (auto &c : out)
        for (auto &s : c.segments)
            for (int i = 0; i < s.point_count(); ++i)
                s.points[i] = (s.points[i] - center) * scale;
    return out;
}

Glyph normalize(const Glyph &glyph, double margin) {
    Glyph out = glyph;
    out.contours = normalize(glyph.contours, margin);
    return out;
}

Alphabet::Alphabet() : Alphabet(latin52()) {}

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    std::set<std::string> seen;
    for (const auto &s : symbols_)
        if (!seen.insert(s).second)
            throw ConfigError("duplicate alphabet symbol '" + s + "'");
}

Alphabet Alphabet::from_string(std::string_view symbols) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < symbols.size();) {
        auto lead = static_cast<unsigned char>(symbols[i]);
        std::size_t len = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xE ? 3 : 4;
        if (i + len > symbols.size())
            throw ConfigError("alphabet is not valid UTF-8");
        out.emplace_back(symbols.substr(i, len));
        i += len;
    }
    return Alphabet(std::move(out));
}

Alphabet Alphabet::latin52() {
    std::vector<std::string> out;
    for (char c = 'A'; c <= 'Z'; ++c)
        out.emplace_back(1, c);
    for (char c = 'a'; c <= 'z'; ++c)
        out.emplace_back(1, c);
    return Alphabet(std::move(out));
}

std::optional<int> Alphabet::index_of(std::string_view symbol) const {
    for (std::size_t i = 0; i < symbols_.size(); ++i)
        if (symbols_[i] == symbol)
            return static_cast<int>(i);
    return std::nullopt;
}

std::string Alphabet::to_string() const {
    std::string out;
    for (const auto &s : symbols_)
        out += s;
    return out;
}

Manifest load_manifest(const std::filesystem::path &path, const Alphabet &alphabet) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open manifest " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("manifest " + path.string() + ": " + e.what());
    }
    if (!doc.is_array())
        throw ConfigError("manifest " + path.string() + ": expected a JSON array");

    Manifest manifest;
    std::set<std::pair<std::string, int>> seen;
    std::filesystem::path base = path.parent_path();
    for (const auto &record : doc) {
        if (!record.is_object() || !record.contains("family") || !record.contains("label") || !record.contains("file"))
            throw ConfigError("manifest " + path.string() + ": each record needs family, label and file");
        ManifestEntry e;
        e.family = record.at("family").get<std::string>();
        std::string label = record.at("label").get<std::string>();
        auto idx = alphabet.index_of(label);
        if (!idx)
            throw ConfigError("manifest " + path.string() + ": label '" + label + "' is not in the alphabet");
        e.label = *idx;
        e.file = base / record.at("file").get<std::string>();
        if (!std::filesystem::exists(e.file))
            throw IoError("manifest " + path.string() + ": missing glyph file " + e.file.string());
        if (!seen.emplace(e.family, e.label).second)
            throw ConfigError("manifest " + path.string() + ": duplicate entry for family '" + e.family +
                              "' label '" + label + "'");
        auto it = std::find(manifest.families.begin(), manifest.families.end(), e.family);
        if (it == manifest.families.end()) {
            e.family_index = static_cast<int>(manifest.families.size());
            manifest.families.push_back(e.family);
        } else {
            e.family_index = static_cast<int>(it - manifest.families.begin());
        }
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

std::vector<Contour> load_glyph_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open glyph file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_path(buf.str());
    } catch (const ParseError &e) {
        throw ParseError(path.string() + ": " + e.message(), e.line(), e.column());
    }
}

} // namespace mig
