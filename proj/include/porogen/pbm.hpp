#pragma once

// Plain (ASCII) PBM "P1" images plus a JSON sidecar. Pixel 1 is black, which
// is grain; the writer states this in a header comment.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "porogen/error.hpp"
#include "porogen/grid.hpp"

namespace porogen {

inline void write_pbm(std::ostream& os, const Image& img) {
    const int t = img.side();
    os << "P1\n# porogen: 1 = grain (solid), 0 = void\n" << t << ' ' << t << '\n';
    for (int i = 1; i <= t; ++i) {
        for (int j = 1; j <= t; ++j) {
            if (j > 1) os << ' ';
            os << int(img(i, j));
        }
        os << '\n';
    }
}

namespace detail {

// Skips whitespace and '#' comments.
inline void skip_pbm_space(std::istream& is) {
    for (;;) {
        int c = is.peek();
        if (c == EOF) return;
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            return;
        }
    }
}

inline int read_pbm_int(std::istream& is) {
    skip_pbm_space(is);
    int v = 0;
    if (!(is >> v)) fail(ErrorKind::io, "PBM: expected an integer in header");
    return v;
}

} // namespace detail

inline Image read_pbm(std::istream& is) {
    char magic[2] = {0, 0};
    detail::skip_pbm_space(is);
    is.read(magic, 2);
    if (!is || magic[0] != 'P' || magic[1] != '1') fail(ErrorKind::io, "PBM: only plain 'P1' images are supported");
    const int width = detail::read_pbm_int(is);
    const int height = detail::read_pbm_int(is);
    if (width != height || width < 1) fail(ErrorKind::io, "PBM: image must be square and non-empty");
    std::vector<std::uint8_t> px;
    px.reserve(std::size_t(width) * height);
    while (px.size() < std::size_t(width) * height) {
        detail::skip_pbm_space(is);
        int c = is.get();
        if (c == '0' || c == '1') px.push_back(static_cast<std::uint8_t>(c - '0'));
        else fail(ErrorKind::io, "PBM: truncated or malformed raster");
    }
    return Image(width, std::move(px));
}

inline void save_pbm(const std::filesystem::path& path, const Image& img) {
    std::ofstream os(path);
    if (!os) fail(ErrorKind::io, "cannot write " + path.string());
    write_pbm(os, img);
}

inline Image load_pbm(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorKind::io, "cannot read " + path.string());
    return read_pbm(is);
}

/// Metadata stored next to each image as <stem>.json.
struct Sidecar {
    int t = 0;
    int w = 0;
    std::uint64_t seed = 0;
    std::optional<long> d_pred;   // surrogate prediction
    std::optional<double> d_true; // PDE coefficient, quantized scale [0, 100]
    nlohmann::json extra = nlohmann::json::object();
};

inline nlohmann::json to_json(const Sidecar& s) {
    nlohmann::json j = s.extra;
    j["t"] = s.t;
    j["w"] = s.w;
    j["seed"] = s.seed;
    j["d_pred"] = s.d_pred ? nlohmann::json(*s.d_pred) : nlohmann::json(nullptr);
    j["d_true"] = s.d_true ? nlohmann::json(*s.d_true) : nlohmann::json(nullptr);
    return j;
}

inline Sidecar sidecar_from_json(const nlohmann::json& j) {
    Sidecar s;
    try {
        s.t = j.at("t").get<int>();
        s.w = j.at("w").get<int>();
        s.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("d_pred") && !j["d_pred"].is_null()) s.d_pred = j["d_pred"].get<long>();
        if (j.contains("d_true") && !j["d_true"].is_null()) s.d_true = j["d_true"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::io, std::string("sidecar: ") + e.what());
    }
    s.extra = j;
    for (const char* key : {"t", "w", "seed", "d_pred", "d_true"}) s.extra.erase(key);
    return s;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& image_path) {
    auto p = image_path;
    return p.replace_extension(".json");
}

inline void save_sidecar(const std::filesystem::path& path, const Sidecar& s) {
    std::ofstream os(path);
    if (!os) fail(ErrorKind::io, "cannot write " + path.string());
    os << to_json(s).dump(2) << '\n';
}

inline std::optional<Sidecar> load_sidecar(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) return std::nullopt;
    try {
        return sidecar_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::io, "sidecar " + path.string() + ": " + e.what());
    }
}

} // namespace porogen
