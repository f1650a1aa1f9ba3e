#pragma once

// Square binary grids. Cells are addressed 1-based as (row, column); pixel
// value 1 is grain (solid), 0 is void.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "porogen/error.hpp"

namespace porogen {

struct Cell {
    int i = 1;
    int j = 1;

    friend auto operator<=>(const Cell&, const Cell&) = default;
    friend bool operator==(const Cell&, const Cell&) = default;
};

inline bool valid(Cell c, int t) {
    return c.i >= 1 && c.i <= t && c.j >= 1 && c.j <= t;
}

inline bool on_border(Cell c, int t) {
    return c.i == 1 || c.j == 1 || c.i == t || c.j == t;
}

/// Row-major linear index of a cell, 0-based.
inline std::size_t linear(Cell c, int t) {
    return static_cast<std::size_t>(c.i - 1) * t + static_cast<std::size_t>(c.j - 1);
}

inline Cell cell_at(std::size_t index, int t) {
    return Cell{static_cast<int>(index / t) + 1, static_cast<int>(index % t) + 1};
}

inline int manhattan(Cell a, Cell b) {
    return std::abs(a.i - b.i) + std::abs(a.j - b.j);
}

inline int chebyshev(Cell a, Cell b) {
    return std::max(std::abs(a.i - b.i), std::abs(a.j - b.j));
}

inline std::string to_string(Cell c) {
    return "(" + std::to_string(c.i) + "," + std::to_string(c.j) + ")";
}

/// Side-sharing neighbours inside a t x t grid, in the order up, left, right, down.
inline std::vector<Cell> neighbors(Cell c, int t) {
    require(t >= 1 && valid(c, t), "neighbors: cell " + to_string(c) + " outside grid of side " +
                                       std::to_string(t));
    std::vector<Cell> out;
    out.reserve(4);
    if (c.i > 1) out.push_back({c.i - 1, c.j});
    if (c.j > 1) out.push_back({c.i, c.j - 1});
    if (c.j < t) out.push_back({c.i, c.j + 1});
    if (c.i < t) out.push_back({c.i + 1, c.j});
    return out;
}

/// Calls f(Cell) for each side-neighbour without allocating.
template <class F>
void for_each_neighbor(Cell c, int t, F&& f) {
    if (c.i > 1) f(Cell{c.i - 1, c.j});
    if (c.j > 1) f(Cell{c.i, c.j - 1});
    if (c.j < t) f(Cell{c.i, c.j + 1});
    if (c.i < t) f(Cell{c.i + 1, c.j});
}

class Image {
public:
    Image() = default;

    explicit Image(int t) : t_(t), pixels_(checked_area(t), 0) {}

    Image(int t, std::vector<std::uint8_t> pixels) : t_(t), pixels_(std::move(pixels)) {
        require(pixels_.size() == checked_area(t), "Image: expected " +
                                                       std::to_string(checked_area(t)) +
                                                       " pixels, got " +
                                                       std::to_string(pixels_.size()));
        for (auto p : pixels_) require(p <= 1, "Image: pixel values must be 0 or 1");
    }

    int side() const { return t_; }
    std::size_t size() const { return pixels_.size(); }

    std::uint8_t operator()(int i, int j) const { return pixels_[linear({i, j}, t_)]; }
    std::uint8_t operator[](Cell c) const { return pixels_[linear(c, t_)]; }

    void set(Cell c, std::uint8_t v) {
        require(valid(c, t_) && v <= 1, "Image::set: bad cell or value");
        pixels_[linear(c, t_)] = v;
    }

    const std::vector<std::uint8_t>& pixels() const { return pixels_; }

    std::size_t grain_area() const {
        std::size_t n = 0;
        for (auto p : pixels_) n += p;
        return n;
    }

    Image mirrored_rows() const {
        Image out(t_);
        for (int i = 1; i <= t_; ++i)
            for (int j = 1; j <= t_; ++j) out.pixels_[linear({i, j}, t_)] = (*this)(t_ + 1 - i, j);
        return out;
    }

    Image mirrored_cols() const {
        Image out(t_);
        for (int i = 1; i <= t_; ++i)
            for (int j = 1; j <= t_; ++j) out.pixels_[linear({i, j}, t_)] = (*this)(i, t_ + 1 - j);
        return out;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    static std::size_t checked_area(int t) {
        require(t >= 1, "Image: side length must be positive");
        return static_cast<std::size_t>(t) * static_cast<std::size_t>(t);
    }

    int t_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Per-pixel grain identity: 0 = void, r in [1..w] = grain r. Same layout as Image.
using GrainLabels = std::vector<int>;

} // namespace porogen
