#pragma once

// Modeled-city templates. The released census-block dual graphs are not
// bundled; each template here is an irregular stand-in graph (a grid with
// holes punched out and uneven block populations) carrying the real city's
// total population, subgroup-Q population and district count exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string_view>

#include "segfair/city_graph.hpp"
#include "segfair/citygen.hpp"
#include "segfair/rng.hpp"

namespace segfair {

struct TemplateInfo {
    std::string_view name;
    Population total_pop;
    Population total_q;
    int districts;
};

// 2010 census figures for the four modeled cities.
inline constexpr std::array<TemplateInfo, 4> kModeledCities{{
    {"albuquerque", 545'711, 254'834, 9},
    {"charlotte", 735'847, 268'404, 7},
    {"pittsburgh", 305'704, 84'819, 9},
    {"minneapolis", 382'578, 79'967, 13},
}};

inline std::optional<TemplateInfo> find_template(std::string_view name) {
    for (const auto& t : kModeledCities) {
        if (t.name == name) return t;
    }
    return std::nullopt;
}

inline CityGraph build_stand_in_template(const TemplateInfo& info, std::uint64_t seed, int rows = 34,
                                         int cols = 36) {
    Rng rng(seed);
    const auto cells = static_cast<std::size_t>(rows) * cols;
    std::vector<char> keep(cells, 1);
    // Punch a handful of round holes (parks, rivers, unpopulated land).
    const int holes = static_cast<int>(uniform_int(rng, 3, 6));
    for (int h = 0; h < holes; ++h) {
        const double cr = uniform_real(rng, 0, rows), cc = uniform_real(rng, 0, cols);
        const double radius = uniform_real(rng, 1.5, 3.5);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                if (std::hypot(r - cr, c - cc) <= radius) keep[static_cast<std::size_t>(r) * cols + c] = 0;
            }
        }
    }
    // Keep the largest remaining rook-connected piece.
    std::vector<int> label(cells, -1);
    std::vector<std::size_t> piece_size;
    for (std::size_t s = 0; s < cells; ++s) {
        if (!keep[s] || label[s] >= 0) continue;
        const int id = static_cast<int>(piece_size.size());
        piece_size.push_back(0);
        std::vector<std::size_t> stack{s};
        label[s] = id;
        while (!stack.empty()) {
            const auto x = stack.back();
            stack.pop_back();
            ++piece_size[id];
            const int r = static_cast<int>(x / cols), c = static_cast<int>(x % cols);
            const std::array<std::pair<int, int>, 4> nbrs{{{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}}};
            for (auto [nr, nc] : nbrs) {
                if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
                const auto y = static_cast<std::size_t>(nr) * cols + nc;
                if (keep[y] && label[y] < 0) {
                    label[y] = id;
                    stack.push_back(y);
                }
            }
        }
    }
    const int main_piece = static_cast<int>(std::max_element(piece_size.begin(), piece_size.end()) - piece_size.begin());
    std::vector<VertexId> dense(cells, -1);
    std::vector<std::size_t> cell_of;
    for (std::size_t x = 0; x < cells; ++x) {
        if (label[x] == main_piece) {
            dense[x] = static_cast<VertexId>(cell_of.size());
            cell_of.push_back(x);
        }
    }
    // Uneven block sizes: ~6% empty blocks, log-normal spread elsewhere;
    // scaled to the exact city total by largest remainder.
    std::lognormal_distribution<double> spread(0.0, 0.8);
    std::vector<double> raw(cell_of.size());
    for (auto& w : raw) w = uniform_real(rng, 0.0, 1.0) < 0.06 ? 0.0 : spread(rng);
    const double raw_sum = std::accumulate(raw.begin(), raw.end(), 0.0);
    std::vector<Population> pop(raw.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    Population assigned = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double exact = raw[i] / raw_sum * static_cast<double>(info.total_pop);
        pop[i] = static_cast<Population>(std::floor(exact));
        assigned += pop[i];
        remainders.push_back({exact - std::floor(exact), i});
    }
    std::sort(remainders.begin(), remainders.end(),
              [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    for (std::size_t i = 0; assigned < info.total_pop; ++i, ++assigned) ++pop[remainders[i % remainders.size()].second];

    std::vector<VertexRecord> vertices;
    vertices.reserve(cell_of.size());
    for (std::size_t i = 0; i < cell_of.size(); ++i) vertices.push_back({static_cast<long long>(cell_of[i]), pop[i], 0});
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < cell_of.size(); ++i) {
        const auto x = cell_of[i];
        const int r = static_cast<int>(x / cols), c = static_cast<int>(x % cols);
        if (c + 1 < cols && dense[x + 1] >= 0) edges.push_back({static_cast<VertexId>(i), dense[x + 1]});
        if (r + 1 < rows && dense[x + cols] >= 0) edges.push_back({static_cast<VertexId>(i), dense[x + cols]});
    }
    CityGraph shape(std::string(info.name), std::move(vertices), std::move(edges));

    // Initial Q layout: uniform weights, batch placement; exact citywide Q.
    GenSpec spec;
    WeightField flat;
    flat.weight.assign(shape.size(), 1.0);
    flat.floor = 1.0;
    return place_populations(shape, flat, flat, info.total_q, spec, rng);
}

}  // namespace segfair
