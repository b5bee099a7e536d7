#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <stdexcept>
#include <string>

#include "memlab/bundle.hpp"
#include "memlab/field.hpp"

namespace memlab {

// Flat binary field layout: int32 n1, int32 n2, float64 L1, float64 L2,
// then n1*n2 row-major float64 values. Little-endian throughout (native on
// every supported target; asserted at compile time below).
static_assert(std::endian::native == std::endian::little,
              "field serialization assumes a little-endian host");

inline void write_field_binary(const Field& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    const auto& g = *f.grid;
    int32_t n1 = g.n1, n2 = g.n2;
    out.write(reinterpret_cast<const char*>(&n1), sizeof(n1));
    out.write(reinterpret_cast<const char*>(&n2), sizeof(n2));
    out.write(reinterpret_cast<const char*>(&g.L1), sizeof(double));
    out.write(reinterpret_cast<const char*>(&g.L2), sizeof(double));
    out.write(reinterpret_cast<const char*>(f.v.data()),
              static_cast<std::streamsize>(f.v.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline Field read_field_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    int32_t n1 = 0, n2 = 0;
    double L1 = 0, L2 = 0;
    in.read(reinterpret_cast<char*>(&n1), sizeof(n1));
    in.read(reinterpret_cast<char*>(&n2), sizeof(n2));
    in.read(reinterpret_cast<char*>(&L1), sizeof(L1));
    in.read(reinterpret_cast<char*>(&L2), sizeof(L2));
    auto g = make_grid(n1, n2, L1, L2);
    std::vector<double> data(g->size());
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated field file: " + path);
    return field_from_data(g, std::move(data));
}

inline void write_field_csv(const Field& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    const auto& g = *f.grid;
    out << "x1,x2,value\n" << std::setprecision(17);
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j)
            out << g.x1(i) << ',' << g.x2(j) << ',' << f.at(i, j) << '\n';
}

// Trajectory dump: one binary file per stored component/snapshot plus an
// index CSV. stride > 1 subsamples the time axis.
inline void write_trajectory(const SpacetimeField& u, const std::string& dir,
                             const std::string& tag, int stride = 1) {
    std::ofstream index(dir + "/" + tag + "_index.csv");
    if (!index) throw std::runtime_error("cannot open trajectory index in " + dir);
    index << "node,t,component,file\n" << std::setprecision(17);
    for (int j = 0; j < u.nodes(); j += stride) {
        for (int m = 0; m < u.components(); ++m) {
            std::string name = tag + "_n" + std::to_string(j) + "_c" + std::to_string(m) + ".bin";
            write_field_binary(u.snaps[j][m], dir + "/" + name);
            index << j << ',' << u.time(j) << ',' << m << ',' << name << '\n';
        }
    }
}

}  // namespace memlab
