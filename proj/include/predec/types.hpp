#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace predec {

enum class Basis : std::uint8_t { X = 0, Z = 1 };

inline Basis other(Basis b) { return b == Basis::X ? Basis::Z : Basis::X; }
inline char basis_char(Basis b) { return b == Basis::X ? 'X' : 'Z'; }
Basis parse_basis(const std::string& s);

// 1-indexed grid coordinate, rows grow downward.
struct Coord {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

// Binary D x D x T grid. Storage is row, col, round with round fastest.
struct BitVolume {
  int D = 0;
  int T = 0;
  std::vector<std::uint8_t> bits;

  BitVolume() = default;
  BitVolume(int dim, int rounds)
      : D(dim), T(rounds), bits(static_cast<std::size_t>(dim) * dim * rounds, 0) {}

  // 0-based indices.
  std::size_t index(int r, int c, int t) const {
    return (static_cast<std::size_t>(r) * D + c) * T + t;
  }
  std::uint8_t& at(int r, int c, int t) { return bits[index(r, c, t)]; }
  std::uint8_t at(int r, int c, int t) const { return bits[index(r, c, t)]; }
  std::uint8_t& at(Coord q, int t) { return bits[index(q.row - 1, q.col - 1, t)]; }
  std::uint8_t at(Coord q, int t) const { return bits[index(q.row - 1, q.col - 1, t)]; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  void clear() { std::fill(bits.begin(), bits.end(), 0); }
  BitVolume& operator^=(const BitVolume& o);
  friend bool operator==(const BitVolume&, const BitVolume&) = default;
};

}  // namespace predec
