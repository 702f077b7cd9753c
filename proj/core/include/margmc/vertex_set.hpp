#pragma once

#include <bit>
#include <cstdint>
#include <vector>

namespace margmc {

/// Set of vertex indices stored as a bit mask (bit v set <=> vertex v present).
/// Graphs here are small; 32 vertices is far beyond what the samplers can handle.
class VertexSet {
 public:
  constexpr VertexSet() = default;
  constexpr explicit VertexSet(std::uint32_t bits) : bits_(bits) {}

  static constexpr VertexSet single(int v) { return VertexSet(1u << v); }
  static constexpr VertexSet first_n(int n) {
    return VertexSet(n >= 32 ? ~0u : ((1u << n) - 1u));
  }

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool contains(int v) const { return (bits_ >> v) & 1u; }
  constexpr bool contains(VertexSet other) const {
    return (other.bits_ & ~bits_) == 0;
  }
  constexpr bool intersects(VertexSet other) const {
    return (bits_ & other.bits_) != 0;
  }

  constexpr VertexSet with(int v) const { return VertexSet(bits_ | (1u << v)); }
  constexpr VertexSet without(int v) const {
    return VertexSet(bits_ & ~(1u << v));
  }

  constexpr VertexSet operator|(VertexSet o) const {
    return VertexSet(bits_ | o.bits_);
  }
  constexpr VertexSet operator&(VertexSet o) const {
    return VertexSet(bits_ & o.bits_);
  }
  constexpr VertexSet operator-(VertexSet o) const {
    return VertexSet(bits_ & ~o.bits_);
  }
  constexpr bool operator==(const VertexSet&) const = default;

  /// Members in increasing index order.
  std::vector<int> members() const {
    std::vector<int> out;
    for (std::uint32_t b = bits_; b != 0; b &= b - 1) {
      out.push_back(std::countr_zero(b));
    }
    return out;
  }

  /// Lowest member; undefined on the empty set.
  constexpr int front() const { return std::countr_zero(bits_); }

 private:
  std::uint32_t bits_ = 0;
};

/// Order by cardinality, then lexicographically on the sorted member lists.
bool cardinality_lex_less(VertexSet a, VertexSet b);

}  // namespace margmc
