#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dcirc {

// Mixed-radix addressing over an ordered variable scope. The LAST position
// varies fastest; this single convention fixes the layout of CPT rows,
// factor cells, policy tables and strategy digits everywhere.
class ScopeIndexer {
 public:
  ScopeIndexer() = default;
  ScopeIndexer(std::vector<int> vars, std::vector<int> cards);

  std::size_t size() const { return size_; }
  bool empty() const { return vars_.empty(); }
  const std::vector<int>& vars() const { return vars_; }
  const std::vector<int>& cards() const { return cards_; }
  int position_of(int var) const;  // -1 if absent

  std::size_t index(std::span<const int> states) const;
  std::vector<int> decode(std::size_t idx) const;
  void decode_into(std::size_t idx, std::span<int> out) const;

 private:
  std::vector<int> vars_;
  std::vector<int> cards_;
  std::size_t size_ = 1;
};

// Overflow-checked helpers for strategy and joint-size arithmetic.
// Throw SizeCapError on overflow.
std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b);
std::uint64_t checked_pow(std::uint64_t base, std::uint64_t exp);

}  // namespace dcirc
