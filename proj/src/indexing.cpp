#include "dcirc/indexing.hpp"

#include <cassert>

#include "dcirc/errors.hpp"

namespace dcirc {

ScopeIndexer::ScopeIndexer(std::vector<int> vars, std::vector<int> cards)
    : vars_(std::move(vars)), cards_(std::move(cards)) {
  assert(vars_.size() == cards_.size());
  std::uint64_t size = 1;
  for (int c : cards_) {
    assert(c > 0);
    size = checked_mul(size, static_cast<std::uint64_t>(c));
  }
  size_ = static_cast<std::size_t>(size);
}

int ScopeIndexer::position_of(int var) const {
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i] == var) return static_cast<int>(i);
  return -1;
}

std::size_t ScopeIndexer::index(std::span<const int> states) const {
  assert(states.size() == vars_.size());
  std::size_t idx = 0;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    assert(states[i] >= 0 && states[i] < cards_[i]);
    idx = idx * static_cast<std::size_t>(cards_[i]) + static_cast<std::size_t>(states[i]);
  }
  return idx;
}

std::vector<int> ScopeIndexer::decode(std::size_t idx) const {
  std::vector<int> out(vars_.size());
  decode_into(idx, out);
  return out;
}

void ScopeIndexer::decode_into(std::size_t idx, std::span<int> out) const {
  assert(out.size() == vars_.size());
  for (std::size_t i = vars_.size(); i-- > 0;) {
    auto c = static_cast<std::size_t>(cards_[i]);
    out[i] = static_cast<int>(idx % c);
    idx /= c;
  }
  assert(idx == 0);
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > UINT64_MAX / a)
    throw SizeCapError("size arithmetic overflows 64 bits");
  return a * b;
}

std::uint64_t checked_pow(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 0; i < exp; ++i) r = checked_mul(r, base);
  return r;
}

}  // namespace dcirc
