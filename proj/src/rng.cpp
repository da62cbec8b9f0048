#include "nsgp/rng.hpp"

namespace nsgp {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngSeed derive_seed(RngSeed root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(root.value);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return RngSeed{h};
}

Rng make_rng(RngSeed root, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(root, path).value);
}

}  // namespace nsgp
