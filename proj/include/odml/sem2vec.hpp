#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace odml {

// Row-major grid of semantic class identifiers, each in [0, n_sem).
struct SegMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t n_sem = 0;
  std::vector<std::size_t> cells;

  // Throws ValidationError if cells length or any id breaks the invariants.
  void validate() const;
};

// Binary presence vector: values[i] = 1 iff class i appears on any cell.
struct SemVector {
  std::vector<double> values;
};

SemVector sem2vec(const SegMap& map);

// Text format: first line "H W N_SEM", then H lines of W space-separated ids.
SegMap parse_segmap(const std::string& text, const std::string& origin = "<string>");
SegMap load_segmap(const std::string& path);
void save_segmap(const std::string& path, const SegMap& map);

}  // namespace odml
