#include "netsr/dataset.hpp"

#include <stdexcept>
#include <string>

namespace netsr {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Test:
      return "test";
    case Split::Full:
      return "full";
  }
  return "?";
}

void Dataset::validate() const {
  if (y.empty()) throw std::invalid_argument("dataset is empty");
  if (y.size() != x.rows) {
    throw std::invalid_argument("dataset has " + std::to_string(x.rows) + " input rows but " +
                                std::to_string(y.size()) + " targets");
  }
  if (x.cols == 0) throw std::invalid_argument("dataset has no input columns");
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices, Split tag) const {
  Dataset out;
  out.x = Matrix(indices.size(), x.cols);
  out.y.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t src = indices.at(r);
    for (std::size_t c = 0; c < x.cols; ++c) out.x(r, c) = x(src, c);
    out.y.push_back(y.at(src));
  }
  out.split = tag;
  out.noise_level = noise_level;
  out.seed = seed;
  return out;
}

}  // namespace netsr
