#pragma once

#include <cstddef>
#include <vector>

namespace ridg {

// Per-element DG coefficient blocks: spatial coefficients Q (block size theta)
// or space-time prediction coefficients W (block size theta_t).
struct CoefficientField {
  long num_elements = 0;
  int block_size = 0;
  std::vector<double> data;

  CoefficientField() = default;
  CoefficientField(long n, int block)
      : num_elements(n), block_size(block),
        data(static_cast<std::size_t>(n) * block, 0.0) {}

  double* block(long i) { return data.data() + static_cast<std::size_t>(i) * block_size; }
  const double* block(long i) const {
    return data.data() + static_cast<std::size_t>(i) * block_size;
  }
};

}  // namespace ridg
