#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "dengue/matrix.hpp"
#include "dengue/nn.hpp"

namespace dengue {

// Parameter snapshot layout, all integers and floats little-endian:
//
//   offset 0   8 bytes   magic "DNGSNAP1"
//   offset 8   u32       number of tensors n
//   offset 12  n x (u32 rows, u32 cols)   shape table
//   ...        raw IEEE-754 binary64 values, tensors in table order, each
//              tensor row-major
//
// Names are not stored; the JSON sidecar written next to a model fixes the
// architecture and therefore the tensor order.

void write_snapshot(std::ostream& out, std::span<const Parameter> params);
std::vector<Matrix> read_snapshot(std::istream& in);

/// Copies loaded values into an existing parameter set, checking shapes.
void restore_snapshot(std::span<Parameter> params, const std::vector<Matrix>& values);

}  // namespace dengue
