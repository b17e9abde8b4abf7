#pragma once

#include "gait/optflow/flow.hpp"

namespace gait::reference {

/// Polynomial expansion by direct 2-D weighted sums per pixel, serial.
optflow::PolyExpansion poly_expand(const std::vector<double>& image, std::size_t width, std::size_t height,
                                   std::size_t n, double sigma);

}  // namespace gait::reference
