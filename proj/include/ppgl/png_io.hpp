#pragma once

#include <string>

#include "ppgl/stain.hpp"

namespace ppgl {

// 8-bit PNG round trip for the CLI surface. Gray and RGBA inputs are
// expanded/flattened to RGB; writing quantizes with round-to-nearest.
RasterImage read_png(const std::string& path);
void write_png(const RasterImage& image, const std::string& path);

}  // namespace ppgl
