#ifndef PADIFF_PNG_HPP
#define PADIFF_PNG_HPP

// Minimal 8-bit grayscale PNG output plus a small line-chart renderer
// for loss curves and sweep results.

#include "padiff/core.hpp"

#include <string>
#include <vector>

namespace padiff {

// Clamps to [0,1] and quantizes to 8 bits.
void write_png_gray(const std::string& path, const ImageF& image);

struct ChartSeries {
    std::string label;
    std::vector<double> x, y;
};

// White-on-black chart with axes; series are drawn in distinct gray
// levels, labels listed top-left.
ImageF render_line_chart(const std::vector<ChartSeries>& series, int width = 640,
                         int height = 400);

}  // namespace padiff

#endif
