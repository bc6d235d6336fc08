#include "padiff/png.hpp"

#include "padiff/npz.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace padiff {

namespace {

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void write_chunk(std::vector<uint8_t>& out, const char type[4],
                 const std::vector<uint8_t>& data) {
    put_u32_be(out, static_cast<uint32_t>(data.size()));
    std::vector<uint8_t> body(type, type + 4);
    body.insert(body.end(), data.begin(), data.end());
    out.insert(out.end(), body.begin(), body.end());
    put_u32_be(out, crc32_bytes(body.data(), body.size()));
}

}  // namespace

void write_png_gray(const std::string& path, const ImageF& image) {
    const int h = static_cast<int>(image.rows());
    const int w = static_cast<int>(image.cols());
    if (h < 1 || w < 1) throw std::invalid_argument("write_png_gray: empty image");

    // filter byte 0 + one byte per pixel, row-major
    std::vector<uint8_t> raw(static_cast<size_t>(h) * (w + 1));
    for (int r = 0; r < h; ++r) {
        uint8_t* row = raw.data() + static_cast<size_t>(r) * (w + 1);
        row[0] = 0;
        for (int c = 0; c < w; ++c) {
            float v = std::min(1.0f, std::max(0.0f, image(r, c)));
            row[1 + c] = static_cast<uint8_t>(std::lround(v * 255.0f));
        }
    }

    uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> comp(comp_size);
    if (compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()),
                  Z_BEST_COMPRESSION) != Z_OK)
        throw std::runtime_error("write_png_gray: deflate failed");
    comp.resize(comp_size);

    std::vector<uint8_t> out{0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(w));
    put_u32_be(ihdr, static_cast<uint32_t>(h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    write_chunk(out, "IHDR", ihdr);
    write_chunk(out, "IDAT", comp);
    write_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_png_gray: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
}

namespace {

void draw_line(ImageF& img, double r0, double c0, double r1, double c1, float level) {
    int steps = static_cast<int>(std::max(std::abs(r1 - r0), std::abs(c1 - c0))) + 1;
    for (int i = 0; i <= steps; ++i) {
        double f = static_cast<double>(i) / steps;
        int r = static_cast<int>(std::lround(r0 + f * (r1 - r0)));
        int c = static_cast<int>(std::lround(c0 + f * (c1 - c0)));
        if (r >= 0 && r < img.rows() && c >= 0 && c < img.cols()) img(r, c) = level;
    }
}

}  // namespace

ImageF render_line_chart(const std::vector<ChartSeries>& series, int width, int height) {
    if (series.empty()) throw std::invalid_argument("render_line_chart: no series");
    ImageF img = ImageF::Zero(height, width);

    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    bool first = true;
    for (const ChartSeries& s : series) {
        if (s.x.size() != s.y.size())
            throw std::invalid_argument("render_line_chart: x/y length mismatch");
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                x_min = x_max = s.x[i];
                y_min = y_max = s.y[i];
                first = false;
            }
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, s.y[i]);
            y_max = std::max(y_max, s.y[i]);
        }
    }
    if (x_max == x_min) x_max = x_min + 1;
    if (y_max == y_min) y_max = y_min + 1;

    const int margin = 24;
    auto col_of = [&](double x) {
        return margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin);
    };
    auto row_of = [&](double y) {
        return height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin);
    };

    draw_line(img, height - margin, margin, height - margin, width - margin, 0.5f);
    draw_line(img, margin, margin, height - margin, margin, 0.5f);

    for (size_t si = 0; si < series.size(); ++si) {
        float level = 1.0f - 0.25f * (static_cast<float>(si % 3));
        const ChartSeries& s = series[si];
        for (size_t i = 0; i + 1 < s.x.size(); ++i)
            draw_line(img, row_of(s.y[i]), col_of(s.x[i]), row_of(s.y[i + 1]),
                      col_of(s.x[i + 1]), level);
        // legend tick: short horizontal stroke per series
        double lr = margin / 2.0 + 4.0 * static_cast<double>(si);
        draw_line(img, lr, margin, lr, margin + 20, level);
    }
    return img;
}

}  // namespace padiff
