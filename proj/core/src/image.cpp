#include "contrack/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "contrack/tensor.hpp"

namespace contrack {

double iou(const Box& a, const Box& b) {
    double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const Box& a, const Box& b) {
    double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    double cw = std::max(a.x + a.w, b.x + b.w) - std::min(a.x, b.x);
    double ch = std::max(a.y + a.h, b.y + b.h) - std::min(a.y, b.y);
    double hull = cw * ch;
    double v = (uni > 0.0 ? inter / uni : 0.0);
    if (hull > 0.0) v -= (hull - uni) / hull;
    return v;
}

Box clamp_box(const Box& b, double width, double height, double min_side) {
    Box r = b;
    r.w = std::clamp(r.w, min_side, width);
    r.h = std::clamp(r.h, min_side, height);
    r.x = std::clamp(r.x, 0.0, width - r.w);
    r.y = std::clamp(r.y, 0.0, height - r.h);
    return r;
}

double Image::sample(int c, double y, double x, const double fill[3]) const {
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    double fx = x - x0, fy = y - y0;
    auto px = [&](int yy, int xx) {
        if (yy < 0 || yy >= height || xx < 0 || xx >= width) return fill[c];
        return at(c, yy, xx);
    };
    double top = px(y0, x0) * (1.0 - fx) + px(y0, x0 + 1) * fx;
    double bot = px(y0 + 1, x0) * (1.0 - fx) + px(y0 + 1, x0 + 1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

Image load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "load_ppm: cannot open " + path);
    std::string magic;
    in >> magic;
    check(magic == "P6", "load_ppm: " + path + " is not a binary PPM (P6)");
    auto skip_ws = [&in]() {
        while (true) {
            int ch = in.peek();
            if (ch == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(ch)) {
                in.get();
            } else {
                break;
            }
        }
    };
    skip_ws();
    int w, h, maxv;
    in >> w;
    skip_ws();
    in >> h;
    skip_ws();
    in >> maxv;
    check(in.good() && w > 0 && h > 0 && maxv == 255, "load_ppm: bad header in " + path);
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    check(in.gcount() == static_cast<std::streamsize>(raw.size()),
          "load_ppm: truncated pixel data in " + path);
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
    return img;
}

void save_ppm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "save_ppm: cannot open " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(img.width) * img.height * 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                raw[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

Image hflip(const Image& img) {
    Image out(img.width, img.height);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    return out;
}

Box CropAffine::box_to_frame(const Box& b) const {
    return {to_frame_x(b.x), to_frame_y(b.y), b.w * scale, b.h * scale};
}

Box CropAffine::box_to_crop(const Box& b) const {
    return {to_crop_x(b.x), to_crop_y(b.y), b.w / scale, b.h / scale};
}

CropResult crop_region(const Image& frame, const Box& box, double k, int out_res) {
    check(box.w > 0.0 && box.h > 0.0, "crop_region: zero-area box");
    check(k >= 1.0, "crop_region: scale factor must be >= 1");
    check(out_res > 0, "crop_region: bad output resolution");
    double side = k * std::sqrt(box.w * box.h);
    double x0 = box.cx() - side / 2.0;
    double y0 = box.cy() - side / 2.0;

    double fill[3];
    for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        std::size_t base = static_cast<std::size_t>(c) * frame.width * frame.height;
        for (std::size_t i = 0; i < static_cast<std::size_t>(frame.width) * frame.height; ++i)
            s += frame.pix[base + i];
        fill[c] = s / (static_cast<double>(frame.width) * frame.height);
    }

    CropResult res;
    res.crop = Image(out_res, out_res);
    res.map.scale = side / out_res;
    // crop pixel (u+0.5) center maps to frame x0 + (u+0.5)*scale
    res.map.dx = x0;
    res.map.dy = y0;
    for (int c = 0; c < 3; ++c)
        for (int v = 0; v < out_res; ++v)
            for (int u = 0; u < out_res; ++u) {
                double fx = res.map.to_frame_x(u + 0.5) - 0.5;
                double fy = res.map.to_frame_y(v + 0.5) - 0.5;
                res.crop.at(c, v, u) = frame.sample(c, fy, fx, fill);
            }
    return res;
}

}  // namespace contrack
