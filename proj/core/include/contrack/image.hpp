#pragma once

#include <string>
#include <vector>

namespace contrack {

/// Axis-aligned box, top-left corner + extents, in pixels.
struct Box {
    double x = 0, y = 0, w = 0, h = 0;

    double cx() const { return x + w / 2.0; }
    double cy() const { return y + h / 2.0; }
    double area() const { return w * h; }
    static Box from_center(double cx, double cy, double w, double h) {
        return {cx - w / 2.0, cy - h / 2.0, w, h};
    }
};

double iou(const Box& a, const Box& b);
double giou(const Box& a, const Box& b);
Box clamp_box(const Box& b, double width, double height, double min_side = 1.0);

/// Planar RGB image, values in [0,1], layout [channel][row][col].
struct Image {
    int width = 0, height = 0;
    std::vector<double> pix;

    Image() = default;
    Image(int w, int h) : width(w), height(h), pix(static_cast<std::size_t>(3) * w * h, 0.0) {}

    double& at(int c, int y, int x) {
        return pix[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return pix[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    /// Bilinear sample with out-of-bounds filled from `fill` (one value per channel).
    double sample(int c, double y, double x, const double fill[3]) const;
};

Image load_ppm(const std::string& path);
void save_ppm(const Image& img, const std::string& path);
Image hflip(const Image& img);

/// Similarity map between crop pixel coordinates and frame pixel coordinates:
/// frame = crop * scale + offset.
struct CropAffine {
    double scale = 1.0;
    double dx = 0.0, dy = 0.0;

    double to_frame_x(double cx) const { return cx * scale + dx; }
    double to_frame_y(double cy) const { return cy * scale + dy; }
    double to_crop_x(double fx) const { return (fx - dx) / scale; }
    double to_crop_y(double fy) const { return (fy - dy) / scale; }
    Box box_to_frame(const Box& b) const;
    Box box_to_crop(const Box& b) const;
};

struct CropResult {
    Image crop;
    CropAffine map;
};

/// Square crop of side k*sqrt(w*h) centered on the box, resampled to
/// out_res x out_res. Out-of-frame area takes the frame mean color.
CropResult crop_region(const Image& frame, const Box& box, double k, int out_res);

}  // namespace contrack
