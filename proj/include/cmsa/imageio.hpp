#pragma once

#include <string>
#include <vector>

#include "cmsa/tensor.hpp"

namespace cmsa {

// PNG in/out. Frames are [3,H,W] in [0,1] (RGB), masks/probability maps are
// [H,W] in [0,1]; 8-bit quantization on write.
Tensor read_frame_png(const std::string& path);
Tensor read_mask_png(const std::string& path);  // grayscale / 255
void write_frame_png(const std::string& path, const Tensor& frame);
void write_mask_png(const std::string& path, const Tensor& mask);

// Sorted paths of files in dir matching the given filename prefix and a .png
// suffix.
std::vector<std::string> list_pngs(const std::string& dir, const std::string& prefix = "");

// Current frame with the 0.5-level contour of prob drawn in red.
void write_overlay_png(const std::string& path, const Tensor& frame, const Tensor& prob);

}  // namespace cmsa
