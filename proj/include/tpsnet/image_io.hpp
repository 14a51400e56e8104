#pragma once

#include <Eigen/Dense>
#include <string>

#include "tpsnet/dataset.hpp"

namespace tpsnet {

// 8-bit PNG/JPEG via OpenCV imgcodecs. Throws std::runtime_error on
// unreadable or undecodable files.
Image load_image_file(const std::string& path);
void save_image_png(const Image& image, const std::string& path);
// Grayscale matrix in [0,1], written as values*255 rounded.
void save_gray_png(const Eigen::MatrixXd& values, const std::string& path);

}  // namespace tpsnet
