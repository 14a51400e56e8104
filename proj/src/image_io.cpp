#include "tpsnet/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <stdexcept>

namespace tpsnet {

Image load_image_file(const std::string& path) {
    cv::Mat mat = cv::imread(path, cv::IMREAD_COLOR);
    if (mat.empty())
        throw std::runtime_error("cannot decode image file: " + path);
    Image img;
    img.r.resize(mat.rows, mat.cols);
    img.g.resize(mat.rows, mat.cols);
    img.b.resize(mat.rows, mat.cols);
    for (int y = 0; y < mat.rows; ++y)
        for (int x = 0; x < mat.cols; ++x) {
            cv::Vec3b bgr = mat.at<cv::Vec3b>(y, x);
            img.b(y, x) = bgr[0] / 255.0;
            img.g(y, x) = bgr[1] / 255.0;
            img.r(y, x) = bgr[2] / 255.0;
        }
    return img;
}

namespace {
unsigned char to_byte(double v) {
    double s = v * 255.0 + 0.5;
    if (s < 0.0) s = 0.0;
    if (s > 255.0) s = 255.0;
    return static_cast<unsigned char>(s);
}
}  // namespace

void save_image_png(const Image& image, const std::string& path) {
    cv::Mat mat(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            mat.at<cv::Vec3b>(y, x) =
                cv::Vec3b(to_byte(image.b(y, x)), to_byte(image.g(y, x)), to_byte(image.r(y, x)));
    if (!cv::imwrite(path, mat))
        throw std::runtime_error("cannot write image file: " + path);
}

void save_gray_png(const Eigen::MatrixXd& values, const std::string& path) {
    cv::Mat mat(static_cast<int>(values.rows()), static_cast<int>(values.cols()), CV_8UC1);
    for (int y = 0; y < mat.rows; ++y)
        for (int x = 0; x < mat.cols; ++x)
            mat.at<unsigned char>(y, x) = to_byte(values(y, x));
    if (!cv::imwrite(path, mat))
        throw std::runtime_error("cannot write image file: " + path);
}

}  // namespace tpsnet
