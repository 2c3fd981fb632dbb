#include "agcam/image.hpp"

#include "agcam/error.hpp"

#include <fstream>
#include <iterator>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace agcam {

namespace {

cv::Mat to_mat(const Image &image) {
    const int type = image.channels == 4 ? CV_8UC4 : CV_8UC3;
    cv::Mat view(image.height, image.width, type, const_cast<std::uint8_t *>(image.pixels.data()));
    return view.clone();
}

Image from_mat(const cv::Mat &mat) {
    Image out(mat.cols, mat.rows, mat.channels());
    cv::Mat contiguous = mat.isContinuous() ? mat : mat.clone();
    std::copy(contiguous.datastart, contiguous.dataend, out.pixels.begin());
    return out;
}

} // namespace

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {}

Image decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) {
        throw Error(ErrorCode::kImageDecodeError, "empty image buffer");
    }
    cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t *>(bytes.data()));
    cv::Mat bgr = cv::imdecode(buffer, cv::IMREAD_COLOR);
    if (bgr.empty()) {
        throw Error(ErrorCode::kImageDecodeError, "unrecognized or corrupt image data");
    }
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    return from_mat(rgb);
}

Image load_image(const std::filesystem::path &path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file_bytes(path);
    } catch (const Error &e) {
        throw Error(ErrorCode::kImageDecodeError, e.what());
    }
    return decode_image(bytes);
}

std::vector<std::uint8_t> encode_png(const Image &image) {
    if (image.empty() || (image.channels != 3 && image.channels != 4)) {
        throw Error(ErrorCode::kPreconditionViolation, "encode_png needs a non-empty RGB or RGBA image");
    }
    cv::Mat mat = to_mat(image);
    cv::Mat bgr;
    cv::cvtColor(mat, bgr, image.channels == 4 ? cv::COLOR_RGBA2BGRA : cv::COLOR_RGB2BGR);
    std::vector<std::uint8_t> out;
    const std::vector<int> params = {cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imencode(".png", bgr, out, params)) {
        throw Error(ErrorCode::kIoError, "PNG encoding failed");
    }
    return out;
}

void write_png(const std::filesystem::path &path, const Image &image) {
    const auto bytes = encode_png(image);
    write_file_bytes(path, bytes);
}

Image resize_area(const Image &image, int width, int height) {
    if (width <= 0 || height <= 0) {
        throw Error(ErrorCode::kPreconditionViolation, "resize target must be positive");
    }
    if (image.width == width && image.height == height) {
        return image;
    }
    cv::Mat src = to_mat(image);
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_AREA);
    return from_mat(dst);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::kIoError, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path &path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::kIoError, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

} // namespace agcam
