#include "cmsa/imageio.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <stdexcept>

#include "cmsa/synth.hpp"

namespace cmsa {

namespace fs = std::filesystem;

Tensor read_frame_png(const std::string& path) {
  cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
  if (img.empty()) throw std::runtime_error("cannot read image: " + path);
  Tensor out = Tensor::zeros({3, img.rows, img.cols});
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x) {
      cv::Vec3b bgr = img.at<cv::Vec3b>(y, x);
      out.at3(0, y, x) = bgr[2] / 255.0;
      out.at3(1, y, x) = bgr[1] / 255.0;
      out.at3(2, y, x) = bgr[0] / 255.0;
    }
  return out;
}

Tensor read_mask_png(const std::string& path) {
  cv::Mat img = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (img.empty()) throw std::runtime_error("cannot read image: " + path);
  Tensor out = Tensor::zeros({img.rows, img.cols});
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x) out.at2(y, x) = img.at<std::uint8_t>(y, x) / 255.0;
  return out;
}

namespace {
std::uint8_t quantize(double v) {
  double q = std::clamp(v, 0.0, 1.0) * 255.0 + 0.5;
  return static_cast<std::uint8_t>(std::min(q, 255.0));
}
}  // namespace

void write_frame_png(const std::string& path, const Tensor& frame) {
  if (frame.shape.size() != 3 || frame.shape[0] != 3)
    throw std::invalid_argument("write_frame_png expects [3,H,W]");
  const int h = frame.shape[1], w = frame.shape[2];
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.at<cv::Vec3b>(y, x) = {quantize(frame.at3(2, y, x)), quantize(frame.at3(1, y, x)),
                                 quantize(frame.at3(0, y, x))};
  if (!cv::imwrite(path, img)) throw std::runtime_error("cannot write image: " + path);
}

void write_mask_png(const std::string& path, const Tensor& mask) {
  if (mask.shape.size() != 2) throw std::invalid_argument("write_mask_png expects [H,W]");
  const int h = mask.shape[0], w = mask.shape[1];
  cv::Mat img(h, w, CV_8UC1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at<std::uint8_t>(y, x) = quantize(mask.at2(y, x));
  if (!cv::imwrite(path, img)) throw std::runtime_error("cannot write image: " + path);
}

std::vector<std::string> list_pngs(const std::string& dir, const std::string& prefix) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string name = e.path().filename().string();
    if (e.path().extension() != ".png") continue;
    if (!prefix.empty() && name.rfind(prefix, 0) != 0) continue;
    out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_overlay_png(const std::string& path, const Tensor& frame, const Tensor& prob) {
  if (frame.shape.size() != 3 || prob.shape.size() != 2 || frame.shape[1] != prob.shape[0] ||
      frame.shape[2] != prob.shape[1])
    throw std::invalid_argument("overlay: frame/prob shape mismatch");
  const int h = prob.shape[0], w = prob.shape[1];
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.at<cv::Vec3b>(y, x) = {quantize(frame.at3(2, y, x)), quantize(frame.at3(1, y, x)),
                                 quantize(frame.at3(0, y, x))};
  cv::Mat bin(h, w, CV_8UC1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) bin.at<std::uint8_t>(y, x) = prob.at2(y, x) >= 0.5 ? 255 : 0;
  std::vector<std::vector<cv::Point>> contours;
  cv::findContours(bin, contours, cv::RETR_LIST, cv::CHAIN_APPROX_NONE);
  cv::drawContours(img, contours, -1, cv::Scalar(0, 0, 255), 1);
  if (!cv::imwrite(path, img)) throw std::runtime_error("cannot write image: " + path);
}

void export_clip(const VideoClip& clip, const SynthConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  char name[32];
  for (int t = 0; t < clip.length(); ++t) {
    std::snprintf(name, sizeof(name), "frame_%03d.png", t);
    write_frame_png((fs::path(dir) / name).string(), clip.frames[t]);
    std::snprintf(name, sizeof(name), "mask_%03d.png", t);
    write_mask_png((fs::path(dir) / name).string(), clip.masks[t]);
  }
  nlohmann::json meta;
  meta["height"] = cfg.height;
  meta["width"] = cfg.width;
  meta["num_frames"] = clip.length();
  meta["contrast"] = cfg.contrast;
  meta["motion_amplitude"] = cfg.motion_amplitude;
  meta["scale_jitter"] = cfg.scale_jitter;
  meta["noise_sigma"] = cfg.noise_sigma;
  meta["seed"] = cfg.seed;
  std::vector<std::string> roles;
  for (Role r : clip.roles) roles.push_back(role_name(r));
  meta["roles"] = roles;
  meta["timestamps"] = clip.timestamps;
  std::ofstream out(fs::path(dir) / "meta.json");
  out << meta.dump(2) << "\n";
}

}  // namespace cmsa
