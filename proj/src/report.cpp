#include "biogan/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "biogan/checkpoint.hpp"
#include "biogan/error.hpp"

namespace biogan {
namespace {

using nlohmann::json;

const cv::Scalar kInk(40, 40, 40);
const cv::Scalar kGrid(225, 225, 225);
const std::array<cv::Scalar, 5> kSeriesColor = {cv::Scalar(180, 90, 30), cv::Scalar(40, 140, 40),
                                                cv::Scalar(30, 30, 200), cv::Scalar(20, 20, 20),
                                                cv::Scalar(150, 40, 150)};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void text(cv::Mat& img, const std::string& s, cv::Point at, double scale = 0.45) {
  cv::putText(img, s, at, cv::FONT_HERSHEY_SIMPLEX, scale, kInk, 1, cv::LINE_AA);
}

// Draws one series into the rectangle `box` with its own y range.
void panel(cv::Mat& img, cv::Rect box, const std::string& title, const std::vector<double>& ys,
           const cv::Scalar& color) {
  const cv::Rect plot(box.x + 70, box.y + 25, box.width - 90, box.height - 50);
  double lo = *std::min_element(ys.begin(), ys.end());
  double hi = *std::max_element(ys.begin(), ys.end());
  if (hi - lo < 1e-12 * std::max(1.0, std::fabs(hi))) {
    lo -= 0.5;
    hi += 0.5;
  }
  for (int k = 0; k <= 4; ++k) {
    const int y = plot.y + plot.height - k * plot.height / 4;
    cv::line(img, {plot.x, y}, {plot.x + plot.width, y}, kGrid, 1);
    text(img, num(lo + (hi - lo) * k / 4.0), {box.x + 4, y + 4}, 0.38);
  }
  cv::rectangle(img, plot, kInk, 1);
  text(img, title, {plot.x, box.y + 18}, 0.5);
  text(img, "0", {plot.x - 4, plot.y + plot.height + 16}, 0.38);
  text(img, std::to_string(ys.size() - 1), {plot.x + plot.width - 20, plot.y + plot.height + 16}, 0.38);

  std::vector<cv::Point> pts;
  const double n = std::max<std::size_t>(1, ys.size() - 1);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const int x = plot.x + static_cast<int>(std::lround(plot.width * (i / n)));
    const int y = plot.y + plot.height - static_cast<int>(std::lround(plot.height * (ys[i] - lo) / (hi - lo)));
    pts.push_back({x, y});
  }
  if (pts.size() == 1) {
    cv::circle(img, pts.front(), 3, color, cv::FILLED, cv::LINE_AA);
  } else {
    cv::polylines(img, pts, false, color, 1, cv::LINE_AA);
  }
}

void write_png(const cv::Mat& img, const std::filesystem::path& path) {
  std::vector<unsigned char> buf;
  if (!cv::imencode(".png", img, buf)) throw IoError("cannot encode " + path.string());
  write_file_atomic(path, std::string(buf.begin(), buf.end()));
}

double field(const json& o, const char* key, const std::string& where) {
  auto it = o.find(key);
  if (it == o.end()) throw ParseError(where + ": missing field '" + key + "'");
  if (!it->is_number()) throw ParseError(where + ": field '" + key + "' is not a number");
  return it->get<double>();
}

}  // namespace

std::vector<IterationRecord> parse_loss_log(const std::string& text, const std::string& source) {
  std::vector<IterationRecord> records;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(number);
    json o;
    try {
      o = json::parse(line);
    } catch (const json::parse_error&) {
      throw ParseError(where + ": malformed loss record");
    }
    if (!o.is_object()) throw ParseError(where + ": loss record must be an object");
    IterationRecord r;
    r.epoch = static_cast<int>(field(o, "epoch", where));
    r.index = static_cast<int>(field(o, "index", where));
    r.iteration = o.contains("iteration") ? static_cast<int>(field(o, "iteration", where)) : 0;
    r.losses.adversarial = field(o, "adversarial", where);
    r.losses.style = field(o, "style", where);
    r.losses.content = field(o, "content", where);
    r.losses.total = field(o, "total", where);
    r.losses.discriminator = field(o, "discriminator", where);
    r.wall_ms = field(o, "wall_ms", where);
    records.push_back(r);
  }
  if (records.empty()) throw ParseError(source + ": loss log holds no records");
  return records;
}

std::vector<std::filesystem::path> write_loss_report(const std::vector<IterationRecord>& records,
                                                     const std::filesystem::path& out_dir) {
  if (records.empty()) throw ArgumentError("no loss records to plot");
  std::filesystem::create_directories(out_dir);
  const std::array<const char*, 5> names = {"adversarial", "style", "content", "total", "discriminator"};
  std::array<std::vector<double>, 5> series;
  for (const auto& r : records) {
    const auto& l = r.losses;
    const double v[5] = {l.adversarial, l.style, l.content, l.total, l.discriminator};
    for (int s = 0; s < 5; ++s) series[s].push_back(v[s]);
  }

  const int panel_h = 180;
  cv::Mat img(panel_h * 5 + 30, 900, CV_8UC3, cv::Scalar(255, 255, 255));
  for (int s = 0; s < 5; ++s) {
    panel(img, cv::Rect(0, 10 + s * panel_h, img.cols, panel_h), names[s], series[s], kSeriesColor[s]);
  }
  text(img, "iteration", {img.cols / 2 - 30, img.rows - 8});
  const auto png = out_dir / "loss_curves.png";
  write_png(img, png);

  std::string csv = "iteration,epoch,index,adversarial,style,content,total,discriminator\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    csv += std::to_string(i) + "," + std::to_string(r.epoch) + "," + std::to_string(r.index);
    for (int s = 0; s < 5; ++s) csv += "," + exact(series[s][i]);
    csv += "\n";
  }
  const auto csv_path = out_dir / "loss_curves.csv";
  write_file_atomic(csv_path, csv);
  return {png, csv_path};
}

std::vector<std::filesystem::path> write_pr_report(const eval::MetricReport& report,
                                                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto steps = eval::precision_envelope(report.pr_curve);

  cv::Mat img(620, 620, CV_8UC3, cv::Scalar(255, 255, 255));
  const cv::Rect plot(70, 40, 520, 520);
  auto to_px = [&](double r, double p) {
    return cv::Point(plot.x + static_cast<int>(std::lround(r * plot.width)),
                     plot.y + plot.height - static_cast<int>(std::lround(p * plot.height)));
  };
  for (int k = 0; k <= 10; ++k) {
    const double v = k / 10.0;
    cv::line(img, to_px(v, 0), to_px(v, 1), kGrid, 1);
    cv::line(img, to_px(0, v), to_px(1, v), kGrid, 1);
    text(img, num(v), {plot.x - 34, to_px(0, v).y + 4}, 0.38);
    text(img, num(v), {to_px(v, 0).x - 8, plot.y + plot.height + 16}, 0.38);
  }
  cv::rectangle(img, plot, kInk, 1);
  for (const auto& p : report.pr_curve) cv::circle(img, to_px(p.recall, p.precision), 3, kSeriesColor[0], 1, cv::LINE_AA);
  // Envelope as a step curve: precision holds over each recall interval.
  for (std::size_t i = 1; i < steps.size(); ++i) {
    const auto& [r0, p0] = steps[i - 1];
    const auto& [r1, p1] = steps[i];
    cv::line(img, to_px(r0, p1), to_px(r1, p1), kSeriesColor[2], 2, cv::LINE_AA);
    cv::line(img, to_px(r0, p0), to_px(r0, p1), kSeriesColor[2], 2, cv::LINE_AA);
  }
  text(img, "precision-recall, IoU " + num(report.iou_threshold) + ", AP " + num(report.ap),
       {plot.x, 26}, 0.55);
  text(img, "recall", {plot.x + plot.width / 2 - 20, img.rows - 12});
  text(img, "precision", {4, 26});
  const auto png = out_dir / "pr_curve.png";
  write_png(img, png);

  std::string csv = "recall,precision\n";
  for (const auto& [r, p] : steps) csv += exact(r) + "," + exact(p) + "\n";
  const auto csv_path = out_dir / "pr_curve.csv";
  write_file_atomic(csv_path, csv);
  return {png, csv_path};
}

}  // namespace biogan
