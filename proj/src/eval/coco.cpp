#include "biogan/eval/coco.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "biogan/error.hpp"

namespace biogan::eval {
namespace {

using nlohmann::json;

class Schema {
 public:
  explicit Schema(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw ParseError(source_ + ": " + path + ": " + what);
  }

  const json& member(const json& obj, const std::string& path, const char* key) const {
    if (!obj.is_object()) fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path, std::string("missing field '") + key + "'");
    return *it;
  }
  const json& array(const json& v, const std::string& path) const {
    if (!v.is_array()) fail(path, "expected an array");
    return v;
  }
  double number(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "expected a finite number");
    return d;
  }
  std::int64_t integer(const json& v, const std::string& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<std::int64_t>();
  }
  std::string string(const json& v, const std::string& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }
  BoundingBox box(const json& v, const std::string& path) const {
    array(v, path);
    if (v.size() != 4) fail(path, "expected [x, y, width, height]");
    BoundingBox b{number(v[0], path + "[0]"), number(v[1], path + "[1]"), number(v[2], path + "[2]"),
                  number(v[3], path + "[3]")};
    if (b.w < 0.0) fail(path + "[2]", "negative width");
    if (b.h < 0.0) fail(path + "[3]", "negative height");
    return b;
  }
  json parse(const std::string& text) const {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(source_ + ": invalid JSON: " + e.what());
    }
  }
  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* to_string(ApInterpolation i) {
  return i == ApInterpolation::kAllPoints ? "all_points" : "eleven_point";
}

}  // namespace

AnnotationSet parse_annotations(const std::string& text, const std::string& source) {
  const Schema s(source);
  const json root = s.parse(text);
  AnnotationSet set;
  const json& images = s.array(s.member(root, "$", "images"), "$.images");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string path = "$.images[" + std::to_string(i) + "]";
    CocoImage im;
    im.id = s.integer(s.member(images[i], path, "id"), path + ".id");
    if (images[i].contains("file_name")) {
      im.file_name = s.string(images[i]["file_name"], path + ".file_name");
    }
    if (set.boxes.count(im.id)) {
      throw ValidationError(source + ": " + path + ".id: duplicate image id " + std::to_string(im.id));
    }
    set.boxes[im.id];
    set.images.push_back(im);
  }
  const json& anns = s.array(s.member(root, "$", "annotations"), "$.annotations");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string path = "$.annotations[" + std::to_string(i) + "]";
    const std::int64_t id = s.integer(s.member(anns[i], path, "image_id"), path + ".image_id");
    const BoundingBox b = s.box(s.member(anns[i], path, "bbox"), path + ".bbox");
    auto it = set.boxes.find(id);
    if (it == set.boxes.end()) {
      throw ValidationError(source + ": " + path + ".image_id: unknown image id " + std::to_string(id));
    }
    it->second.push_back(b);
  }
  if (root.contains("categories")) s.array(root["categories"], "$.categories");
  return set;
}

DetectionSet parse_detections(const std::string& text, const AnnotationSet& gt,
                              const std::string& source) {
  const Schema s(source);
  const json root = s.parse(text);
  s.array(root, "$");
  DetectionSet set;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const std::string path = "$[" + std::to_string(i) + "]";
    const std::int64_t id = s.integer(s.member(root[i], path, "image_id"), path + ".image_id");
    const BoundingBox b = s.box(s.member(root[i], path, "bbox"), path + ".bbox");
    const double score = s.number(s.member(root[i], path, "score"), path + ".score");
    if (!gt.boxes.count(id)) {
      throw ValidationError(source + ": " + path + ".image_id: detection on unknown image id " +
                            std::to_string(id));
    }
    if (score < 0.0 || score > 1.0) {
      throw ValidationError(source + ": " + path + ".score: confidence outside [0, 1]");
    }
    set[id].push_back({b, score});
  }
  return set;
}

MetricReport evaluate(const AnnotationSet& gt, const DetectionSet& detections,
                      const EvaluateOptions& options) {
  const double iou_thr = options.iou_threshold;
  const double conf_thr = options.confidence_threshold;
  if (!(iou_thr > 0.0 && iou_thr <= 1.0)) throw ArgumentError("iou threshold must lie in (0, 1]");
  if (!(conf_thr > 0.0 && conf_thr <= 1.0)) throw ArgumentError("confidence threshold must lie in (0, 1]");
  for (const auto& [id, dets] : detections) {
    if (!gt.boxes.count(id)) throw ValidationError("detection on unknown image id " + std::to_string(id));
  }

  MetricReport r;
  r.iou_threshold = iou_thr;
  r.confidence_threshold = conf_thr;
  r.interpolation = options.interpolation;

  std::vector<ImageCase> cases;
  double ap_sum = 0.0;
  int ap_images = 0;
  for (const auto& im : gt.images) {
    ImageCase c;
    c.ground_truth = gt.boxes.at(im.id);
    if (auto it = detections.find(im.id); it != detections.end()) c.detections = it->second;

    ImageMetrics m;
    m.image_id = im.id;
    m.file_name = im.file_name;
    m.counts = match_detections(c.detections, c.ground_truth, iou_thr, conf_thr);
    m.precision = precision(m.counts.tp, m.counts.fp);
    m.recall = recall(m.counts.tp, m.counts.fn);
    m.f1 = f1(m.precision, m.recall);
    m.ap = average_precision(std::span<const ImageCase>(&c, 1), iou_thr, options.interpolation);
    m.ground_truth = static_cast<int>(c.ground_truth.size());
    m.detections = static_cast<int>(c.detections.size());
    if (!c.ground_truth.empty()) {
      ap_sum += m.ap;
      ++ap_images;
    }
    r.counts += m.counts;
    r.per_image.push_back(m);
    cases.push_back(std::move(c));
  }
  r.precision = precision(r.counts.tp, r.counts.fp);
  r.recall = recall(r.counts.tp, r.counts.fn);
  r.f1 = f1(r.precision, r.recall);
  r.ap = average_precision(cases, iou_thr, options.interpolation);
  r.mean_image_ap = ap_images ? ap_sum / ap_images : 0.0;
  r.pr_curve = precision_recall_curve(cases, iou_thr);
  return r;
}

MetricReport evaluate(const std::filesystem::path& gt_file, const std::filesystem::path& det_file,
                      const EvaluateOptions& options) {
  const AnnotationSet gt = parse_annotations(read_text(gt_file), gt_file.string());
  const DetectionSet det = parse_detections(read_text(det_file), gt, det_file.string());
  return evaluate(gt, det, options);
}

std::string report_json(const MetricReport& r) {
  json per_image = json::array();
  for (const auto& m : r.per_image) {
    per_image.push_back({{"image_id", m.image_id},
                         {"file_name", m.file_name},
                         {"tp", m.counts.tp},
                         {"fp", m.counts.fp},
                         {"fn", m.counts.fn},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"ap", m.ap},
                         {"ground_truth", m.ground_truth},
                         {"detections", m.detections}});
  }
  json curve = json::array();
  for (const auto& p : r.pr_curve) {
    curve.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}});
  }
  const json j = {{"iou_threshold", r.iou_threshold},
                  {"confidence_threshold", r.confidence_threshold},
                  {"interpolation", to_string(r.interpolation)},
                  {"tp", r.counts.tp},
                  {"fp", r.counts.fp},
                  {"fn", r.counts.fn},
                  {"precision", r.precision},
                  {"recall", r.recall},
                  {"f1", r.f1},
                  {"ap", r.ap},
                  {"mean_image_ap", r.mean_image_ap},
                  {"pr_curve", curve},
                  {"per_image", per_image}};
  return j.dump(2) + "\n";
}

MetricReport parse_report_json(const std::string& text, const std::string& source) {
  const Schema s(source);
  const json root = s.parse(text);
  MetricReport r;
  r.iou_threshold = s.number(s.member(root, "$", "iou_threshold"), "$.iou_threshold");
  r.confidence_threshold = s.number(s.member(root, "$", "confidence_threshold"), "$.confidence_threshold");
  const std::string interp = s.string(s.member(root, "$", "interpolation"), "$.interpolation");
  if (interp == "all_points") {
    r.interpolation = ApInterpolation::kAllPoints;
  } else if (interp == "eleven_point") {
    r.interpolation = ApInterpolation::kElevenPoint;
  } else {
    s.fail("$.interpolation", "unknown interpolation '" + interp + "'");
  }
  r.counts.tp = s.integer(s.member(root, "$", "tp"), "$.tp");
  r.counts.fp = s.integer(s.member(root, "$", "fp"), "$.fp");
  r.counts.fn = s.integer(s.member(root, "$", "fn"), "$.fn");
  r.precision = s.number(s.member(root, "$", "precision"), "$.precision");
  r.recall = s.number(s.member(root, "$", "recall"), "$.recall");
  r.f1 = s.number(s.member(root, "$", "f1"), "$.f1");
  r.ap = s.number(s.member(root, "$", "ap"), "$.ap");
  r.mean_image_ap = s.number(s.member(root, "$", "mean_image_ap"), "$.mean_image_ap");
  const json& curve = s.array(s.member(root, "$", "pr_curve"), "$.pr_curve");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const std::string path = "$.pr_curve[" + std::to_string(i) + "]";
    r.pr_curve.push_back({s.number(s.member(curve[i], path, "threshold"), path + ".threshold"),
                          s.number(s.member(curve[i], path, "precision"), path + ".precision"),
                          s.number(s.member(curve[i], path, "recall"), path + ".recall")});
  }
  const json& images = s.array(s.member(root, "$", "per_image"), "$.per_image");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string path = "$.per_image[" + std::to_string(i) + "]";
    const json& o = images[i];
    ImageMetrics m;
    m.image_id = s.integer(s.member(o, path, "image_id"), path + ".image_id");
    m.file_name = s.string(s.member(o, path, "file_name"), path + ".file_name");
    m.counts.tp = s.integer(s.member(o, path, "tp"), path + ".tp");
    m.counts.fp = s.integer(s.member(o, path, "fp"), path + ".fp");
    m.counts.fn = s.integer(s.member(o, path, "fn"), path + ".fn");
    m.precision = s.number(s.member(o, path, "precision"), path + ".precision");
    m.recall = s.number(s.member(o, path, "recall"), path + ".recall");
    m.f1 = s.number(s.member(o, path, "f1"), path + ".f1");
    m.ap = s.number(s.member(o, path, "ap"), path + ".ap");
    m.ground_truth = static_cast<int>(s.integer(s.member(o, path, "ground_truth"), path + ".ground_truth"));
    m.detections = static_cast<int>(s.integer(s.member(o, path, "detections"), path + ".detections"));
    r.per_image.push_back(m);
  }
  return r;
}

std::string report_text(const MetricReport& r) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.1f", 100.0 * v);
    return std::string(buf);
  };
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "IoU threshold %.2f, confidence threshold %.2f, AP %s\n",
                r.iou_threshold, r.confidence_threshold, to_string(r.interpolation));
  out << line;
  out << "metric        value\n";
  std::snprintf(line, sizeof line, "TP        %9ld\nFP        %9ld\nFN        %9ld\n", r.counts.tp,
                r.counts.fp, r.counts.fn);
  out << line;
  out << "Precision    " << pct(r.precision) << '\n';
  out << "Recall       " << pct(r.recall) << '\n';
  out << "F1-score     " << pct(r.f1) << '\n';
  out << "AP           " << pct(r.ap) << '\n';
  out << "AP/image     " << pct(r.mean_image_ap) << '\n';
  out << "\nimage_id  file_name                     tp   fp   fn      P      R     F1     AP\n";
  for (const auto& m : r.per_image) {
    std::snprintf(line, sizeof line, "%8lld  %-28.28s %4ld %4ld %4ld %s %s %s %s\n",
                  static_cast<long long>(m.image_id), m.file_name.c_str(), m.counts.tp, m.counts.fp,
                  m.counts.fn, pct(m.precision).c_str(), pct(m.recall).c_str(), pct(m.f1).c_str(),
                  pct(m.ap).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace biogan::eval
