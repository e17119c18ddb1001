#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "biogan/eval/metrics.hpp"

namespace biogan::eval {

struct CocoImage {
  std::int64_t id = 0;
  std::string file_name;
};

/// Single-class ground truth, keyed by image id.
struct AnnotationSet {
  std::vector<CocoImage> images;  // in file order
  std::map<std::int64_t, std::vector<BoundingBox>> boxes;
};

using DetectionSet = std::map<std::int64_t, std::vector<Detection>>;

/// COCO annotation JSON (images / annotations / categories). Schema problems
/// raise ParseError naming the JSON path; duplicate image ids and annotations
/// on unknown images raise ValidationError.
AnnotationSet parse_annotations(const std::string& text, const std::string& source = "<annotations>");

/// COCO results JSON: an array of {image_id, bbox, score}. Unknown image ids
/// and scores outside [0, 1] raise ValidationError.
DetectionSet parse_detections(const std::string& text, const AnnotationSet& gt,
                              const std::string& source = "<detections>");

struct ImageMetrics {
  std::int64_t image_id = 0;
  std::string file_name;
  MatchCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ap = 0.0;
  int ground_truth = 0;
  int detections = 0;
};

struct MetricReport {
  double iou_threshold = kDefaultIouThreshold;
  double confidence_threshold = kDefaultConfidenceThreshold;
  ApInterpolation interpolation = ApInterpolation::kAllPoints;

  MatchCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Over the pooled sweep of all images.
  double ap = 0.0;
  /// Mean of per-image APs over images that have ground truth.
  double mean_image_ap = 0.0;

  std::vector<PrPoint> pr_curve;
  std::vector<ImageMetrics> per_image;
};

struct EvaluateOptions {
  double iou_threshold = kDefaultIouThreshold;
  double confidence_threshold = kDefaultConfidenceThreshold;
  ApInterpolation interpolation = ApInterpolation::kAllPoints;
};

MetricReport evaluate(const AnnotationSet& gt, const DetectionSet& detections,
                      const EvaluateOptions& options = {});

/// Reads both files and evaluates.
MetricReport evaluate(const std::filesystem::path& gt_file, const std::filesystem::path& det_file,
                      const EvaluateOptions& options = {});

/// Machine-readable report; deterministic for equal inputs.
std::string report_json(const MetricReport& report);
/// Inverse of report_json.
MetricReport parse_report_json(const std::string& text, const std::string& source = "<report>");
/// Human-readable summary table.
std::string report_text(const MetricReport& report);

}  // namespace biogan::eval
