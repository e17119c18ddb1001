#pragma once

#include <span>
#include <vector>

namespace biogan::eval {

/// Top-left corner plus size, in pixels.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const noexcept { return w * h; }
};

struct Detection {
  BoundingBox box;
  double score = 0.0;
};

/// Ground truth and detections of one image.
struct ImageCase {
  std::vector<BoundingBox> ground_truth;
  std::vector<Detection> detections;
};

struct MatchCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

inline constexpr double kDefaultIouThreshold = 0.70;
inline constexpr double kDefaultConfidenceThreshold = 0.70;

/// Intersection over union; 0 when the union is empty.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Greedy one-to-one matching on one image. Detections scoring below conf_thr
/// are dropped; the rest, by descending score (ties by index), each take the
/// unmatched ground-truth box of highest IoU >= iou_thr (ties by index).
MatchCounts match_detections(std::span<const Detection> detections,
                             std::span<const BoundingBox> ground_truth,
                             double iou_thr = kDefaultIouThreshold,
                             double conf_thr = kDefaultConfidenceThreshold);

/// Summed over images.
MatchCounts match_detections(std::span<const ImageCase> images,
                             double iou_thr = kDefaultIouThreshold,
                             double conf_thr = kDefaultConfidenceThreshold);

/// tp / (tp + fp), 0 when nothing was detected.
double precision(long tp, long fp);
/// tp / (tp + fn), 0 when there is nothing to find.
double recall(long tp, long fn);
/// Harmonic mean, 0 when p + r == 0.
double f1(double p, double r);

enum class ApInterpolation { kAllPoints, kElevenPoint };

/// One operating point of the confidence sweep: everything scoring at least
/// `threshold` is kept.
struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Operating points at every distinct detection score, highest first.
std::vector<PrPoint> precision_recall_curve(std::span<const ImageCase> images,
                                            double iou_thr = kDefaultIouThreshold);

/// Area under the precision envelope of the sweep. 0 when there is no ground
/// truth at all.
double average_precision(std::span<const ImageCase> images, double iou_thr = kDefaultIouThreshold,
                         ApInterpolation interpolation = ApInterpolation::kAllPoints);

/// Step curve (recall, envelope precision) starting at recall 0 whose area is
/// the all-points AP.
std::vector<std::pair<double, double>> precision_envelope(std::span<const PrPoint> curve);

/// 100 * (candidate - baseline) / baseline. Throws ArgumentError for
/// baseline <= 0.
double relative_improvement(double candidate, double baseline);

}  // namespace biogan::eval
