#include "biogan/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "biogan/error.hpp"

namespace biogan::eval {
namespace {

// Stable order of detections by descending score.
std::vector<std::size_t> by_score(std::span<const Detection> detections) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });
  return order;
}

// Match flag per detection, for the full greedy pass in score order. A
// detection's outcome never depends on lower-scored ones, so any threshold
// keeps a prefix of this pass.
std::vector<bool> greedy_pass(std::span<const Detection> detections,
                              std::span<const BoundingBox> ground_truth,
                              const std::vector<std::size_t>& order, double iou_thr) {
  std::vector<bool> taken(ground_truth.size(), false);
  std::vector<bool> hit(detections.size(), false);
  for (std::size_t d : order) {
    double best = -1.0;
    std::size_t best_gt = ground_truth.size();
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(detections[d].box, ground_truth[g]);
      if (v >= iou_thr && v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best_gt < ground_truth.size()) {
      taken[best_gt] = true;
      hit[d] = true;
    }
  }
  return hit;
}

}  // namespace

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return inter / uni;
}

MatchCounts match_detections(std::span<const Detection> detections,
                             std::span<const BoundingBox> ground_truth, double iou_thr,
                             double conf_thr) {
  std::vector<Detection> kept;
  for (const auto& d : detections) {
    if (d.score >= conf_thr) kept.push_back(d);
  }
  const auto order = by_score(kept);
  const auto hit = greedy_pass(kept, ground_truth, order, iou_thr);
  MatchCounts c;
  c.tp = std::count(hit.begin(), hit.end(), true);
  c.fp = static_cast<long>(kept.size()) - c.tp;
  c.fn = static_cast<long>(ground_truth.size()) - c.tp;
  return c;
}

MatchCounts match_detections(std::span<const ImageCase> images, double iou_thr, double conf_thr) {
  MatchCounts total;
  for (const auto& im : images) total += match_detections(im.detections, im.ground_truth, iou_thr, conf_thr);
  return total;
}

double precision(long tp, long fp) {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double recall(long tp, long fn) {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

std::vector<PrPoint> precision_recall_curve(std::span<const ImageCase> images, double iou_thr) {
  struct Scored {
    double score;
    bool hit;
  };
  std::vector<Scored> all;
  long n_gt = 0;
  for (const auto& im : images) {
    n_gt += static_cast<long>(im.ground_truth.size());
    const auto order = by_score(im.detections);
    const auto hit = greedy_pass(im.detections, im.ground_truth, order, iou_thr);
    for (std::size_t i = 0; i < im.detections.size(); ++i) all.push_back({im.detections[i].score, hit[i]});
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });

  std::vector<PrPoint> curve;
  long tp = 0;
  long fp = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double s = all[i].score;
    for (; i < all.size() && all[i].score == s; ++i) {
      if (all[i].hit) {
        ++tp;
      } else {
        ++fp;
      }
    }
    curve.push_back({s, precision(tp, fp), recall(tp, n_gt - tp)});
  }
  return curve;
}

std::vector<std::pair<double, double>> precision_envelope(std::span<const PrPoint> curve) {
  std::vector<std::pair<double, double>> steps;
  std::vector<double> env(curve.size());
  double best = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    best = std::max(best, curve[i].precision);
    env[i] = best;
  }
  steps.emplace_back(0.0, curve.empty() ? 0.0 : env.front());
  for (std::size_t i = 0; i < curve.size(); ++i) steps.emplace_back(curve[i].recall, env[i]);
  return steps;
}

double average_precision(std::span<const ImageCase> images, double iou_thr,
                         ApInterpolation interpolation) {
  long n_gt = 0;
  for (const auto& im : images) n_gt += static_cast<long>(im.ground_truth.size());
  if (n_gt == 0) return 0.0;
  const auto curve = precision_recall_curve(images, iou_thr);
  if (interpolation == ApInterpolation::kElevenPoint) {
    double sum = 0.0;
    for (int k = 0; k <= 10; ++k) {
      const double r = k / 10.0;
      double p = 0.0;
      for (const auto& pt : curve) {
        if (pt.recall >= r) p = std::max(p, pt.precision);
      }
      sum += p;
    }
    return sum / 11.0;
  }
  const auto steps = precision_envelope(curve);
  double area = 0.0;
  for (std::size_t i = 1; i < steps.size(); ++i) {
    area += (steps[i].first - steps[i - 1].first) * steps[i].second;
  }
  return area;
}

double relative_improvement(double candidate, double baseline) {
  if (!(baseline > 0.0)) throw ArgumentError("relative_improvement needs a positive baseline");
  return 100.0 * (candidate - baseline) / baseline;
}

}  // namespace biogan::eval
