#pragma once

#include "pentrack/global_tracker.hpp"
#include "pentrack/polygons.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pentrack {

// One labelled box: ground truth (identity = true global id) or a
// prediction (identity = predicted id).
struct AnnotatedBox {
  std::string camera;
  long frame = 0;
  long identity = 0;
  BoundingBox box;

  friend bool operator==(const AnnotatedBox&, const AnnotatedBox&) = default;
};

std::vector<AnnotatedBox> to_annotated(std::span<const GlobalTrackRecord> records);
std::vector<AnnotatedBox> to_annotated(std::span<const LocalTrackRecord> records,
                                       const std::string& camera);

inline constexpr double kDefaultIouThreshold = 0.5;

struct FrameMatch {
  std::size_t gt = 0;    // index into the frame's ground-truth boxes
  std::size_t pred = 0;  // index into the frame's predicted boxes
  double iou = 0.0;
};

// CLEAR-MOT correspondence for one (camera, frame). Pairs recorded in
// `previous` (gt identity -> predicted identity) are kept first while their
// IoU stays at or above the threshold; the rest is an optimal IoU-maximizing
// assignment over pairs at or above the threshold.
std::vector<FrameMatch> match_frame(std::span<const AnnotatedBox> gt,
                                    std::span<const AnnotatedBox> pred, double iou_threshold,
                                    const std::map<long, long>& previous = {});

// Additive counters; accumulators of separate sequences can be summed.
struct MetricsAccumulator {
  long fn = 0;
  long fp = 0;
  long idsw = 0;
  long gt = 0;
  long pred = 0;
  long matched_count = 0;
  double matched_overlap_sum = 0.0;

  MetricsAccumulator& operator+=(const MetricsAccumulator& o);

  // Throws EmptyGroundTruth.
  double mota() const;
  // Mean IoU of matches. Throws NoMatches.
  double motp() const;
  double recall() const;
  // 0 when there are no predictions.
  double precision() const;
};

// Runs CLEAR-MOT over every camera separately (each camera is its own
// sequence) and sums the counters.
MetricsAccumulator evaluate_clear(std::span<const AnnotatedBox> gt,
                                  std::span<const AnnotatedBox> pred,
                                  double iou_threshold = kDefaultIouThreshold);

double mota(std::span<const AnnotatedBox> gt, std::span<const AnnotatedBox> pred,
            double iou_threshold = kDefaultIouThreshold);
double motp(std::span<const AnnotatedBox> gt, std::span<const AnnotatedBox> pred,
            double iou_threshold = kDefaultIouThreshold);

struct IdMetrics {
  double idf1 = 0.0;
  double idp = 0.0;
  double idr = 0.0;
  long idtp = 0;
  long num_gt = 0;
  long num_pred = 0;
};

// Identity metrics after a global one-to-one matching of ground-truth and
// predicted identities that maximizes the number of co-located (IoU at or
// above the threshold) detections. Throws EmptyGroundTruth.
IdMetrics id_metrics(std::span<const AnnotatedBox> gt, std::span<const AnnotatedBox> pred,
                     double iou_threshold = kDefaultIouThreshold);

// Ground-truth cross-view pairs: ceiling frame -> identities annotated in the
// ceiling view at that frame and in the angled view at frame + gt_offset.
using CrossViewPairs = std::map<long, std::set<long>>;

CrossViewPairs gt_cross_view_pairs(std::span<const AnnotatedBox> gt, long gt_offset = 0);

long count_pairs(const CrossViewPairs& pairs);

struct ChaResult {
  long correct = 0;
  long total = 0;
  double value = 0.0;
};

// Fraction of ground-truth cross-view pairs that were predicted: a predicted
// match counts when both of its boxes overlap (IoU >= threshold) ground-truth
// boxes of the same identity, and that identity forms a ground-truth pair at
// the match's ceiling frame. Throws NoGroundTruthPairs.
ChaResult cha(const CrossViewPairs& pairs, std::span<const MatchRecord> matches,
              std::span<const AnnotatedBox> gt, double iou_threshold = kDefaultIouThreshold);

// Per-track variant: fraction of identities with ground-truth pairs whose
// pairs were predicted correctly in at least half of their frames.
ChaResult cha_per_track(const CrossViewPairs& pairs, std::span<const MatchRecord> matches,
                        std::span<const AnnotatedBox> gt,
                        double iou_threshold = kDefaultIouThreshold);

struct MetricsReport {
  MetricsAccumulator clear;
  IdMetrics id;
  std::optional<ChaResult> handover;
};

// `metric=value` lines followed by a summary block in the column order
// IDF1 IDP IDR Recall Precision MOTA MOTP CHA.
std::string format_report(const MetricsReport& report);

}  // namespace pentrack
