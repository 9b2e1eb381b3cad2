#include "pentrack/metrics.hpp"

#include "pentrack/assignment.hpp"
#include "pentrack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <tuple>

namespace pentrack {

namespace {

using FrameKey = std::pair<std::string, long>;  // (camera, frame)

std::map<FrameKey, std::vector<AnnotatedBox>> group_by_frame(std::span<const AnnotatedBox> boxes) {
  std::map<FrameKey, std::vector<AnnotatedBox>> out;
  for (const auto& b : boxes) {
    out[{b.camera, b.frame}].push_back(b);
  }
  return out;
}

// Identity of the ground-truth box best overlapping `box` at or above the
// threshold.
std::optional<long> identify(const std::vector<AnnotatedBox>* frame_gt, const BoundingBox& box,
                             double iou_threshold) {
  if (frame_gt == nullptr) {
    return std::nullopt;
  }
  std::optional<long> best_id;
  double best = -1.0;
  for (const auto& g : *frame_gt) {
    const double v = iou(g.box, box);
    if (v >= iou_threshold && v > best) {
      best = v;
      best_id = g.identity;
    }
  }
  return best_id;
}

// (ceiling frame, identity) for every predicted match judged correct.
std::set<std::pair<long, long>> correct_pairs(const CrossViewPairs& pairs,
                                              std::span<const MatchRecord> matches,
                                              std::span<const AnnotatedBox> gt,
                                              double iou_threshold) {
  const auto by_frame = group_by_frame(gt);
  auto lookup = [&](const std::string& camera, long frame) -> const std::vector<AnnotatedBox>* {
    const auto it = by_frame.find({camera, frame});
    return it == by_frame.end() ? nullptr : &it->second;
  };
  std::set<std::pair<long, long>> correct;
  for (const auto& m : matches) {
    const auto c = identify(lookup(kCeiling, m.ceiling_frame), m.ceiling_box, iou_threshold);
    const auto a = identify(lookup(kAngled, m.angled_frame), m.angled_box, iou_threshold);
    if (!c || !a || *c != *a) {
      continue;
    }
    const auto p = pairs.find(m.ceiling_frame);
    if (p != pairs.end() && p->second.contains(*c)) {
      correct.emplace(m.ceiling_frame, *c);
    }
  }
  return correct;
}

}  // namespace

std::vector<AnnotatedBox> to_annotated(std::span<const GlobalTrackRecord> records) {
  std::vector<AnnotatedBox> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({r.camera, r.frame, r.global_id, r.box});
  }
  return out;
}

std::vector<AnnotatedBox> to_annotated(std::span<const LocalTrackRecord> records,
                                       const std::string& camera) {
  std::vector<AnnotatedBox> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({camera, r.frame, r.local_id, r.box});
  }
  return out;
}

std::vector<FrameMatch> match_frame(std::span<const AnnotatedBox> gt,
                                    std::span<const AnnotatedBox> pred, double iou_threshold,
                                    const std::map<long, long>& previous) {
  std::vector<FrameMatch> out;
  std::vector<bool> gt_used(gt.size()), pred_used(pred.size());

  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto prev = previous.find(gt[i].identity);
    if (prev == previous.end()) {
      continue;
    }
    for (std::size_t j = 0; j < pred.size(); ++j) {
      if (pred_used[j] || pred[j].identity != prev->second) {
        continue;
      }
      const double v = iou(gt[i].box, pred[j].box);
      if (v >= iou_threshold) {
        out.push_back({i, j, v});
        gt_used[i] = true;
        pred_used[j] = true;
      }
      break;
    }
  }

  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt_used[i]) rows.push_back(i);
  }
  for (std::size_t j = 0; j < pred.size(); ++j) {
    if (!pred_used[j]) cols.push_back(j);
  }
  if (!rows.empty() && !cols.empty()) {
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(cols.size()));
    CellMask forbidden(cost.rows(), cost.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const double v = iou(gt[rows[r]].box, pred[cols[c]].box);
        const auto ri = static_cast<Eigen::Index>(r);
        const auto ci = static_cast<Eigen::Index>(c);
        cost(ri, ci) = 1.0 - v;
        forbidden(ri, ci) = v < iou_threshold;
      }
    }
    for (const auto& [r, c] : hungarian(cost, forbidden)) {
      out.push_back({rows[r], cols[c], iou(gt[rows[r]].box, pred[cols[c]].box)});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const FrameMatch& a, const FrameMatch& b) { return a.gt < b.gt; });
  return out;
}

MetricsAccumulator& MetricsAccumulator::operator+=(const MetricsAccumulator& o) {
  fn += o.fn;
  fp += o.fp;
  idsw += o.idsw;
  gt += o.gt;
  pred += o.pred;
  matched_count += o.matched_count;
  matched_overlap_sum += o.matched_overlap_sum;
  return *this;
}

double MetricsAccumulator::mota() const {
  if (gt == 0) {
    throw EmptyGroundTruth();
  }
  return 1.0 - static_cast<double>(fn + fp + idsw) / static_cast<double>(gt);
}

double MetricsAccumulator::motp() const {
  if (matched_count == 0) {
    throw NoMatches();
  }
  return matched_overlap_sum / static_cast<double>(matched_count);
}

double MetricsAccumulator::recall() const {
  if (gt == 0) {
    throw EmptyGroundTruth();
  }
  return static_cast<double>(matched_count) / static_cast<double>(gt);
}

double MetricsAccumulator::precision() const {
  return pred == 0 ? 0.0 : static_cast<double>(matched_count) / static_cast<double>(pred);
}

MetricsAccumulator evaluate_clear(std::span<const AnnotatedBox> gt,
                                  std::span<const AnnotatedBox> pred, double iou_threshold) {
  const auto gt_frames = group_by_frame(gt);
  const auto pred_frames = group_by_frame(pred);
  std::set<FrameKey> keys;
  for (const auto& [k, v] : gt_frames) keys.insert(k);
  for (const auto& [k, v] : pred_frames) keys.insert(k);

  static const std::vector<AnnotatedBox> kEmpty;
  MetricsAccumulator acc;
  // camera -> (gt identity -> most recently matched predicted identity)
  std::map<std::string, std::map<long, long>> last_match;
  for (const auto& key : keys) {
    const auto git = gt_frames.find(key);
    const auto pit = pred_frames.find(key);
    const auto& g = git == gt_frames.end() ? kEmpty : git->second;
    const auto& p = pit == pred_frames.end() ? kEmpty : pit->second;
    auto& last = last_match[key.first];

    const auto matches = match_frame(g, p, iou_threshold, last);
    acc.gt += static_cast<long>(g.size());
    acc.pred += static_cast<long>(p.size());
    acc.matched_count += static_cast<long>(matches.size());
    acc.fn += static_cast<long>(g.size() - matches.size());
    acc.fp += static_cast<long>(p.size() - matches.size());
    for (const auto& m : matches) {
      acc.matched_overlap_sum += m.iou;
      const long gid = g[m.gt].identity;
      const long pid = p[m.pred].identity;
      const auto it = last.find(gid);
      if (it != last.end() && it->second != pid) {
        ++acc.idsw;
      }
      last[gid] = pid;
    }
  }
  return acc;
}

double mota(std::span<const AnnotatedBox> gt, std::span<const AnnotatedBox> pred,
            double iou_threshold) {
  return evaluate_clear(gt, pred, iou_threshold).mota();
}

double motp(std::span<const AnnotatedBox> gt, std::span<const AnnotatedBox> pred,
            double iou_threshold) {
  return evaluate_clear(gt, pred, iou_threshold).motp();
}

IdMetrics id_metrics(std::span<const AnnotatedBox> gt, std::span<const AnnotatedBox> pred,
                     double iou_threshold) {
  if (gt.empty()) {
    throw EmptyGroundTruth();
  }
  const auto gt_frames = group_by_frame(gt);
  const auto pred_frames = group_by_frame(pred);

  std::map<std::pair<long, long>, long> overlap;  // (gt id, pred id) -> frames
  for (const auto& [key, g] : gt_frames) {
    const auto pit = pred_frames.find(key);
    if (pit == pred_frames.end()) {
      continue;
    }
    for (const auto& gb : g) {
      for (const auto& pb : pit->second) {
        if (iou(gb.box, pb.box) >= iou_threshold) {
          ++overlap[{gb.identity, pb.identity}];
        }
      }
    }
  }

  std::map<long, std::size_t> gt_index, pred_index;
  for (const auto& [ids, n] : overlap) {
    gt_index.emplace(ids.first, 0);
    pred_index.emplace(ids.second, 0);
  }
  std::size_t k = 0;
  for (auto& [id, idx] : gt_index) idx = k++;
  k = 0;
  for (auto& [id, idx] : pred_index) idx = k++;

  IdMetrics out;
  out.num_gt = static_cast<long>(gt.size());
  out.num_pred = static_cast<long>(pred.size());
  if (!overlap.empty()) {
    Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gt_index.size()),
                                                 static_cast<Eigen::Index>(pred_index.size()));
    for (const auto& [ids, n] : overlap) {
      cost(static_cast<Eigen::Index>(gt_index[ids.first]),
           static_cast<Eigen::Index>(pred_index[ids.second])) = -static_cast<double>(n);
    }
    const CellMask none = CellMask::Constant(cost.rows(), cost.cols(), false);
    for (const auto& [r, c] : hungarian(cost, none, false)) {
      out.idtp += static_cast<long>(
          std::lround(-cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    }
  }
  const auto tp = static_cast<double>(out.idtp);
  out.idp = out.num_pred == 0 ? 0.0 : tp / static_cast<double>(out.num_pred);
  out.idr = tp / static_cast<double>(out.num_gt);
  out.idf1 = 2.0 * tp / static_cast<double>(out.num_gt + out.num_pred);
  return out;
}

CrossViewPairs gt_cross_view_pairs(std::span<const AnnotatedBox> gt, long gt_offset) {
  std::set<std::pair<long, long>> angled;  // (frame, identity)
  for (const auto& b : gt) {
    if (b.camera == kAngled) {
      angled.emplace(b.frame, b.identity);
    }
  }
  CrossViewPairs pairs;
  for (const auto& b : gt) {
    if (b.camera == kCeiling && angled.contains({b.frame + gt_offset, b.identity})) {
      pairs[b.frame].insert(b.identity);
    }
  }
  return pairs;
}

long count_pairs(const CrossViewPairs& pairs) {
  long n = 0;
  for (const auto& [frame, ids] : pairs) {
    n += static_cast<long>(ids.size());
  }
  return n;
}

ChaResult cha(const CrossViewPairs& pairs, std::span<const MatchRecord> matches,
              std::span<const AnnotatedBox> gt, double iou_threshold) {
  ChaResult r;
  r.total = count_pairs(pairs);
  if (r.total == 0) {
    throw NoGroundTruthPairs();
  }
  r.correct = static_cast<long>(correct_pairs(pairs, matches, gt, iou_threshold).size());
  r.value = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

ChaResult cha_per_track(const CrossViewPairs& pairs, std::span<const MatchRecord> matches,
                        std::span<const AnnotatedBox> gt, double iou_threshold) {
  std::map<long, long> frames_with_pair;
  for (const auto& [frame, ids] : pairs) {
    for (long id : ids) {
      ++frames_with_pair[id];
    }
  }
  if (frames_with_pair.empty()) {
    throw NoGroundTruthPairs();
  }
  std::map<long, long> frames_correct;
  for (const auto& [frame, id] : correct_pairs(pairs, matches, gt, iou_threshold)) {
    ++frames_correct[id];
  }
  ChaResult r;
  r.total = static_cast<long>(frames_with_pair.size());
  for (const auto& [id, n] : frames_with_pair) {
    if (2 * frames_correct[id] >= n) {
      ++r.correct;
    }
  }
  r.value = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

std::string format_report(const MetricsReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  const auto& c = report.clear;
  const bool has_gt = c.gt > 0;
  const bool has_matches = c.matched_count > 0;

  auto value_or_na = [&](bool ok, double v) {
    std::ostringstream s;
    if (ok) {
      s << std::fixed << std::setprecision(6) << v;
    } else {
      s << "nan";
    }
    return s.str();
  };
  const std::string mota_s = value_or_na(has_gt, has_gt ? c.mota() : 0.0);
  const std::string motp_s = value_or_na(has_matches, has_matches ? c.motp() : 0.0);
  const std::string recall_s = value_or_na(has_gt, has_gt ? c.recall() : 0.0);

  os << "idf1=" << report.id.idf1 << '\n';
  os << "idp=" << report.id.idp << '\n';
  os << "idr=" << report.id.idr << '\n';
  os << "recall=" << recall_s << '\n';
  os << "precision=" << c.precision() << '\n';
  os << "mota=" << mota_s << '\n';
  os << "motp=" << motp_s << '\n';
  if (report.handover) {
    os << "cha=" << report.handover->value << '\n';
    os << "cha_correct=" << report.handover->correct << '\n';
    os << "cha_total=" << report.handover->total << '\n';
  }
  os << "gt=" << c.gt << '\n';
  os << "pred=" << c.pred << '\n';
  os << "fn=" << c.fn << '\n';
  os << "fp=" << c.fp << '\n';
  os << "idsw=" << c.idsw << '\n';
  os << "idtp=" << report.id.idtp << '\n';

  auto pct = [](bool ok, double v) {
    std::ostringstream s;
    if (ok) {
      s << std::fixed << std::setprecision(1) << 100.0 * v;
    } else {
      s << "nan";
    }
    return s.str();
  };
  os << "[summary]\n";
  os << "IDF1 IDP IDR Recall Precision MOTA MOTP CHA\n";
  os << pct(true, report.id.idf1) << ' ' << pct(true, report.id.idp) << ' '
     << pct(true, report.id.idr) << ' ' << pct(has_gt, has_gt ? c.recall() : 0.0) << ' '
     << pct(true, c.precision()) << ' ' << pct(has_gt, has_gt ? c.mota() : 0.0) << ' '
     << pct(has_matches, has_matches ? c.motp() : 0.0) << ' '
     << (report.handover ? pct(true, report.handover->value) : std::string("nan")) << '\n';
  return os.str();
}

}  // namespace pentrack
