#include "pentrack/global_tracker.hpp"

#include "pentrack/errors.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

namespace pentrack {

namespace {

std::vector<LocalTrackSnapshot> sorted_by_id(std::span<const LocalTrackSnapshot> s) {
  std::vector<LocalTrackSnapshot> v(s.begin(), s.end());
  std::stable_sort(v.begin(), v.end(), [](const LocalTrackSnapshot& a, const LocalTrackSnapshot& b) {
    return a.local_id < b.local_id;
  });
  return v;
}

void check_sorted(std::span<const LocalTrackRecord> stream) {
  for (std::size_t i = 1; i < stream.size(); ++i) {
    if (stream[i].frame < stream[i - 1].frame) {
      throw OutOfOrderFrame(stream[i - 1].frame, stream[i].frame);
    }
  }
}

}  // namespace

Eigen::MatrixXd intersection_matrix(std::span<const LocalTrackSnapshot> ceiling,
                                    std::span<const LocalTrackSnapshot> angled,
                                    const Homography& ceiling_to_angled) {
  const auto rows = sorted_by_id(ceiling);
  const auto cols = sorted_by_id(angled);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                            static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Quadrilateral q;
    try {
      q = project_box(ceiling_to_angled, rows[i].box);
    } catch (const PointAtInfinity&) {
      continue;
    }
    for (std::size_t j = 0; j < cols.size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          intersection_area(q, cols[j].box);
    }
  }
  return m;
}

std::vector<std::pair<std::size_t, std::size_t>> greedy_match(Eigen::MatrixXd matrix,
                                                              bool symmetric,
                                                              std::vector<AlignPop>* pops) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::vector<bool> row_matched(static_cast<std::size_t>(matrix.rows()), false);
  while (true) {
    Eigen::Index best_r = -1;
    Eigen::Index best_c = -1;
    double best = 0.0;
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
      for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
        if (matrix(r, c) > best) {
          best = matrix(r, c);
          best_r = r;
          best_c = c;
        }
      }
    }
    if (best_r < 0) {
      break;
    }
    matrix.col(best_c).setZero();
    const auto r = static_cast<std::size_t>(best_r);
    const auto c = static_cast<std::size_t>(best_c);
    const bool accepted = !row_matched[r];
    if (accepted) {
      row_matched[r] = true;
      out.emplace_back(r, c);
    }
    if (symmetric) {
      matrix.row(best_r).setZero();
    }
    if (pops != nullptr) {
      pops->push_back({r, c, best, accepted});
    }
  }
  return out;
}

MatchSet align_frame(std::span<const LocalTrackSnapshot> ceiling,
                     std::span<const LocalTrackSnapshot> angled, const Homography& ceiling_to_angled,
                     const AlignOptions& options, AlignTrace* trace) {
  const auto rows = sorted_by_id(ceiling);
  const auto cols = sorted_by_id(angled);
  Eigen::MatrixXd m = intersection_matrix(rows, cols, ceiling_to_angled);
  m = (m.array() < options.min_area_px2).select(0.0, m);

  std::vector<AlignPop>* pops = nullptr;
  if (trace != nullptr) {
    trace->ceiling_ids.clear();
    trace->angled_ids.clear();
    for (const auto& s : rows) {
      trace->ceiling_ids.push_back(s.local_id);
    }
    for (const auto& s : cols) {
      trace->angled_ids.push_back(s.local_id);
    }
    trace->matrix = m;
    trace->pops.clear();
    pops = &trace->pops;
  }

  MatchSet matches;
  for (const auto& [r, c] : greedy_match(std::move(m), options.symmetric, pops)) {
    matches.emplace(rows[r].local_id, cols[c].local_id);
  }
  return matches;
}

GlobalRegistry::GlobalRegistry(RegistryConfig cfg) : cfg_(cfg) {}

long GlobalRegistry::mint() {
  const long id = next_global_++;
  identities_[id].global_id = id;
  return id;
}

std::optional<long> GlobalRegistry::global_of(const LocalKey& key) const {
  const auto it = binding_.find(key);
  if (it == binding_.end()) {
    return std::nullopt;
  }
  return it->second;
}

void GlobalRegistry::release(const LocalKey& key) {
  const auto it = binding_.find(key);
  if (it == binding_.end()) {
    return;
  }
  GlobalIdentity& g = identities_.at(it->second);
  const auto b = g.bindings.find(key.first);
  if (b != g.bindings.end() && b->second == key.second) {
    g.bindings.erase(b);
  }
  binding_.erase(it);
}

void GlobalRegistry::bind(const LocalKey& key, long global_id, long frame) {
  release(key);
  GlobalIdentity& g = identities_.at(global_id);
  // One local per camera: a previous holder on this camera loses the identity.
  const auto prev = g.bindings.find(key.first);
  if (prev != g.bindings.end()) {
    binding_.erase({key.first, prev->second});
  }
  g.bindings[key.first] = key.second;
  g.last_seen[key.first] = frame;
  binding_[key] = global_id;
  unbound_since_.erase(key);
}

std::map<LocalKey, long> GlobalRegistry::update(long frame, const MatchSet& matches,
                                                std::span<const long> ceiling_active,
                                                std::span<const long> angled_active) {
  std::vector<LocalKey> active;
  for (long id : ceiling_active) {
    active.emplace_back(kCeiling, id);
  }
  for (long id : angled_active) {
    active.emplace_back(kAngled, id);
  }
  for (const auto& key : active) {
    last_seen_[key] = frame;
    if (const auto g = global_of(key)) {
      identities_.at(*g).last_seen[key.first] = frame;
    }
  }

  for (const auto& [c, a] : matches) {
    const LocalKey ck{kCeiling, c};
    const LocalKey ak{kAngled, a};
    const auto gc = global_of(ck);
    const auto ga = global_of(ak);
    if (!gc && !ga) {
      const long g = mint();
      bind(ck, g, frame);
      bind(ak, g, frame);
    } else if (gc && !ga) {
      bind(ak, *gc, frame);
    } else if (!gc && ga) {
      bind(ck, *ga, frame);
    } else if (*gc != *ga) {
      const long keep = std::min(*gc, *ga);
      const long drop = std::max(*gc, *ga);
      bind(ck, keep, frame);
      bind(ak, keep, frame);
      GlobalIdentity& dropped = identities_.at(drop);
      for (const auto& [camera, local] : dropped.bindings) {
        binding_.erase({camera, local});
      }
      dropped.bindings.clear();
      dropped.retired = true;
    }
  }

  for (const auto& key : active) {
    if (global_of(key)) {
      continue;
    }
    const long since = unbound_since_.try_emplace(key, frame).first->second;
    if (frame - since >= cfg_.solo_grace) {
      bind(key, mint(), frame);
    }
  }

  // Release locals that have not been seen for longer than the expiry.
  std::vector<LocalKey> stale;
  for (const auto& [key, g] : binding_) {
    const auto seen = last_seen_.find(key);
    if (seen != last_seen_.end() && frame - seen->second > cfg_.expiry) {
      stale.push_back(key);
    }
  }
  for (const auto& key : stale) {
    release(key);
    last_seen_.erase(key);
    unbound_since_.erase(key);
  }

  std::map<LocalKey, long> out;
  for (const auto& key : active) {
    if (const auto g = global_of(key)) {
      out.emplace(key, *g);
    }
  }
  return out;
}

namespace {

void write_audit(std::ostringstream& os, long key, long ceiling_frame, long angled_frame,
                 const AlignTrace& trace) {
  os << "frame " << key << " ceiling_frame " << ceiling_frame << " angled_frame " << angled_frame
     << '\n';
  os << "rows";
  for (long id : trace.ceiling_ids) {
    os << ' ' << id;
  }
  os << "\ncols";
  for (long id : trace.angled_ids) {
    os << ' ' << id;
  }
  os << '\n';
  os << std::fixed << std::setprecision(3);
  for (Eigen::Index r = 0; r < trace.matrix.rows(); ++r) {
    os << "  ";
    for (Eigen::Index c = 0; c < trace.matrix.cols(); ++c) {
      os << (c == 0 ? "" : " ") << trace.matrix(r, c);
    }
    os << '\n';
  }
  for (const auto& p : trace.pops) {
    os << "pop " << trace.ceiling_ids[p.row] << ' ' << trace.angled_ids[p.col] << ' ' << p.value
       << ' ' << (p.accepted ? "accepted" : "skipped") << '\n';
  }
  os.unsetf(std::ios::floatfield);
}

}  // namespace

GlobalRunResult run_global(std::span<const LocalTrackRecord> ceiling,
                           std::span<const LocalTrackRecord> angled,
                           const Homography& ceiling_to_angled, const StreamAlignment& alignment,
                           const GlobalConfig& cfg) {
  check_sorted(ceiling);
  check_sorted(angled);

  // Both streams keyed on the ceiling timeline.
  std::map<long, std::vector<LocalTrackSnapshot>> ceiling_at;
  std::map<long, std::vector<LocalTrackSnapshot>> angled_at;
  std::set<long> keys;
  for (const auto& r : ceiling) {
    ceiling_at[r.frame].push_back({kCeiling, r.frame, r.local_id, r.box});
    keys.insert(r.frame);
  }
  for (const auto& r : angled) {
    const long key = r.frame - alignment.frame_offset;
    angled_at[key].push_back({kAngled, r.frame, r.local_id, r.box});
    keys.insert(key);
  }

  GlobalRegistry registry(cfg.registry);
  GlobalRunResult result;
  std::ostringstream audit;
  std::map<LocalKey, std::vector<GlobalTrackRecord>> pending;
  static const std::vector<LocalTrackSnapshot> kNone;

  for (long key : keys) {
    const auto cit = ceiling_at.find(key);
    const auto ait = angled_at.find(key);
    const auto& cs = cit == ceiling_at.end() ? kNone : cit->second;
    const auto& as = ait == angled_at.end() ? kNone : ait->second;

    AlignTrace trace;
    const MatchSet matches = align_frame(cs, as, ceiling_to_angled, cfg.align,
                                         cfg.audit ? &trace : nullptr);
    if (cfg.audit) {
      write_audit(audit, key, key, key + alignment.frame_offset, trace);
    }

    std::map<long, const LocalTrackSnapshot*> c_by_id;
    std::map<long, const LocalTrackSnapshot*> a_by_id;
    std::vector<long> c_ids;
    std::vector<long> a_ids;
    for (const auto& s : cs) {
      c_by_id[s.local_id] = &s;
      c_ids.push_back(s.local_id);
    }
    for (const auto& s : as) {
      a_by_id[s.local_id] = &s;
      a_ids.push_back(s.local_id);
    }
    for (const auto& [c, a] : matches) {
      const auto* cs_ = c_by_id.at(c);
      const auto* as_ = a_by_id.at(a);
      result.matches.push_back({cs_->frame, c, cs_->box, as_->frame, a, as_->box});
    }

    const auto assigned = registry.update(key, matches, c_ids, a_ids);
    for (const auto* group : {&cs, &as}) {
      for (const auto& s : *group) {
        const LocalKey lk{s.camera, s.local_id};
        const auto g = assigned.find(lk);
        if (g == assigned.end()) {
          pending[lk].push_back({s.camera, s.frame, 0, s.box});
          continue;
        }
        if (const auto held = pending.find(lk); held != pending.end()) {
          for (auto& rec : held->second) {
            rec.global_id = g->second;
            result.tracks.push_back(rec);
          }
          pending.erase(held);
        }
        result.tracks.push_back({s.camera, s.frame, g->second, s.box});
      }
    }
    ++result.frames;
  }

  std::stable_sort(result.tracks.begin(), result.tracks.end(),
                   [](const GlobalTrackRecord& a, const GlobalTrackRecord& b) {
                     if (a.frame != b.frame) return a.frame < b.frame;
                     if (a.camera != b.camera) return a.camera < b.camera;
                     return a.global_id < b.global_id;
                   });
  result.global_ids = registry.minted();
  result.audit = audit.str();
  return result;
}

}  // namespace pentrack
