#pragma once

#include "pentrack/geometry.hpp"
#include "pentrack/polygons.hpp"

#include <Eigen/Core>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pentrack {

inline constexpr const char* kCeiling = "ceiling";
inline constexpr const char* kAngled = "angled";

struct LocalTrackSnapshot {
  std::string camera;
  long frame = 0;
  long local_id = 0;
  BoundingBox box;
};

// ceiling local_id -> angled local_id for one aligned frame.
using MatchSet = std::map<long, long>;

struct AlignOptions {
  // Intersections below this area (px^2) count as no overlap.
  double min_area_px2 = 0.0;
  // Also zero the matched ceiling row after each pop. When off, only the
  // angled column is zeroed.
  bool symmetric = false;
};

struct AlignPop {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
  bool accepted = false;
};

// Everything align_frame decided, for the audit log.
struct AlignTrace {
  std::vector<long> ceiling_ids;  // row order
  std::vector<long> angled_ids;   // column order
  Eigen::MatrixXd matrix;         // after min-area thresholding
  std::vector<AlignPop> pops;
};

// Row i / column j of the overlap matrix follow ceiling / angled snapshots
// sorted by local_id. A ceiling box whose projection reaches the horizon
// contributes a zero row.
Eigen::MatrixXd intersection_matrix(std::span<const LocalTrackSnapshot> ceiling,
                                    std::span<const LocalTrackSnapshot> angled,
                                    const Homography& ceiling_to_angled);

// Greedy matching over an overlap matrix, returning (row, col) pairs in pop
// order. Ties go to the smallest row, then the smallest column.
std::vector<std::pair<std::size_t, std::size_t>> greedy_match(Eigen::MatrixXd matrix,
                                                              bool symmetric,
                                                              std::vector<AlignPop>* pops = nullptr);

MatchSet align_frame(std::span<const LocalTrackSnapshot> ceiling,
                     std::span<const LocalTrackSnapshot> angled, const Homography& ceiling_to_angled,
                     const AlignOptions& options = {}, AlignTrace* trace = nullptr);

struct GlobalIdentity {
  long global_id = 0;
  std::map<std::string, long> bindings;   // camera -> local_id
  std::map<std::string, long> last_seen;  // camera -> frame
  bool retired = false;
};

struct RegistryConfig {
  int solo_grace = 15;
  int expiry = 150;
};

using LocalKey = std::pair<std::string, long>;  // (camera, local_id)

// Persistent cross-camera identity registry; single writer, frames applied
// in order.
class GlobalRegistry {
 public:
  explicit GlobalRegistry(RegistryConfig cfg = {});

  // Applies one aligned frame and returns the binding of every active local
  // that currently has one.
  std::map<LocalKey, long> update(long frame, const MatchSet& matches,
                                  std::span<const long> ceiling_active,
                                  std::span<const long> angled_active);

  std::optional<long> global_of(const LocalKey& key) const;
  const std::map<long, GlobalIdentity>& identities() const { return identities_; }
  long minted() const { return next_global_ - 1; }

 private:
  long mint();
  void bind(const LocalKey& key, long global_id, long frame);
  void release(const LocalKey& key);

  RegistryConfig cfg_;
  std::map<long, GlobalIdentity> identities_;
  std::map<LocalKey, long> binding_;
  std::map<LocalKey, long> last_seen_;
  std::map<LocalKey, long> unbound_since_;
  long next_global_ = 1;
};

struct StreamAlignment {
  // angled frame = ceiling frame + frame_offset
  long frame_offset = 0;
};

struct LocalTrackRecord {
  long frame = 0;
  long local_id = 0;
  BoundingBox box;

  friend bool operator==(const LocalTrackRecord&, const LocalTrackRecord&) = default;
};

struct GlobalTrackRecord {
  std::string camera;
  long frame = 0;
  long global_id = 0;
  BoundingBox box;

  friend bool operator==(const GlobalTrackRecord&, const GlobalTrackRecord&) = default;
};

// One predicted cross-view match, with the frames and boxes of both sides.
struct MatchRecord {
  long ceiling_frame = 0;
  long ceiling_id = 0;
  BoundingBox ceiling_box;
  long angled_frame = 0;
  long angled_id = 0;
  BoundingBox angled_box;

  friend bool operator==(const MatchRecord&, const MatchRecord&) = default;
};

struct GlobalConfig {
  AlignOptions align;
  RegistryConfig registry;
  bool audit = false;
};

struct GlobalRunResult {
  std::vector<GlobalTrackRecord> tracks;  // sorted by (frame, camera, global_id)
  std::vector<MatchRecord> matches;       // in frame order
  std::string audit;                      // empty unless requested
  long frames = 0;
  long global_ids = 0;
};

// Aligns the two streams frame by frame (matching, then registry update).
// Records of a local that is still waiting for a binding are held back and
// emitted with the identity it eventually receives. Throws OutOfOrderFrame
// on unsorted input.
GlobalRunResult run_global(std::span<const LocalTrackRecord> ceiling,
                           std::span<const LocalTrackRecord> angled,
                           const Homography& ceiling_to_angled, const StreamAlignment& alignment,
                           const GlobalConfig& cfg = {});

}  // namespace pentrack
