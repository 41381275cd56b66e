#pragma once

// Moving-region detection on a moving camera: compensated frame difference,
// then intra-frame merging by centroid/color proximity and inter-frame
// merging by motion consistency.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "hexatrack/error.hpp"
#include "hexatrack/feature_match.hpp"
#include "hexatrack/image.hpp"
#include "hexatrack/imgproc.hpp"
#include "hexatrack/motion_comp.hpp"

namespace hexatrack {

struct Region {
  PixelSet pixels;  // sorted raster order
  Box bbox;
  Vec2 centroid;
  HsvColor hsv;  // mean over the region's pixels
  std::size_t area = 0;
};

/// A region of frame n matched with one of frame n-1. Indices refer to the
/// region lists given to pair_inter_frame.
struct EquivalencePair {
  std::size_t current = 0;
  std::size_t previous = 0;
  Vec2 motion;  // centroid_n - centroid_{n-1}
};

/// Region merging thresholds. th1/th3/th5/th6 in px, th2/th4 in squared HSV
/// units on the [0,255] scale.
struct MergeParams {
  double th1 = 30.0;
  double th2 = 3000.0;
  double th3 = 30.0;
  double th4 = 8000.0;
  double th5 = 50.0;
  double th6 = 30.0;

  static MergeParams disabled() { return {0, 0, 0, 0, 0, 0}; }

  void validate() const {
    for (double v : {th1, th2, th3, th4, th5, th6}) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(Errc::invalid_parameter, "merge thresholds must be >= 0");
    }
  }

  friend bool operator==(const MergeParams&, const MergeParams&) = default;
};

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

inline Box bbox_of(const PixelSet& px) {
  int x0 = px.front().x, x1 = x0, y0 = px.front().y, y1 = y0;
  for (const auto& p : px) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 - x0 + 1),
          static_cast<double>(y1 - y0 + 1)};
}

inline Vec2 centroid_of(const PixelSet& px) {
  double sx = 0.0, sy = 0.0;
  for (const auto& p : px) {
    sx += p.x;
    sy += p.y;
  }
  const double n = static_cast<double>(px.size());
  return {sx / n, sy / n};
}

inline Region merge_group(std::span<const Region* const> members) {
  Region out;
  double hs = 0.0, ss = 0.0, vs = 0.0;
  for (const Region* r : members) {
    out.pixels.insert(out.pixels.end(), r->pixels.begin(), r->pixels.end());
    const double a = static_cast<double>(r->area);
    hs += a * r->hsv.h;
    ss += a * r->hsv.s;
    vs += a * r->hsv.v;
    out.area += r->area;
  }
  std::sort(out.pixels.begin(), out.pixels.end());
  const double total = static_cast<double>(out.area);
  out.hsv = {hs / total, ss / total, vs / total};
  out.centroid = centroid_of(out.pixels);
  out.bbox = bbox_of(out.pixels);
  return out;
}

// Groups regions by union-find root; output ordered by each group's first
// pixel so the result does not depend on input order.
inline std::vector<std::vector<std::size_t>> groups_of(DisjointSets& sets, std::span<const Region> regions) {
  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < regions.size(); ++i) by_root[sets.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [root, members] : by_root) groups.push_back(std::move(members));
  auto first_pixel = [&](const std::vector<std::size_t>& g) {
    PixelCoord best = regions[g.front()].pixels.front();
    for (std::size_t i : g) best = std::min(best, regions[i].pixels.front());
    return best;
  };
  std::sort(groups.begin(), groups.end(),
            [&](const auto& a, const auto& b) { return first_pixel(a) < first_pixel(b); });
  return groups;
}

}  // namespace detail

/// Connected components of `b` with at least `min_area` pixels, described by
/// the colors of `src` under each component.
inline std::vector<Region> extract_regions(const BinaryImage& b, const Frame& src, std::size_t min_area) {
  require_same_shape(b, src, "extract_regions: mask and frame sizes differ");
  std::vector<Region> out;
  for (auto& comp : connected_components(b)) {
    if (comp.size() < std::max<std::size_t>(min_area, 1)) continue;
    Region r;
    double hs = 0.0, ss = 0.0, vs = 0.0;
    for (const auto& p : comp) {
      const HsvColor c = rgb_to_hsv(src.at(p.x, p.y));
      hs += c.h;
      ss += c.s;
      vs += c.v;
    }
    const double n = static_cast<double>(comp.size());
    r.hsv = {hs / n, ss / n, vs / n};
    r.area = comp.size();
    r.centroid = detail::centroid_of(comp);
    r.bbox = detail::bbox_of(comp);
    r.pixels = std::move(comp);
    out.push_back(std::move(r));
  }
  return out;
}

/// Squared Euclidean distance between HSV triples.
inline double hsv_distance2(const HsvColor& a, const HsvColor& b) {
  const double dh = a.h - b.h;
  const double ds = a.s - b.s;
  const double dv = a.v - b.v;
  return dh * dh + ds * ds + dv * dv;
}

/// Unites regions whose centroids are closer than th1 and whose colors are
/// closer than th2, closed transitively.
inline std::vector<Region> merge_intra_frame(std::span<const Region> regions, const MergeParams& p) {
  p.validate();
  if (regions.empty()) return {};
  detail::DisjointSets sets(regions.size());
  for (std::size_t i = 0; i < regions.size(); ++i) {
    for (std::size_t j = i + 1; j < regions.size(); ++j) {
      if ((regions[i].centroid - regions[j].centroid).norm() < p.th1 &&
          hsv_distance2(regions[i].hsv, regions[j].hsv) < p.th2) {
        sets.unite(i, j);
      }
    }
  }
  std::vector<Region> out;
  for (const auto& group : detail::groups_of(sets, regions)) {
    std::vector<const Region*> members;
    for (std::size_t i : group) members.push_back(&regions[i]);
    out.push_back(detail::merge_group(members));
  }
  return out;
}

/// Greedy one-to-one matching of current to previous regions, closest
/// centroids first, among candidates within th3 (distance) and th4 (color).
inline std::vector<EquivalencePair> pair_inter_frame(std::span<const Region> current, std::span<const Region> previous,
                                                     const MergeParams& p) {
  p.validate();
  struct Candidate {
    double distance;
    std::size_t cur;
    std::size_t prev;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < current.size(); ++i) {
    for (std::size_t j = 0; j < previous.size(); ++j) {
      const double d = (current[i].centroid - previous[j].centroid).norm();
      if (d < p.th3 && hsv_distance2(current[i].hsv, previous[j].hsv) < p.th4) candidates.push_back({d, i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.cur != b.cur) return a.cur < b.cur;
    return a.prev < b.prev;
  });
  std::vector<std::uint8_t> cur_used(current.size(), 0), prev_used(previous.size(), 0);
  std::vector<EquivalencePair> out;
  for (const auto& c : candidates) {
    if (cur_used[c.cur] || prev_used[c.prev]) continue;
    cur_used[c.cur] = prev_used[c.prev] = 1;
    out.push_back({c.cur, c.prev, current[c.cur].centroid - previous[c.prev].centroid});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.current < b.current; });
  return out;
}

/// Motion consistency: Euclidean distance between two pairs' motion vectors.
inline double motion_consistency(const EquivalencePair& a, const EquivalencePair& b) {
  return std::hypot(a.motion.x - b.motion.x, a.motion.y - b.motion.y);
}

struct MotionMergeResult {
  std::vector<Region> regions;
  std::vector<std::optional<Vec2>> motions;  // area-weighted pair motion, empty when unpaired
};

/// Unites the current-frame regions of pairs closer than th5 whose motion
/// consistency is below th6. Regions without a pair pass through.
inline MotionMergeResult merge_by_motion_detailed(std::span<const Region> current,
                                                  std::span<const EquivalencePair> pairs, const MergeParams& p) {
  p.validate();
  MotionMergeResult result;
  if (current.empty()) return result;
  detail::DisjointSets sets(current.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      const auto& a = pairs[i];
      const auto& b = pairs[j];
      if ((current[a.current].centroid - current[b.current].centroid).norm() < p.th5 &&
          motion_consistency(a, b) < p.th6) {
        sets.unite(a.current, b.current);
      }
    }
  }
  std::vector<std::optional<Vec2>> motion_of(current.size());
  for (const auto& pr : pairs) motion_of[pr.current] = pr.motion;

  for (const auto& group : detail::groups_of(sets, current)) {
    std::vector<const Region*> members;
    Vec2 weighted;
    double weight = 0.0;
    for (std::size_t i : group) {
      members.push_back(&current[i]);
      if (motion_of[i]) {
        const double a = static_cast<double>(current[i].area);
        weighted = weighted + a * *motion_of[i];
        weight += a;
      }
    }
    result.regions.push_back(members.size() == 1 ? current[group.front()] : detail::merge_group(members));
    result.motions.push_back(weight > 0.0 ? std::optional<Vec2>((1.0 / weight) * weighted) : std::nullopt);
  }
  return result;
}

inline std::vector<Region> merge_by_motion(std::span<const Region> current, std::span<const EquivalencePair> pairs,
                                           const MergeParams& p) {
  return merge_by_motion_detailed(current, pairs, p).regions;
}

// ---------------------------------------------------------------------------
// Full detection step

struct DetectionConfig {
  double blur_sigma = 1.0;
  int diff_threshold = 30;
  std::size_t min_area = 40;
  std::size_t max_points = 1000;
  double knn_ratio = 0.7;
  DetectorParams detector;
  FilterParams filter;
};

struct DetectedRegion {
  Region region;               // frame-n pixel coordinates
  std::optional<Vec2> motion;  // inter-frame motion when paired
};

struct DetectionResult {
  std::vector<DetectedRegion> regions;
  AffineTransform ego_motion;  // maps frame n-1 points onto frame n
  bool compensated = false;    // false when the identity fallback was used
  std::size_t matches = 0;
  std::size_t inliers = 0;
};

/// Stateful detection pipeline for one frame stream. Remembers the previous
/// step's regions for inter-frame merging.
class MotionDetector {
 public:
  explicit MotionDetector(MergeParams merge = {}, DetectionConfig config = {})
      : merge_(merge), config_(config) {
    merge_.validate();
  }

  const MergeParams& merge_params() const noexcept { return merge_; }
  const DetectionConfig& config() const noexcept { return config_; }
  void set_merge_params(const MergeParams& p) {
    p.validate();
    merge_ = p;
  }
  void set_config(const DetectionConfig& c) { config_ = c; }
  void reset() {
    previous_regions_.clear();
    cache_.reset();
  }

  DetectionResult detect_step(const Frame& prev, const Frame& curr) {
    require_same_shape(prev, curr, "detect_step: frame sizes differ");
    DetectionResult result;
    const GrayImage gray_prev = to_grayscale(prev);
    const GrayImage gray_curr = to_grayscale(curr);

    const auto feat_prev = features_for(prev, gray_prev);
    auto feat_curr = detect_and_describe(gray_curr, config_.max_points, config_.detector);
    const auto matches = symmetric_knn_match(feat_prev, feat_curr, config_.knn_ratio);
    result.matches = matches.size();
    cache_ = Cache{curr.index(), curr.width(), curr.height(), std::vector<Rgb>(curr.pixels().begin(), curr.pixels().end()),
                   std::move(feat_curr)};

    AffineTransform ego = AffineTransform::identity();
    try {
      const auto filtered = adaptive_outlier_filter(matches, config_.filter);
      if (std::fabs(filtered.fit.det()) > 1e-6) {
        ego = filtered.fit;
        result.compensated = true;
        result.inliers = filtered.inliers.size();
      }
    } catch (const Error&) {
      result.compensated = false;
    }
    result.ego_motion = ego;
    if (!result.compensated) previous_regions_.clear();

    // Bring frame n into frame n-1's coordinates.
    const AffineTransform to_prev = ego.inverse();
    const Frame warped = warp_affine(curr, to_prev);
    const GrayImage warped_gray = warp_affine(gray_curr, to_prev);

    const GrayImage blur_prev = gaussian_blur(gray_prev, config_.blur_sigma);
    const GrayImage blur_curr = gaussian_blur(warped_gray, config_.blur_sigma);
    BinaryImage diff = abs_diff_threshold(blur_prev, blur_curr, config_.diff_threshold);
    mask_invalid_border(diff, ego);
    const BinaryImage cleaned = morph_open_3x3(diff);

    auto regions = extract_regions(cleaned, warped, config_.min_area);
    regions = merge_intra_frame(regions, merge_);
    const auto pairs = pair_inter_frame(regions, previous_regions_, merge_);
    auto merged = merge_by_motion_detailed(regions, pairs, merge_);

    // Report in frame-n coordinates; that is also the next step's n-1 frame.
    for (std::size_t i = 0; i < merged.regions.size(); ++i) {
      Region mapped = map_region(merged.regions[i], ego, curr.width(), curr.height());
      if (mapped.area == 0) continue;
      result.regions.push_back({std::move(mapped), merged.motions[i]});
    }
    // Memory keeps the pieces from before the motion merge, so next frame's
    // fragments find their own counterparts instead of competing for one
    // merged blob.
    previous_regions_.clear();
    if (result.compensated) {
      for (const auto& r : regions) {
        Region mapped = map_region(r, ego, curr.width(), curr.height());
        if (mapped.area > 0) previous_regions_.push_back(std::move(mapped));
      }
    }
    return result;
  }

  std::span<const Region> previous_regions() const noexcept { return previous_regions_; }

 private:
  struct Cache {
    std::int64_t index;
    int width;
    int height;
    std::vector<Rgb> pixels;
    std::vector<Feature> features;
  };

  std::vector<Feature> features_for(const Frame& f, const GrayImage& gray) const {
    if (cache_ && cache_->index == f.index() && cache_->width == f.width() && cache_->height == f.height() &&
        std::equal(cache_->pixels.begin(), cache_->pixels.end(), f.pixels().begin())) {
      return cache_->features;
    }
    return detect_and_describe(gray, config_.max_points, config_.detector);
  }

  // Clears pixels whose warped source fell outside frame n (plus the blur
  // footprint), where the zero fill would read as motion.
  void mask_invalid_border(BinaryImage& diff, const AffineTransform& ego) const {
    const double margin = std::ceil(3.0 * config_.blur_sigma) + 1.0;
    const double w = diff.width() - 1;
    const double h = diff.height() - 1;
    for (int y = 0; y < diff.height(); ++y) {
      for (int x = 0; x < diff.width(); ++x) {
        const Vec2 s = ego.apply({static_cast<double>(x), static_cast<double>(y)});
        if (s.x < margin || s.y < margin || s.x > w - margin || s.y > h - margin) diff.at(x, y) = 0;
      }
    }
  }

  static Region map_region(const Region& r, const AffineTransform& t, int width, int height) {
    Region out;
    out.hsv = r.hsv;
    out.pixels.reserve(r.pixels.size());
    for (const auto& p : r.pixels) {
      const Vec2 q = t.apply({static_cast<double>(p.x), static_cast<double>(p.y)});
      const int x = static_cast<int>(std::lround(q.x));
      const int y = static_cast<int>(std::lround(q.y));
      if (x >= 0 && y >= 0 && x < width && y < height) out.pixels.push_back({x, y});
    }
    std::sort(out.pixels.begin(), out.pixels.end());
    out.pixels.erase(std::unique(out.pixels.begin(), out.pixels.end()), out.pixels.end());
    out.area = out.pixels.size();
    if (out.area > 0) {
      out.centroid = detail::centroid_of(out.pixels);
      out.bbox = detail::bbox_of(out.pixels);
    }
    return out;
  }

  MergeParams merge_;
  DetectionConfig config_;
  std::vector<Region> previous_regions_;
  std::optional<Cache> cache_;
};

}  // namespace hexatrack
