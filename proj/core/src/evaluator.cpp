#include "smoe/evaluator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <tuple>

#include "smoe/errors.hpp"

namespace smoe {

std::size_t BoundaryMap::count() const {
  return static_cast<std::size_t>(std::count(on.begin(), on.end(), std::uint8_t{1}));
}

BoundaryMap binarize(const Image& prob, double threshold) {
  const Image gray = to_luma(prob);
  BoundaryMap out(gray.height, gray.width);
  for (std::size_t i = 0; i < gray.data.size(); ++i) out.on[i] = gray.data[i] >= threshold ? 1 : 0;
  out.threshold = threshold;
  return out;
}

BoundaryMap boundary_from_image(const Image& image) { return binarize(image, 0.5); }

Image boundary_to_image(const BoundaryMap& map) {
  Image out(map.height, map.width, 1);
  for (std::size_t i = 0; i < map.on.size(); ++i) out.data[i] = map.on[i] ? 1.0 : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Thinning
// ---------------------------------------------------------------------------

namespace {

// Neighbours x1..x8 counter-clockwise from east: E, NE, N, NW, W, SW, S, SE.
constexpr int kDy[8] = {0, -1, -1, -1, 0, 1, 1, 1};
constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr std::size_t kThinMargin = 2;

bool deletable(const std::array<bool, 8>& x, bool first_pass) {
  auto nb = [&](int i) { return x[static_cast<std::size_t>((i - 1) % 8)]; };  // 1-based, x9 = x1
  int crossings = 0;
  for (int i = 1; i <= 4; ++i) {
    if (!nb(2 * i - 1) && (nb(2 * i) || nb(2 * i + 1))) ++crossings;
  }
  if (crossings != 1) return false;
  int n1 = 0, n2 = 0;
  for (int k = 1; k <= 4; ++k) {
    n1 += (nb(2 * k - 1) || nb(2 * k)) ? 1 : 0;
    n2 += (nb(2 * k) || nb(2 * k + 1)) ? 1 : 0;
  }
  const int m = std::min(n1, n2);
  if (m < 2 || m > 3) return false;
  if (first_pass) return !((nb(2) || nb(3) || !nb(8)) && nb(1));
  return !((nb(6) || nb(7) || !nb(4)) && nb(5));
}

}  // namespace

namespace {

// True when the set neighbours stay one 8-connected group without the centre
// pixel, i.e. removing it cannot split the foreground. It may open a hole.
bool keeps_foreground_connected(const std::array<bool, 8>& x) {
  std::array<int, 8> group{};
  group.fill(-1);
  int groups = 0;
  for (std::size_t start = 0; start < 8; ++start) {
    if (!x[start] || group[start] >= 0) continue;
    std::array<std::size_t, 8> stack{};
    std::size_t top = 0;
    stack[top++] = start;
    group[start] = groups;
    while (top > 0) {
      const auto i = stack[--top];
      for (std::size_t j = 0; j < 8; ++j) {
        if (x[j] && group[j] < 0 && std::abs(kDy[i] - kDy[j]) <= 1 && std::abs(kDx[i] - kDx[j]) <= 1) {
          group[j] = groups;
          stack[top++] = j;
        }
      }
    }
    ++groups;
  }
  return groups == 1;
}

class ThinningGrid {
 public:
  explicit ThinningGrid(BoundaryMap& map)
      : map_(map), h_(static_cast<std::ptrdiff_t>(map.height)), w_(static_cast<std::ptrdiff_t>(map.width)) {}

  std::ptrdiff_t height() const { return h_; }
  std::ptrdiff_t width() const { return w_; }

  bool get(std::ptrdiff_t y, std::ptrdiff_t x) const {
    return y >= 0 && y < h_ && x >= 0 && x < w_ && map_.on[static_cast<std::size_t>(y * w_ + x)] != 0;
  }

  std::array<bool, 8> neighbours(std::ptrdiff_t y, std::ptrdiff_t x) const {
    std::array<bool, 8> n{};
    for (std::size_t k = 0; k < 8; ++k) n[k] = get(y + kDy[k], x + kDx[k]);
    return n;
  }

  void clear(std::ptrdiff_t y, std::ptrdiff_t x) { map_.on[static_cast<std::size_t>(y * w_ + x)] = 0; }

 private:
  BoundaryMap& map_;
  std::ptrdiff_t h_, w_;
};

bool guo_hall_pass(ThinningGrid& grid, bool first_pass, std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>>& doomed) {
  doomed.clear();
  for (std::ptrdiff_t y = 0; y < grid.height(); ++y) {
    for (std::ptrdiff_t x = 0; x < grid.width(); ++x) {
      if (grid.get(y, x) && deletable(grid.neighbours(y, x), first_pass)) doomed.emplace_back(y, x);
    }
  }
  for (auto [y, x] : doomed) grid.clear(y, x);
  return !doomed.empty();
}

// Sequentially removes pixels that complete a 2×2 block whenever that keeps
// the foreground connected.
bool break_squares(ThinningGrid& grid) {
  bool changed = false;
  for (std::ptrdiff_t y = 0; y + 1 < grid.height(); ++y) {
    for (std::ptrdiff_t x = 0; x + 1 < grid.width(); ++x) {
      if (!(grid.get(y, x) && grid.get(y, x + 1) && grid.get(y + 1, x) && grid.get(y + 1, x + 1))) continue;
      for (auto [dy, dx] : {std::pair{0, 0}, {0, 1}, {1, 0}, {1, 1}}) {
        if (keeps_foreground_connected(grid.neighbours(y + dy, x + dx))) {
          grid.clear(y + dy, x + dx);
          changed = true;
          break;
        }
      }
    }
  }
  return changed;
}

}  // namespace

namespace {

BoundaryMap thin_once(const BoundaryMap& binary) {
  // Thinning runs on a copy extended by a mirrored margin (zero beyond it),
  // so structures that leave the frame are not shortened at the border.
  const auto h = binary.height, w = binary.width;
  const std::size_t my = std::min(kThinMargin, h - 1), mx = std::min(kThinMargin, w - 1);
  BoundaryMap work(h + 2 * my, w + 2 * mx);
  auto mirror = [](std::ptrdiff_t i, std::size_t n) {
    const auto last = static_cast<std::ptrdiff_t>(n) - 1;
    return static_cast<std::size_t>(i < 0 ? -i : (i > last ? 2 * last - i : i));
  };
  for (std::size_t y = 0; y < work.height; ++y) {
    for (std::size_t x = 0; x < work.width; ++x) {
      const auto sy = mirror(static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(my), h);
      const auto sx = mirror(static_cast<std::ptrdiff_t>(x) - static_cast<std::ptrdiff_t>(mx), w);
      work.on[y * work.width + x] = binary.on[sy * w + sx];
    }
  }

  ThinningGrid grid(work);
  std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> doomed;
  bool changed = true;
  while (changed) {
    bool peeled = true;
    while (peeled) {
      const bool a = guo_hall_pass(grid, true, doomed);
      const bool b = guo_hall_pass(grid, false, doomed);
      peeled = a || b;
    }
    changed = break_squares(grid);
  }

  BoundaryMap out = binary;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out.on[y * w + x] = work.on[(y + my) * work.width + x + mx];
  return out;
}

}  // namespace

BoundaryMap thin(const BoundaryMap& binary) {
  if (binary.on.empty()) return binary;
  // The mirrored margin is rebuilt from the current map on every round, so
  // repeat until a round removes nothing; pixels are only ever removed.
  // Blocks that the mirrored margin makes look interior are broken on the
  // map itself.
  auto round = [](const BoundaryMap& m) {
    BoundaryMap r = thin_once(m);
    ThinningGrid grid(r);
    break_squares(grid);
    return r;
  };
  BoundaryMap cur = round(binary);
  for (;;) {
    BoundaryMap next = round(cur);
    if (next.on == cur.on) return cur;
    cur = std::move(next);
  }
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

namespace {

struct Candidate {
  long d2;
  std::size_t pred;
  std::size_t gt;
};

struct Frame {
  std::size_t left;
  std::size_t next_edge;
  std::size_t chosen;
};

// Depth-first search for an augmenting path from free prediction `root`,
// sharing `visited` across one phase. Flips the path when found.
bool augment(std::size_t root, const std::vector<std::vector<std::size_t>>& adj, std::vector<std::ptrdiff_t>& pred_of_gt,
             std::vector<std::ptrdiff_t>& gt_of_pred, std::vector<std::uint8_t>& visited) {
  std::vector<Frame> stack{{root, 0, 0}};
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& edges = adj[top.left];
    if (top.next_edge == edges.size()) {
      stack.pop_back();
      continue;
    }
    const std::size_t g = edges[top.next_edge++];
    if (visited[g]) continue;
    visited[g] = 1;
    if (pred_of_gt[g] < 0) {
      top.chosen = g;
      for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
        pred_of_gt[it->chosen] = static_cast<std::ptrdiff_t>(it->left);
        gt_of_pred[it->left] = static_cast<std::ptrdiff_t>(it->chosen);
      }
      return true;
    }
    top.chosen = g;
    stack.push_back({static_cast<std::size_t>(pred_of_gt[g]), 0, 0});
  }
  return false;
}

}  // namespace

MatchResult match_boundaries_detailed(const BoundaryMap& pred, const BoundaryMap& gt, double tol_px,
                                      MatchStrategy strategy) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw ShapeError("match_boundaries: prediction is " + std::to_string(pred.height) + "x" +
                     std::to_string(pred.width) + " but ground truth is " + std::to_string(gt.height) + "x" +
                     std::to_string(gt.width));
  }
  if (!(tol_px > 0.0)) throw Error("match_boundaries: tolerance must be positive");
  const auto h = pred.height, w = pred.width;

  std::vector<std::size_t> pred_px, gt_px;
  std::vector<std::ptrdiff_t> gt_index(h * w, -1);
  for (std::size_t i = 0; i < h * w; ++i) {
    if (pred.on[i]) pred_px.push_back(i);
    if (gt.on[i]) {
      gt_index[i] = static_cast<std::ptrdiff_t>(gt_px.size());
      gt_px.push_back(i);
    }
  }

  const auto r = static_cast<std::ptrdiff_t>(std::floor(tol_px));
  const double tol2 = tol_px * tol_px;
  std::vector<Candidate> pairs;
  for (std::size_t p = 0; p < pred_px.size(); ++p) {
    const auto py = static_cast<std::ptrdiff_t>(pred_px[p] / w), px = static_cast<std::ptrdiff_t>(pred_px[p] % w);
    for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
      const auto y = py + dy;
      if (y < 0 || y >= static_cast<std::ptrdiff_t>(h)) continue;
      for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
        const auto x = px + dx;
        if (x < 0 || x >= static_cast<std::ptrdiff_t>(w)) continue;
        const long d2 = static_cast<long>(dy * dy + dx * dx);
        if (static_cast<double>(d2) > tol2) continue;
        const auto g = gt_index[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
        if (g >= 0) pairs.push_back({d2, p, static_cast<std::size_t>(g)});
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const Candidate& a, const Candidate& b) { return std::tie(a.d2, a.pred, a.gt) < std::tie(b.d2, b.pred, b.gt); });

  std::vector<std::ptrdiff_t> gt_of_pred(pred_px.size(), -1), pred_of_gt(gt_px.size(), -1);
  for (const auto& c : pairs) {
    if (gt_of_pred[c.pred] < 0 && pred_of_gt[c.gt] < 0) {
      gt_of_pred[c.pred] = static_cast<std::ptrdiff_t>(c.gt);
      pred_of_gt[c.gt] = static_cast<std::ptrdiff_t>(c.pred);
    }
  }

  if (strategy == MatchStrategy::greedy_repaired) {
    // Adjacency in the same distance order as the greedy pass.
    std::vector<std::vector<std::size_t>> adj(pred_px.size());
    for (const auto& c : pairs) adj[c.pred].push_back(c.gt);
    std::vector<std::uint8_t> visited(gt_px.size());
    bool grew = true;
    while (grew) {
      grew = false;
      std::fill(visited.begin(), visited.end(), std::uint8_t{0});
      for (std::size_t p = 0; p < pred_px.size(); ++p) {
        if (gt_of_pred[p] < 0 && !adj[p].empty() && augment(p, adj, pred_of_gt, gt_of_pred, visited)) grew = true;
      }
    }
  }

  MatchResult result;
  result.pred_matched.assign(h * w, 0);
  result.gt_matched.assign(h * w, 0);
  for (std::size_t p = 0; p < pred_px.size(); ++p) {
    if (gt_of_pred[p] >= 0) {
      result.pred_matched[pred_px[p]] = 1;
      result.gt_matched[gt_px[static_cast<std::size_t>(gt_of_pred[p])]] = 1;
      ++result.counts.tp;
    }
  }
  result.counts.fp = pred_px.size() - result.counts.tp;
  result.counts.fn = gt_px.size() - result.counts.tp;
  return result;
}

MatchCounts match_boundaries(const BoundaryMap& pred, const BoundaryMap& gt, double tol_px, MatchStrategy strategy) {
  return match_boundaries_detailed(pred, gt, tol_px, strategy).counts;
}

// ---------------------------------------------------------------------------
// Sweeps and summaries
// ---------------------------------------------------------------------------

double f_measure(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double SweepCounts::precision() const {
  return total_pred == 0 ? 0.0 : static_cast<double>(matched_pred) / static_cast<double>(total_pred);
}
double SweepCounts::recall() const {
  return total_gt == 0 ? 0.0 : static_cast<double>(matched_gt) / static_cast<double>(total_gt);
}
double SweepCounts::f() const { return f_measure(precision(), recall()); }

SweepCounts& SweepCounts::operator+=(const SweepCounts& o) {
  matched_gt += o.matched_gt;
  total_gt += o.total_gt;
  matched_pred += o.matched_pred;
  total_pred += o.total_pred;
  return *this;
}

std::vector<double> default_thresholds(std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = static_cast<double>(k + 1) / static_cast<double>(n + 1);
  return t;
}

double default_tolerance(std::size_t height, std::size_t width) {
  return 0.0075 * std::hypot(static_cast<double>(height), static_cast<double>(width));
}

namespace {

void check_thresholds(const std::vector<double>& thresholds) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0)) throw Error("thresholds must lie strictly inside (0,1)");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) throw Error("thresholds must be strictly increasing");
  }
}

}  // namespace

ImageSweep sweep_boundaries(const BoundaryAtThreshold& boundary_at, const std::vector<BoundaryMap>& gts,
                            const std::vector<double>& thresholds, double tol_px) {
  check_thresholds(thresholds);
  ImageSweep sweep;
  sweep.counts.reserve(thresholds.size());
  for (double t : thresholds) {
    const BoundaryMap pred = boundary_at(t);
    SweepCounts c;
    std::vector<std::uint8_t> any_match(pred.on.size(), 0);
    for (const auto& gt : gts) {
      const auto m = match_boundaries_detailed(pred, gt, tol_px);
      c.matched_gt += m.counts.tp;
      c.total_gt += m.counts.tp + m.counts.fn;
      for (std::size_t i = 0; i < any_match.size(); ++i) any_match[i] |= m.pred_matched[i];
    }
    c.total_pred = pred.count();
    c.matched_pred = static_cast<std::size_t>(std::count(any_match.begin(), any_match.end(), std::uint8_t{1}));
    sweep.counts.push_back(c);
  }
  return sweep;
}

ImageSweep pr_sweep(const Image& prob, const std::vector<BoundaryMap>& gts, const std::vector<double>& thresholds,
                    double tol_px) {
  const Image gray = to_luma(prob);
  return sweep_boundaries([&](double t) { return thin(binarize(gray, t)); }, gts, thresholds, tol_px);
}

EvalReport summarize(const std::vector<ImageSweep>& per_image, const std::vector<double>& thresholds,
                     std::string method) {
  if (per_image.empty()) throw Error("summarize: no images");
  const auto nt = thresholds.size();
  if (nt == 0) throw Error("summarize: no thresholds");
  for (const auto& img : per_image) {
    if (img.counts.size() != nt) throw Error("summarize: image '" + img.id + "' has the wrong number of thresholds");
  }

  EvalReport report;
  report.method = std::move(method);
  report.thresholds = thresholds;
  report.per_image = per_image;

  report.per_threshold.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    auto& rec = report.per_threshold[t];
    rec.threshold = thresholds[t];
    for (const auto& img : per_image) rec.counts += img.counts[t];
    rec.precision = rec.counts.precision();
    rec.recall = rec.counts.recall();
    rec.f = rec.counts.f();
    if (rec.f > report.per_threshold[report.ods_index].f) report.ods_index = t;
  }
  report.ods_threshold = thresholds[report.ods_index];
  report.ods_f = report.per_threshold[report.ods_index].f;

  SweepCounts best_total;
  for (const auto& img : per_image) {
    ImageBest best;
    best.id = img.id;
    for (std::size_t t = 1; t < nt; ++t) {
      if (img.counts[t].f() > img.counts[best.threshold_index].f()) best.threshold_index = t;
    }
    best.threshold = thresholds[best.threshold_index];
    best.counts = img.counts[best.threshold_index];
    best.precision = best.counts.precision();
    best.recall = best.counts.recall();
    best.f = best.counts.f();
    best_total += best.counts;
    report.per_image_best.push_back(std::move(best));
  }
  report.ois_f = best_total.f();

  std::vector<std::pair<double, double>> points;  // (recall, precision)
  for (const auto& rec : report.per_threshold) {
    if (rec.counts.total_pred > 0) points.emplace_back(rec.recall, rec.precision);
  }
  if (!points.empty()) {
    std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : a.second > b.second;
    });
    double area = 0.0;
    double prev_r = 0.0, prev_p = points.front().second;
    for (const auto& [r, p] : points) {
      area += (r - prev_r) * (p + prev_p) / 2.0;
      prev_r = r;
      prev_p = p;
    }
    report.ap = std::clamp(area, 0.0, 1.0);
  }
  return report;
}

}  // namespace smoe
