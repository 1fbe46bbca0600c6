#include "smoe/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "smoe/errors.hpp"
#include "smoe/image.hpp"

namespace smoe {

using nlohmann::json;

namespace {

json counts_json(const SweepCounts& c) {
  return {{"matched_gt", c.matched_gt}, {"total_gt", c.total_gt}, {"matched_pred", c.matched_pred},
          {"total_pred", c.total_pred}, {"tp", c.tp()},           {"fp", c.fp()},
          {"fn", c.fn()}};
}

SweepCounts counts_from_json(const json& j) {
  SweepCounts c;
  c.matched_gt = j.at("matched_gt").get<std::size_t>();
  c.total_gt = j.at("total_gt").get<std::size_t>();
  c.matched_pred = j.at("matched_pred").get<std::size_t>();
  c.total_pred = j.at("total_pred").get<std::size_t>();
  return c;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json j;
  j["method"] = r.method;
  j["thresholds"] = r.thresholds;
  j["ods"] = {{"f", r.ods_f}, {"threshold", r.ods_threshold}, {"threshold_index", r.ods_index}};
  j["ois"] = {{"f", r.ois_f}};
  j["ap"] = r.ap;
  json rows = json::array();
  for (const auto& t : r.per_threshold) {
    json row = counts_json(t.counts);
    row["threshold"] = t.threshold;
    row["precision"] = t.precision;
    row["recall"] = t.recall;
    row["f"] = t.f;
    rows.push_back(std::move(row));
  }
  j["per_threshold"] = std::move(rows);
  json best = json::array();
  for (const auto& b : r.per_image_best) {
    best.push_back({{"id", b.id},
                    {"threshold_index", b.threshold_index},
                    {"threshold", b.threshold},
                    {"precision", b.precision},
                    {"recall", b.recall},
                    {"f", b.f},
                    {"counts", counts_json(b.counts)}});
  }
  j["per_image_best"] = std::move(best);
  json images = json::array();
  for (const auto& img : r.per_image) {
    json counts = json::array();
    for (const auto& c : img.counts) counts.push_back(counts_json(c));
    images.push_back({{"id", img.id}, {"counts", std::move(counts)}});
  }
  j["per_image"] = std::move(images);
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    std::vector<ImageSweep> sweeps;
    for (const auto& img : j.at("per_image")) {
      ImageSweep s;
      s.id = img.at("id").get<std::string>();
      for (const auto& c : img.at("counts")) s.counts.push_back(counts_from_json(c));
      sweeps.push_back(std::move(s));
    }
    return summarize(sweeps, j.at("thresholds").get<std::vector<double>>(), j.at("method").get<std::string>());
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed evaluation report: ") + e.what());
  }
}

void write_report_json(const std::filesystem::path& path, const EvalReport& report) {
  write_text(path, report_to_json(report));
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::string text = "threshold,precision,recall,f\n";
  char line[128];
  for (const auto& t : report.per_threshold) {
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f,%.6f\n", t.threshold, t.precision, t.recall, t.f);
    text += line;
  }
  write_text(path, text);
}

// ---------------------------------------------------------------------------
// PR plot
// ---------------------------------------------------------------------------

namespace {

using Rgb = std::array<std::uint8_t, 3>;

constexpr std::array<Rgb, 6> kPalette{{{{220, 40, 40}}, {{30, 90, 200}}, {{20, 150, 60}},
                                       {{230, 140, 0}}, {{140, 50, 170}}, {{0, 150, 160}}}};

struct Canvas {
  std::size_t size;
  std::vector<std::uint8_t> px;

  explicit Canvas(std::size_t s) : size(s), px(s * s * 3, 255) {}

  void dot(long x, long y, Rgb c) {
    if (x < 0 || y < 0 || x >= static_cast<long>(size) || y >= static_cast<long>(size)) return;
    auto* p = &px[(static_cast<std::size_t>(y) * size + static_cast<std::size_t>(x)) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  void disc(double cx, double cy, double radius, Rgb c) {
    const auto r = static_cast<long>(std::ceil(radius));
    for (long dy = -r; dy <= r; ++dy)
      for (long dx = -r; dx <= r; ++dx)
        if (dx * dx + dy * dy <= radius * radius) dot(std::lround(cx) + dx, std::lround(cy) + dy, c);
  }

  void line(double x0, double y0, double x1, double y1, Rgb c, double thickness) {
    const double len = std::hypot(x1 - x0, y1 - y0);
    const auto steps = std::max<long>(1, static_cast<long>(std::ceil(len * 2.0)));
    for (long s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / static_cast<double>(steps);
      disc(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, thickness / 2.0, c);
    }
  }
};

}  // namespace

void write_pr_plot(const std::filesystem::path& path, const std::vector<const EvalReport*>& reports,
                   std::size_t size_px) {
  if (size_px < 64) throw Error("PR plot must be at least 64 pixels wide");
  Canvas canvas(size_px);
  const double margin = static_cast<double>(size_px) * 0.08;
  const double span = static_cast<double>(size_px) - 2.0 * margin;
  auto to_x = [&](double recall) { return margin + recall * span; };
  auto to_y = [&](double precision) { return margin + (1.0 - precision) * span; };

  const Rgb grid{225, 225, 225}, iso{200, 230, 200}, axis{0, 0, 0};
  for (int k = 1; k < 10; ++k) {
    const double v = k / 10.0;
    canvas.line(to_x(v), to_y(0), to_x(v), to_y(1), grid, 1.0);
    canvas.line(to_x(0), to_y(v), to_x(1), to_y(v), grid, 1.0);
  }
  // Iso-F contours: P = F R / (2R - F) for R in (F/2, 1].
  for (int k = 1; k < 10; ++k) {
    const double f = k / 10.0;
    double prev_r = -1.0, prev_p = 0.0;
    for (int s = 0; s <= 400; ++s) {
      const double r = f / 2.0 + (1.0 - f / 2.0) * s / 400.0 + 1e-9;
      const double p = f * r / (2.0 * r - f);
      if (p > 1.0) continue;
      if (prev_r >= 0.0) canvas.line(to_x(prev_r), to_y(prev_p), to_x(r), to_y(p), iso, 1.0);
      prev_r = r;
      prev_p = p;
    }
  }
  canvas.line(to_x(0), to_y(0), to_x(1), to_y(0), axis, 2.0);
  canvas.line(to_x(0), to_y(0), to_x(0), to_y(1), axis, 2.0);
  canvas.line(to_x(1), to_y(0), to_x(1), to_y(1), axis, 1.0);
  canvas.line(to_x(0), to_y(1), to_x(1), to_y(1), axis, 1.0);

  for (std::size_t i = 0; i < reports.size(); ++i) {
    const Rgb colour = kPalette[i % kPalette.size()];
    const auto& rows = reports[i]->per_threshold;
    bool have_prev = false;
    double px = 0.0, py = 0.0;
    for (const auto& t : rows) {
      if (t.counts.total_pred == 0) continue;
      const double x = to_x(t.recall), y = to_y(t.precision);
      if (have_prev) canvas.line(px, py, x, y, colour, 2.0);
      px = x;
      py = y;
      have_prev = true;
    }
    if (!rows.empty()) {
      const auto& best = rows[reports[i]->ods_index];
      canvas.disc(to_x(best.recall), to_y(best.precision), 4.0, colour);
    }
  }
  write_png_u8(path, size_px, size_px, 3, canvas.px);
}

}  // namespace smoe
