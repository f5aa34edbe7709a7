#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtht/image.hpp"

namespace mtht {

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Operating points in threshold-descending order (fpr and tpr non-decreasing)
/// plus the trapezoidal area under the stored curve.
struct RocResult {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

inline double trapezoid_auc(const std::vector<RocPoint>& points) {
  double auc = 0.0;
  for (size_t i = 1; i < points.size(); ++i)
    auc += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  return auc;
}

/// Threshold-sweep ROC of a [0,1] response against a binary truth. Thresholds
/// are (n-1-k)/(n-1) for k = 0..n-1; a pixel is predicted positive iff
/// response >= threshold. A (0,0) anchor one grid step above 1 is always
/// stored first so every curve over the same grid has the same shape.
template <typename Scalar, int Dim>
RocResult roc(const DenseImage<Scalar, Dim>& response, const DenseImage<bool, Dim>& truth,
              const DenseImage<bool, Dim>* mask = nullptr, int n_thresholds = 101) {
  if (n_thresholds < 2) throw std::invalid_argument("roc: n_thresholds must be >= 2");
  if (!response.same_dims(truth)) throw std::invalid_argument("roc: truth dims mismatch");
  if (mask && !response.same_dims(*mask)) throw std::invalid_argument("roc: mask dims mismatch");

  const int n = n_thresholds;
  const double denom = double(n - 1);
  auto grid = [&](int k) { return double(n - 1 - k) / denom; };
  // first threshold index at which r is predicted positive; the ceil gives a
  // candidate and the exact comparisons settle rounding
  auto first_index = [&](double r) {
    int k = std::clamp(int(std::ceil((1.0 - r) * denom)), 0, n - 1);
    while (k > 0 && r >= grid(k - 1)) --k;
    while (k < n - 1 && r < grid(k)) ++k;
    return k;
  };

  std::vector<std::int64_t> pos_bucket(size_t(n), 0), neg_bucket(size_t(n), 0);
  std::int64_t pos_total = 0, neg_total = 0;
  for (Eigen::Index i = 0; i < response.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    const double r = double(response[i]);
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("roc: response outside [0,1]");
    const size_t k = size_t(first_index(r));
    if (truth[i]) {
      ++pos_bucket[k];
      ++pos_total;
    } else {
      ++neg_bucket[k];
      ++neg_total;
    }
  }
  if (pos_total == 0 || neg_total == 0)
    throw std::invalid_argument("roc: truth needs a positive and a negative inside the mask");

  RocResult out;
  out.points.reserve(size_t(n) + 1);
  out.points.push_back({1.0 + 1.0 / denom, 0.0, 0.0});
  std::int64_t tp = 0, fp = 0;
  for (int k = 0; k < n; ++k) {
    tp += pos_bucket[size_t(k)];
    fp += neg_bucket[size_t(k)];
    out.points.push_back({grid(k), double(fp) / double(neg_total), double(tp) / double(pos_total)});
  }
  out.auc = trapezoid_auc(out.points);
  return out;
}

/// Pointwise mean of curves sharing one threshold grid; the area is
/// re-integrated from the averaged points.
inline RocResult mean_roc(const std::vector<RocResult>& results) {
  if (results.empty()) throw std::invalid_argument("mean_roc: empty list");
  const auto& first = results.front();
  for (const auto& r : results) {
    if (r.points.size() != first.points.size())
      throw std::invalid_argument("mean_roc: mismatched threshold grids");
    for (size_t i = 0; i < r.points.size(); ++i)
      if (r.points[i].threshold != first.points[i].threshold)
        throw std::invalid_argument("mean_roc: mismatched threshold grids");
  }
  RocResult out;
  out.points.resize(first.points.size());
  for (size_t i = 0; i < out.points.size(); ++i) {
    double fpr = 0.0, tpr = 0.0;
    for (const auto& r : results) {
      fpr += r.points[i].fpr;
      tpr += r.points[i].tpr;
    }
    out.points[i] = {first.points[i].threshold, fpr / double(results.size()),
                     tpr / double(results.size())};
  }
  out.auc = trapezoid_auc(out.points);
  return out;
}

struct AucSummary {
  double mean = 0.0;
  double std_dev = 0.0;
};

/// Mean and population standard deviation of the per-result areas.
inline AucSummary auc_summary(const std::vector<RocResult>& results) {
  if (results.empty()) throw std::invalid_argument("auc_summary: empty list");
  double mean = 0.0;
  for (const auto& r : results) mean += r.auc;
  mean /= double(results.size());
  double var = 0.0;
  for (const auto& r : results) var += (r.auc - mean) * (r.auc - mean);
  var /= double(results.size());
  return {mean, std::sqrt(var)};
}

namespace detail {

// shortest round-trip decimal form; locale-independent
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(text.data(), std::streamsize(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace detail

inline std::string roc_csv(const RocResult& result) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : result.points) {
    out += detail::format_double(p.threshold);
    out += ',';
    out += detail::format_double(p.fpr);
    out += ',';
    out += detail::format_double(p.tpr);
    out += '\n';
  }
  return out;
}

inline void write_roc_csv(const std::filesystem::path& path, const RocResult& result) {
  detail::write_text_file(path, roc_csv(result));
}

inline nlohmann::json summary_json(const std::vector<RocResult>& results) {
  const AucSummary s = auc_summary(results);
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : results) per.push_back(r.auc);
  return nlohmann::json{{"auc_mean", s.mean}, {"auc_std", s.std_dev}, {"per_image", per}};
}

inline void write_summary_json(const std::filesystem::path& path,
                               const std::vector<RocResult>& results) {
  detail::write_text_file(path, summary_json(results).dump(2) + "\n");
}

/// Static SVG line plot of the curve with a unit box and chance diagonal.
inline std::string roc_svg(const RocResult& result, const std::string& title = "ROC") {
  const double size = 512.0, pad = 48.0, span = size - 2.0 * pad;
  auto fmt = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
    return std::string(buf, res.ptr);
  };
  auto sx = [&](double fpr) { return fmt(pad + fpr * span); };
  auto sy = [&](double tpr) { return fmt(size - pad - tpr * span); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"512\" height=\"512\" "
         "viewBox=\"0 0 512 512\">\n";
  svg += "<rect x=\"" + sx(0.0) + "\" y=\"" + sy(1.0) + "\" width=\"" + fmt(span) +
         "\" height=\"" + fmt(span) + "\" fill=\"none\" stroke=\"#888\"/>\n";
  svg += "<line x1=\"" + sx(0.0) + "\" y1=\"" + sy(0.0) + "\" x2=\"" + sx(1.0) + "\" y2=\"" +
         sy(1.0) + "\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n";
  svg += "<polyline fill=\"none\" stroke=\"#1b6ca8\" stroke-width=\"2\" points=\"";
  for (const auto& p : result.points) {
    svg += sx(std::clamp(p.fpr, 0.0, 1.0)) + "," + sy(std::clamp(p.tpr, 0.0, 1.0)) + " ";
  }
  if (!result.points.empty()) svg.pop_back();
  svg += "\"/>\n";
  svg += "<text x=\"" + fmt(size / 2.0) + "\" y=\"" + fmt(pad / 2.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" + title +
         " (AUC " + fmt(result.auc) + ")</text>\n";
  svg += "<text x=\"" + fmt(size / 2.0) + "\" y=\"" + fmt(size - pad / 4.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">FPR</text>\n";
  svg += "<text x=\"" + fmt(pad / 4.0) + "\" y=\"" + fmt(size / 2.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 " +
         fmt(pad / 4.0) + " " + fmt(size / 2.0) + ")\">TPR</text>\n";
  svg += "</svg>\n";
  return svg;
}

inline void write_roc_svg(const std::filesystem::path& path, const RocResult& result,
                          const std::string& title = "ROC") {
  detail::write_text_file(path, roc_svg(result, title));
}

struct DatasetEntry {
  std::string stem;
  std::filesystem::path image;
  std::filesystem::path truth;
  std::optional<std::filesystem::path> mask;
};

/// Scans a directory laid out as images/, truth/, optional masks/ and pairs
/// files by filename stem. JSON files are treated as sidecars, not data.
inline std::vector<DatasetEntry> discover_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  auto index_dir = [](const fs::path& dir) {
    std::map<std::string, fs::path> out;
    if (!fs::is_directory(dir)) return out;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() != ".json")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.emplace(f.stem().string(), f);
    return out;
  };

  const fs::path images_dir = root / "images";
  if (!fs::is_directory(images_dir))
    throw std::runtime_error("dataset has no images/ directory: " + root.string());
  const auto images = index_dir(images_dir);
  if (images.empty()) throw std::runtime_error("dataset images/ is empty: " + root.string());
  const auto truths = index_dir(root / "truth");
  const auto masks = index_dir(root / "masks");

  std::vector<DatasetEntry> out;
  out.reserve(images.size());
  for (const auto& [stem, path] : images) {
    const auto t = truths.find(stem);
    if (t == truths.end()) throw std::runtime_error("dataset has no truth for stem: " + stem);
    DatasetEntry entry{stem, path, t->second, std::nullopt};
    if (const auto m = masks.find(stem); m != masks.end()) entry.mask = m->second;
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace mtht
