#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mtht/eval.hpp"
#include "mtht/image_io.hpp"
#include "mtht/measures.hpp"
#include "mtht/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string input;
  std::string output;
  std::string output_dir;
  std::string dataset;
  std::string measure = "vesselness";
  std::string scales;
  int orientations = 0;  // 0 keeps the per-dimensionality default
  double beta = 0.5;
  double alpha = 0.5;
  std::optional<double> c;
  std::string mask;
  std::string truth;
  int thresholds = 101;
  std::uint64_t seed = 0;
  std::string json_config;
  std::string svg;
  // synth
  std::string dims;
  int branches = 1;
  std::string radius_range = "1,3";
  double intensity = 200.0;
  double noise = 0.0;
  double smooth = 0.0;
  std::string truth_output;
  // reproduce-3d
  int size = 100;
};

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("cannot parse " + what + " entry: '" + item + "'");
    }
    if (used != item.size())
      throw std::invalid_argument("cannot parse " + what + " entry: '" + item + "'");
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

std::string join_list(const std::vector<double>& values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += mtht::detail::format_double(values[i]);
  }
  return out;
}

// JSON config entries win over command-line flags; list-valued keys accept
// either a JSON array or the comma-separated string form.
void apply_json_config(Options& o) {
  if (o.json_config.empty()) return;
  std::ifstream in(o.json_config);
  if (!in) throw std::runtime_error("cannot open config: " + o.json_config);
  json j;
  in >> j;
  if (!j.is_object()) throw std::runtime_error("config must be a JSON object: " + o.json_config);

  auto str = [&](const char* k, std::string& dst) {
    if (j.contains(k)) dst = j.at(k).get<std::string>();
  };
  auto list = [&](const char* k, std::string& dst) {
    if (!j.contains(k)) return;
    const auto& v = j.at(k);
    dst = v.is_array() ? join_list(v.get<std::vector<double>>()) : v.get<std::string>();
  };
  str("input", o.input);
  str("output", o.output);
  str("output-dir", o.output_dir);
  str("dataset", o.dataset);
  str("measure", o.measure);
  list("scales", o.scales);
  if (j.contains("orientations")) o.orientations = j.at("orientations").get<int>();
  if (j.contains("beta")) o.beta = j.at("beta").get<double>();
  if (j.contains("alpha")) o.alpha = j.at("alpha").get<double>();
  if (j.contains("c")) o.c = j.at("c").is_null() ? std::nullopt : std::optional<double>(j.at("c").get<double>());
  str("mask", o.mask);
  str("truth", o.truth);
  if (j.contains("thresholds")) o.thresholds = j.at("thresholds").get<int>();
  if (j.contains("seed")) o.seed = j.at("seed").get<std::uint64_t>();
  str("svg", o.svg);
  list("dims", o.dims);
  if (j.contains("branches")) o.branches = j.at("branches").get<int>();
  list("radius-range", o.radius_range);
  if (j.contains("intensity")) o.intensity = j.at("intensity").get<double>();
  if (j.contains("noise")) o.noise = j.at("noise").get<double>();
  if (j.contains("smooth")) o.smooth = j.at("smooth").get<double>();
  str("truth-output", o.truth_output);
  if (j.contains("size")) o.size = j.at("size").get<int>();
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw std::invalid_argument(std::string("missing required option ") + flag);
}

mtht::MeasureKind parse_measure(const std::string& name) {
  if (name == "vesselness") return mtht::MeasureKind::kVesselness;
  if (name == "neuriteness") return mtht::MeasureKind::kNeuriteness;
  throw std::invalid_argument("measure must be vesselness or neuriteness, got: " + name);
}

mtht::MeasureParams<double> make_params(const Options& o, int dim) {
  auto p = dim == 2 ? mtht::MeasureParams<double>::defaults_2d()
                    : mtht::MeasureParams<double>::defaults_3d();
  p.kind = parse_measure(o.measure);
  if (!o.scales.empty()) p.scales = mtht::ScaleSet(parse_list(o.scales, "scales"));
  if (o.orientations > 0) p.n_orientations = o.orientations;
  p.beta = o.beta;
  p.alpha = o.alpha;
  p.c = o.c;
  p.validate();
  return p;
}

json params_json(const mtht::MeasureParams<double>& p) {
  return json{{"measure", p.kind == mtht::MeasureKind::kVesselness ? "vesselness" : "neuriteness"},
              {"scales", p.scales.values()},
              {"orientations", p.n_orientations},
              {"beta", p.beta},
              {"alpha", p.alpha},
              {"c", p.c ? json(*p.c) : json(nullptr)}};
}

// every artifact gets a <stem>.params.json echo of the effective settings
void write_sidecar(const fs::path& artifact, const json& j) {
  fs::path side = artifact;
  side.replace_extension(".params.json");
  std::ofstream out(side, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write sidecar: " + side.string());
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("sidecar write failed: " + side.string());
}

bool is_volume_path(const fs::path& path) {
  std::string ext = path.extension().string();
  for (char& ch : ext) ch = char(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".tif" || ext == ".tiff" || ext == ".raw";
}

fs::path derived_truth_path(const fs::path& output) {
  return output.parent_path() / (output.stem().string() + "_truth" + output.extension().string());
}

template <int Dim>
mtht::RocResult run_roc(const mtht::DenseImage<double, Dim>& response,
                        const mtht::DenseImage<bool, Dim>& truth,
                        const mtht::DenseImage<bool, Dim>* mask, int thresholds) {
  return mtht::roc(response, truth, mask, thresholds);
}

int cmd_enhance2d(const Options& o) {
  require(o.input, "--input");
  require(o.output, "--output");
  const mtht::Image2d img = mtht::load_image_2d(o.input);
  const auto params = make_params(o, 2);
  const auto result = mtht::enhance(img, params);
  mtht::save_image_2d(o.output, result.response, 0.0, 1.0);

  json side{{"command", "enhance2d"}, {"input", o.input}, {"output", o.output}};
  side.update(params_json(params));
  side["c_resolved"] = result.resolved_c;

  if (!o.truth.empty()) {
    const mtht::Mask2 truth = mtht::load_mask_2d(o.truth);
    std::optional<mtht::Mask2> mask;
    if (!o.mask.empty()) mask = mtht::load_mask_2d(o.mask);
    const auto r = run_roc<2>(result.response, truth, mask ? &*mask : nullptr, o.thresholds);
    fs::path roc_path = o.output;
    roc_path.replace_extension(".roc.csv");
    mtht::write_roc_csv(roc_path, r);
    if (!o.svg.empty()) mtht::write_roc_svg(o.svg, r);
    side["truth"] = o.truth;
    if (!o.mask.empty()) side["mask"] = o.mask;
    side["thresholds"] = o.thresholds;
    side["auc"] = r.auc;
    std::cout << json{{"auc", r.auc}}.dump() << "\n";
  }
  write_sidecar(o.output, side);
  return 0;
}

int cmd_enhance3d(const Options& o) {
  require(o.input, "--input");
  require(o.output, "--output");
  const mtht::Image3d vol = mtht::load_volume(o.input);
  const auto params = make_params(o, 3);
  const auto result = mtht::enhance(vol, params);
  mtht::save_volume(o.output, result.response, 0.0, 1.0);

  json side{{"command", "enhance3d"}, {"input", o.input}, {"output", o.output}};
  side.update(params_json(params));
  side["c_resolved"] = result.resolved_c;

  if (!o.truth.empty()) {
    const mtht::Mask3 truth = mtht::load_mask_3d(o.truth);
    std::optional<mtht::Mask3> mask;
    if (!o.mask.empty()) mask = mtht::load_mask_3d(o.mask);
    const auto r = run_roc<3>(result.response, truth, mask ? &*mask : nullptr, o.thresholds);
    fs::path roc_path = o.output;
    roc_path.replace_extension(".roc.csv");
    mtht::write_roc_csv(roc_path, r);
    if (!o.svg.empty()) mtht::write_roc_svg(o.svg, r);
    side["truth"] = o.truth;
    if (!o.mask.empty()) side["mask"] = o.mask;
    side["thresholds"] = o.thresholds;
    side["auc"] = r.auc;
    std::cout << json{{"auc", r.auc}}.dump() << "\n";
  }
  write_sidecar(o.output, side);
  return 0;
}

int cmd_synth(const Options& o) {
  require(o.output, "--output");
  require(o.dims, "--dims");
  const auto dims = parse_list(o.dims, "dims");
  const auto range = parse_list(o.radius_range, "radius-range");
  if (range.size() != 2) throw std::invalid_argument("--radius-range needs two values min,max");
  const fs::path truth_path =
      o.truth_output.empty() ? derived_truth_path(o.output) : fs::path(o.truth_output);

  json side{{"command", "synth"},
            {"output", o.output},
            {"truth_output", truth_path.string()}};

  if (dims.size() == 2) {
    mtht::PhantomSpec<2> spec;
    spec.dims = {Eigen::Index(dims[0]), Eigen::Index(dims[1])};
    spec.n_branches = o.branches;
    spec.radius_min = range[0];
    spec.radius_max = range[1];
    spec.intensity = o.intensity;
    spec.noise_variance = o.noise;
    spec.smooth_std = o.smooth;
    spec.seed = o.seed;
    const auto phantom = mtht::generate_2d(spec);
    mtht::save_image_2d(o.output, phantom.image, 0.0, 255.0);
    mtht::save_mask_2d(truth_path, phantom.truth);
    side["spec"] = json(spec);
  } else if (dims.size() == 3) {
    mtht::PhantomSpec<3> spec;
    spec.dims = {Eigen::Index(dims[0]), Eigen::Index(dims[1]), Eigen::Index(dims[2])};
    spec.n_branches = o.branches;
    spec.radius_min = range[0];
    spec.radius_max = range[1];
    spec.intensity = o.intensity;
    spec.noise_variance = o.noise;
    spec.smooth_std = o.smooth;
    spec.seed = o.seed;
    const auto phantom = mtht::generate_3d_tree(spec);
    mtht::save_volume(o.output, phantom.image, 0.0, 255.0);
    mtht::save_mask_3d(truth_path, phantom.truth);
    side["spec"] = json(spec);
  } else {
    throw std::invalid_argument("--dims needs two or three comma-separated extents");
  }
  write_sidecar(o.output, side);
  return 0;
}

// Evaluates one response (or a whole dataset directory) against ground truth.
// Loaded responses are min-max normalized to [0,1] first, which leaves the
// AUC rank statistic intact regardless of the stored range.
int cmd_eval(const Options& o) {
  if (!o.dataset.empty()) {
    require(o.output_dir, "--output-dir");
    fs::create_directories(o.output_dir);
    const auto entries = mtht::discover_dataset(o.dataset);
    std::vector<mtht::RocResult> rocs;
    std::string csv = "stem,auc\n";
    json side{{"command", "eval"}, {"dataset", o.dataset}, {"output_dir", o.output_dir},
              {"thresholds", o.thresholds}};
    json per_params = json::array();

    for (const auto& entry : entries) {
      mtht::RocResult r;
      if (is_volume_path(entry.image)) {
        const auto img = mtht::load_volume(entry.image);
        const auto params = make_params(o, 3);
        const auto result = mtht::enhance(img, params);
        const auto truth = mtht::load_mask_3d(entry.truth);
        std::optional<mtht::Mask3> mask;
        if (entry.mask) mask = mtht::load_mask_3d(*entry.mask);
        r = run_roc<3>(result.response, truth, mask ? &*mask : nullptr, o.thresholds);
        mtht::save_volume(fs::path(o.output_dir) / (entry.stem + "_response.tif"),
                          result.response, 0.0, 1.0);
        if (per_params.empty()) per_params.push_back(params_json(params));
      } else {
        const auto img = mtht::load_image_2d(entry.image);
        const auto params = make_params(o, 2);
        const auto result = mtht::enhance(img, params);
        const auto truth = mtht::load_mask_2d(entry.truth);
        std::optional<mtht::Mask2> mask;
        if (entry.mask) mask = mtht::load_mask_2d(*entry.mask);
        r = run_roc<2>(result.response, truth, mask ? &*mask : nullptr, o.thresholds);
        mtht::save_image_2d(fs::path(o.output_dir) / (entry.stem + "_response.png"),
                            result.response, 0.0, 1.0);
        if (per_params.empty()) per_params.push_back(params_json(params));
      }
      mtht::write_roc_csv(fs::path(o.output_dir) / (entry.stem + ".roc.csv"), r);
      csv += entry.stem + "," + mtht::detail::format_double(r.auc) + "\n";
      rocs.push_back(std::move(r));
    }

    mtht::detail::write_text_file(fs::path(o.output_dir) / "auc_per_image.csv", csv);
    mtht::write_roc_csv(fs::path(o.output_dir) / "mean_roc.csv", mtht::mean_roc(rocs));
    mtht::write_summary_json(fs::path(o.output_dir) / "summary.json", rocs);
    side["params"] = per_params;
    write_sidecar(fs::path(o.output_dir) / "eval.json", side);
    std::cout << mtht::summary_json(rocs).dump() << "\n";
    return 0;
  }

  require(o.input, "--input");
  require(o.truth, "--truth");
  require(o.output, "--output");
  mtht::RocResult r;
  if (is_volume_path(o.input)) {
    const auto response = mtht::normalize(mtht::load_volume(o.input));
    const auto truth = mtht::load_mask_3d(o.truth);
    std::optional<mtht::Mask3> mask;
    if (!o.mask.empty()) mask = mtht::load_mask_3d(o.mask);
    r = run_roc<3>(response, truth, mask ? &*mask : nullptr, o.thresholds);
  } else {
    const auto response = mtht::normalize(mtht::load_image_2d(o.input));
    const auto truth = mtht::load_mask_2d(o.truth);
    std::optional<mtht::Mask2> mask;
    if (!o.mask.empty()) mask = mtht::load_mask_2d(o.mask);
    r = run_roc<2>(response, truth, mask ? &*mask : nullptr, o.thresholds);
  }
  mtht::write_roc_csv(o.output, r);
  if (!o.svg.empty()) mtht::write_roc_svg(o.svg, r);
  json side{{"command", "eval"},     {"input", o.input},           {"truth", o.truth},
            {"output", o.output},    {"thresholds", o.thresholds}, {"auc", r.auc}};
  if (!o.mask.empty()) side["mask"] = o.mask;
  write_sidecar(o.output, side);
  std::cout << json{{"auc", r.auc}}.dump() << "\n";
  return 0;
}

// Self-contained rerun of the 3D synthetic experiment: nine tube trees of
// increasing complexity, degraded with noise variance 10 then smoothing
// std 1, enhanced with both measures.
int cmd_reproduce_3d(const Options& o) {
  require(o.output_dir, "--output-dir");
  fs::create_directories(o.output_dir);

  Options ves = o;
  ves.measure = "vesselness";
  Options neu = o;
  neu.measure = "neuriteness";
  const auto params_v = make_params(ves, 3);
  const auto params_n = make_params(neu, 3);

  std::vector<mtht::RocResult> rocs_v, rocs_n;
  std::string csv = "index,n_branches,auc_vesselness,auc_neuriteness\n";
  json specs = json::array();

  for (int i = 1; i <= 9; ++i) {
    mtht::PhantomSpec<3> spec;
    spec.dims = {o.size, o.size, o.size};
    spec.n_branches = i;
    spec.radius_min = 1.0;
    spec.radius_max = 3.0;
    spec.intensity = 200.0;
    spec.noise_variance = 10.0;
    spec.smooth_std = 1.0;
    spec.seed = mtht::mix_seed(o.seed, std::uint64_t(i));
    const auto phantom = mtht::generate_3d_tree(spec);

    const auto rv = run_roc<3>(mtht::enhance(phantom.image, params_v).response, phantom.truth,
                               nullptr, o.thresholds);
    const auto rn = run_roc<3>(mtht::enhance(phantom.image, params_n).response, phantom.truth,
                               nullptr, o.thresholds);
    csv += std::to_string(i) + "," + std::to_string(i) + "," +
           mtht::detail::format_double(rv.auc) + "," + mtht::detail::format_double(rn.auc) + "\n";
    specs.push_back(json(spec));
    rocs_v.push_back(rv);
    rocs_n.push_back(rn);
  }

  const fs::path dir = o.output_dir;
  mtht::detail::write_text_file(dir / "auc_per_image.csv", csv);
  mtht::write_roc_csv(dir / "mean_roc_vesselness.csv", mtht::mean_roc(rocs_v));
  mtht::write_roc_csv(dir / "mean_roc_neuriteness.csv", mtht::mean_roc(rocs_n));
  mtht::write_roc_svg(dir / "mean_roc_vesselness.svg", mtht::mean_roc(rocs_v),
                      "Mean ROC, vesselness");
  mtht::write_roc_svg(dir / "mean_roc_neuriteness.svg", mtht::mean_roc(rocs_n),
                      "Mean ROC, neuriteness");

  const json summary{{"vesselness", mtht::summary_json(rocs_v)},
                     {"neuriteness", mtht::summary_json(rocs_n)}};
  mtht::detail::write_text_file(dir / "summary.json", summary.dump(2) + "\n");

  json side{{"command", "reproduce-3d"},
            {"output_dir", o.output_dir},
            {"size", o.size},
            {"seed", o.seed},
            {"thresholds", o.thresholds},
            {"vesselness", params_json(params_v)},
            {"neuriteness", params_json(params_n)},
            {"volumes", specs}};
  write_sidecar(dir / "reproduce.json", side);
  std::cout << summary.dump() << "\n";
  return 0;
}

void add_measure_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--measure", o.measure, "vesselness or neuriteness")
      ->check(CLI::IsMember({"vesselness", "neuriteness"}));
  cmd->add_option("--scales", o.scales,
                  "comma-separated SE lengths in pixels (default 3,5,7,9 in 2D; 3,5,7 in 3D)");
  cmd->add_option("--orientations", o.orientations,
                  "number of line orientations (default 12 in 2D; 40 in 3D)");
  cmd->add_option("--beta", o.beta, "blob/line ratio weight (default 0.5)");
  cmd->add_option("--c", o.c,
                  "structureness weight; omit to use half of the per-scale maximum");
  cmd->add_option("--alpha", o.alpha, "plate/line ratio weight, 3D vesselness (default 0.5)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale top-hat tensor enhancement of curvilinear structures"};
  app.require_subcommand(1);
  Options o;

  CLI::App* e2 = app.add_subcommand("enhance2d", "Enhance a 2D image (PNG/PGM)");
  e2->add_option("--input", o.input, "input image");
  e2->add_option("--output", o.output, "output response image");
  add_measure_flags(e2, o);
  e2->add_option("--truth", o.truth, "optional ground truth; adds ROC CSV and AUC");
  e2->add_option("--mask", o.mask, "optional field-of-view mask");
  e2->add_option("--thresholds", o.thresholds, "ROC threshold count (default 101)");
  e2->add_option("--svg", o.svg, "optional ROC plot path");
  e2->add_option("--json-config", o.json_config, "JSON file whose entries override flags");

  CLI::App* e3 = app.add_subcommand("enhance3d", "Enhance a 3D volume (TIFF/raw)");
  e3->add_option("--input", o.input, "input volume");
  e3->add_option("--output", o.output, "output response volume");
  add_measure_flags(e3, o);
  e3->add_option("--truth", o.truth, "optional ground truth; adds ROC CSV and AUC");
  e3->add_option("--mask", o.mask, "optional mask volume");
  e3->add_option("--thresholds", o.thresholds, "ROC threshold count (default 101)");
  e3->add_option("--svg", o.svg, "optional ROC plot path");
  e3->add_option("--json-config", o.json_config, "JSON file whose entries override flags");

  CLI::App* sy = app.add_subcommand("synth", "Generate a synthetic phantom with ground truth");
  sy->add_option("--output", o.output, "phantom image/volume path");
  sy->add_option("--truth-output", o.truth_output,
                 "truth path (default: <output stem>_truth.<ext>)");
  sy->add_option("--dims", o.dims, "grid extents, e.g. 256,256 or 64,64,64");
  sy->add_option("--branches", o.branches, "structure count / tree complexity (default 1)");
  sy->add_option("--radius-range", o.radius_range, "min,max stroke/tube radius (default 1,3)");
  sy->add_option("--intensity", o.intensity, "foreground intensity on [0,255] (default 200)");
  sy->add_option("--noise", o.noise, "Gaussian noise variance on [0,255] scale (default 0)");
  sy->add_option("--smooth", o.smooth, "Gaussian smoothing std in pixels (default 0)");
  sy->add_option("--seed", o.seed, "RNG seed (default 0)");
  sy->add_option("--json-config", o.json_config, "JSON file whose entries override flags");

  CLI::App* ev = app.add_subcommand(
      "eval", "ROC/AUC of a response against truth, or of a whole dataset directory");
  ev->add_option("--input", o.input, "response image/volume");
  ev->add_option("--truth", o.truth, "ground truth");
  ev->add_option("--mask", o.mask, "optional field-of-view mask");
  ev->add_option("--output", o.output, "ROC CSV path");
  ev->add_option("--svg", o.svg, "optional ROC plot path");
  ev->add_option("--thresholds", o.thresholds, "ROC threshold count (default 101)");
  ev->add_option("--dataset", o.dataset,
                 "directory with images/, truth/, optional masks/; enhances then evaluates");
  ev->add_option("--output-dir", o.output_dir, "artifact directory for dataset mode");
  add_measure_flags(ev, o);
  ev->add_option("--json-config", o.json_config, "JSON file whose entries override flags");

  CLI::App* rp = app.add_subcommand("reproduce-3d", "Rerun the 3D synthetic experiment");
  rp->add_option("--output-dir", o.output_dir, "artifact directory");
  rp->add_option("--size", o.size, "cubic volume edge length (default 100)");
  rp->add_option("--seed", o.seed, "base seed for the nine volumes (default 0)");
  rp->add_option("--thresholds", o.thresholds, "ROC threshold count (default 101)");
  add_measure_flags(rp, o);
  rp->add_option("--json-config", o.json_config, "JSON file whose entries override flags");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    apply_json_config(o);
    if (e2->parsed()) return cmd_enhance2d(o);
    if (e3->parsed()) return cmd_enhance3d(o);
    if (sy->parsed()) return cmd_synth(o);
    if (ev->parsed()) return cmd_eval(o);
    if (rp->parsed()) return cmd_reproduce_3d(o);
    throw std::logic_error("no subcommand dispatched");
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
}
