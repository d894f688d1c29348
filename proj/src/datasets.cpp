#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mvde/data.hpp"
#include "mvde/imgproc.hpp"

namespace mvde {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.txt";
constexpr const char* kSlatsGt = "gt_disp_2x.pfm";
constexpr const char* kLightFieldConfig = "parameters.cfg";
constexpr const char* kLightFieldGt = "gt_disp_lowres.pfm";

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// key = value lines; [sections], blank lines and '#'/';' comments ignored.
std::map<std::string, std::string> read_cfg(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError(path.string(), "cannot open file");
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';' || t[0] == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw IngestionError(path.string(), "line " + std::to_string(line_no) +
                                              ": expected key = value");
    }
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

double cfg_number(const std::map<std::string, std::string>& cfg,
                  const std::string& key, const fs::path& path) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) throw IngestionError(path.string(), "missing key " + key);
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size() || !std::isfinite(v)) throw std::invalid_argument(key);
    return v;
  } catch (const std::logic_error&) {
    throw IngestionError(path.string(), "bad value for " + key + ": " + it->second);
  }
}

int cfg_int(const std::map<std::string, std::string>& cfg,
            const std::string& key, const fs::path& path) {
  const double v = cfg_number(cfg, key, path);
  if (v != std::floor(v) || v < 1) {
    throw IngestionError(path.string(), key + " must be a positive integer");
  }
  return static_cast<int>(v);
}

fs::path view_file(const fs::path& dir, std::size_t i) {
  char name[48];
  std::snprintf(name, sizeof name, "input_Cam%03zu.png", i);
  return dir / name;
}

/// Mean |ref - warped(other)| over valid pixels when `other` is aligned to
/// the reference with displacement -(dx, dy) * gt.
double alignment_error(const Field& ref, const Field& other, const Field& gt,
                       double dx, double dy) {
  DisplacementField d{Field(gt.width(), gt.height()), Field(gt.width(), gt.height())};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    d.dx[i] = -dx * gt[i];
    d.dy[i] = -dy * gt[i];
  }
  const WarpResult warped = bilinear_warp(other, d);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (!warped.valid[i]) continue;
    sum += std::abs(ref[i] - warped.image[i]);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

int probe_sign(const Field& ref, const Field& other, const Field& gt, bool x_axis) {
  const double plus = alignment_error(ref, other, gt, x_axis ? 1.0 : 0.0, x_axis ? 0.0 : 1.0);
  const double minus = alignment_error(ref, other, gt, x_axis ? -1.0 : 0.0, x_axis ? 0.0 : -1.0);
  return minus < plus ? -1 : 1;
}

std::string dataset_name(const fs::path& dir) {
  const fs::path p = dir.has_filename() ? dir : dir.parent_path();
  return p.filename().string();
}

Dataset load_slats_dataset(const fs::path& dir) {
  const fs::path manifest = dir / kManifest;
  std::ifstream in(manifest);
  if (!in) throw IngestionError(manifest.string(), "cannot open file");
  std::vector<View> views;
  std::optional<std::size_t> reference;
  std::optional<DisparityField> gt;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream fields(t);
    std::string key;
    fields >> key;
    const auto bad = [&](const std::string& what) {
      return IngestionError(manifest.string(),
                            "line " + std::to_string(line_no) + ": " + what);
    };
    if (key == "view") {
      std::string file;
      BaselineVec b;
      if (!(fields >> file >> b.bx >> b.by)) throw bad("expected: view FILE BX BY");
      views.push_back({ImageGrid(read_pfm(dir / file)), b});
    } else if (key == "reference") {
      std::size_t r = 0;
      if (!(fields >> r)) throw bad("expected: reference INDEX");
      reference = r;
    } else if (key == "gt") {
      std::string file;
      if (!(fields >> file)) throw bad("expected: gt FILE");
      gt = DisparityField(read_pfm(dir / file), Resolution::doubled);
    } else if (key != "kind" && key != "size") {
      throw bad("unknown key " + key);
    }
  }
  if (!reference) throw IngestionError(manifest.string(), "no reference entry");
  Dataset ds{dataset_name(dir), ViewSet(std::move(views), *reference),
             std::move(gt), GroundTruthGrid::doubled, std::nullopt, false};
  if (ds.gt && (ds.gt->width() != 2 * ds.views.width() ||
                ds.gt->height() != 2 * ds.views.height())) {
    throw IngestionError(manifest.string(), "ground truth is not at twice the view size");
  }
  return ds;
}

}  // namespace

void write_slats_dataset(const SlatsScene& scene, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / kManifest);
  if (!out) throw IngestionError((dir / kManifest).string(), "cannot write file");
  out << "kind slats\n";
  out << "size " << scene.views.width() << ' ' << scene.views.height() << '\n';
  out << "reference " << scene.views.reference_index() << '\n';
  out << "gt " << kSlatsGt << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "view_%03zu.pfm", i);
    write_pfm(scene.views[i].image.field(), dir / name);
    out << "view " << name << ' ' << scene.views[i].baseline.bx << ' '
        << scene.views[i].baseline.by << '\n';
  }
  write_pfm(scene.gt.field(), dir / kSlatsGt);
  if (!out) throw IngestionError((dir / kManifest).string(), "write failed");
}

ViewSet LightFieldSet::view_set() const {
  std::vector<View> views;
  views.reserve(images.size());
  const int cc = static_cast<int>(center) % grid_cols;
  const int cr = static_cast<int>(center) / grid_cols;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const int col = static_cast<int>(i) % grid_cols;
    const int row = static_cast<int>(i) / grid_cols;
    views.push_back({ImageGrid(images[i]),
                     {static_cast<double>(sign_x * (col - cc)),
                      static_cast<double>(sign_y * (row - cr))}});
  }
  return ViewSet(std::move(views), center);
}

LightFieldSet load_lightfield(const fs::path& dir) {
  const fs::path cfg_path = dir / kLightFieldConfig;
  const auto cfg = read_cfg(cfg_path);
  LightFieldSet lf;
  lf.grid_cols = cfg.count("num_cams_x") ? cfg_int(cfg, "num_cams_x", cfg_path) : 9;
  lf.grid_rows = cfg.count("num_cams_y") ? cfg_int(cfg, "num_cams_y", cfg_path) : 9;
  if (lf.grid_cols % 2 == 0 || lf.grid_rows % 2 == 0) {
    throw IngestionError(cfg_path.string(), "camera grid must have a centre view");
  }
  const int width = cfg_int(cfg, "image_resolution_x_px", cfg_path);
  const int height = cfg_int(cfg, "image_resolution_y_px", cfg_path);
  lf.baseline_mm = cfg_number(cfg, "baseline_mm", cfg_path);
  lf.focal_length_mm = cfg_number(cfg, "focal_length_mm", cfg_path);
  lf.disp_min = cfg_number(cfg, "disp_min", cfg_path);
  lf.disp_max = cfg_number(cfg, "disp_max", cfg_path);
  if (!(lf.baseline_mm > 0.0)) {
    throw IngestionError(cfg_path.string(), "baseline_mm must be positive");
  }
  const std::size_t count = static_cast<std::size_t>(lf.grid_cols) * lf.grid_rows;
  lf.center = count / 2;

  lf.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const fs::path file = view_file(dir, i);
    Field img = read_png_luminance(file);
    if (img.width() != width || img.height() != height) {
      throw IngestionError(file.string(), "image size does not match parameters.cfg");
    }
    lf.images.push_back(std::move(img));
  }

  const fs::path gt_path = dir / kLightFieldGt;
  lf.gt_disparity = read_pfm(gt_path);
  if (lf.gt_disparity.width() != width || lf.gt_disparity.height() != height) {
    throw IngestionError(gt_path.string(), "ground truth size differs from the images");
  }
  // Disparities are published per grid step, which is one normalised
  // baseline unit.
  lf.disparity_unit = 1.0;

  const Field& ref = lf.images[lf.center];
  if (lf.grid_cols > 1) {
    lf.sign_x = probe_sign(ref, lf.images[lf.center + 1], lf.gt_disparity, true);
  }
  if (lf.grid_rows > 1) {
    lf.sign_y = probe_sign(ref, lf.images[lf.center + lf.grid_cols],
                           lf.gt_disparity, false);
  }
  return lf;
}

ViewSet select_crosshair(const ViewSet& views) {
  std::vector<View> kept;
  std::size_t reference = 0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const BaselineVec& b = views[i].baseline;
    if (b.bx != 0.0 && b.by != 0.0) continue;
    if (i == views.reference_index()) reference = kept.size();
    kept.push_back(views[i]);
  }
  return ViewSet(std::move(kept), reference);
}

Dataset load_dataset(const fs::path& dir) {
  if (fs::exists(dir / kManifest)) return load_slats_dataset(dir);
  if (fs::exists(dir / kLightFieldConfig)) {
    LightFieldSet lf = load_lightfield(dir);
    Field gt = lf.gt_disparity;
    for (double& v : gt.samples()) v *= lf.disparity_unit;
    const double bound = std::max(std::abs(lf.disp_min), std::abs(lf.disp_max)) *
                         lf.disparity_unit;
    return {dataset_name(dir), select_crosshair(lf.view_set()),
            DisparityField(std::move(gt), Resolution::base),
            GroundTruthGrid::same, bound, true};
  }
  throw IngestionError(dir.string(), "neither manifest.txt nor parameters.cfg found");
}

}  // namespace mvde
