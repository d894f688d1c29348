#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvde/core.hpp"

namespace mvde {

// ---------------------------------------------------------------------------
// File formats

/// Reads a grayscale PFM ("Pf"). Rows are stored bottom-to-top; a negative
/// scale means little-endian samples. Colour ("PF") files, comment lines
/// and truncated payloads raise IngestionError.
Field read_pfm(const std::filesystem::path& path);

/// Writes a little-endian grayscale PFM (scale -1.0), rows bottom-to-top.
void write_pfm(const Field& field, const std::filesystem::path& path);

/// Binary PGM (P5), min-max normalised to the full 8- or 16-bit range.
/// The header comment records the value range that was mapped.
void write_pgm(const Field& field, const std::filesystem::path& path,
               int bits = 8);

/// Loads a PNG and converts it to Rec. 601 luminance in [0, 1].
Field read_png_luminance(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG of values clamped to [0, 1].
void write_png_gray(const Field& field, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic slats scene

struct Slat {
  double x = 0.0;      ///< left edge in reference pixel coordinates
  double width = 0.0;  ///< pixels
};

/// Textured background plane behind vertical textured slats, viewed by a
/// horizontal array of cameras. Depths are given as normalised reciprocal
/// depth (pixels of disparity per unit baseline).
struct SceneSpec {
  int n_views = 31;
  int width = 640;
  int height = 360;
  double view_spacing = 1.25;  ///< mm
  double focal_length = 50.0;  ///< mm
  double background_w = 0.0;
  double slat_w = 1.25;
  std::vector<Slat> slats = default_slats(640);
  std::uint64_t texture_seed = 1;
  /// Standard deviation of each layer's texture around mean 0.5.
  double texture_contrast = 0.3;
  /// Vertical over horizontal spatial frequency of the textures; below 1
  /// the grain runs along the slats.
  double texture_anisotropy = 0.1;

  /// Four bars with widths 20-40 px, spread across the image; positions
  /// and widths scale with `width` (relative to 640).
  static std::vector<Slat> default_slats(int width);

  void validate() const;
};

struct SlatsScene {
  ViewSet views;
  DisparityField gt;  ///< reference w on the 2x grid, base-pixel units
};

SlatsScene generate_slats(const SceneSpec& spec);

/// Number of reference pixels whose background point is hidden behind a
/// slat when seen from a view with baseline b.
std::size_t occluded_pixel_count(const SceneSpec& spec, const BaselineVec& b);

/// Adds i.i.d. zero-mean Gaussian noise and clamps to [0, 1].
ImageGrid add_noise(const ImageGrid& img, double variance, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Datasets on disk

enum class GroundTruthGrid : std::uint8_t { doubled, same };

/// Everything an experiment needs: the views, the ground truth and how it
/// is sampled relative to the estimate.
struct Dataset {
  std::string name;
  ViewSet views;
  std::optional<DisparityField> gt;
  GroundTruthGrid gt_grid = GroundTruthGrid::doubled;
  /// Prior bound on |w|, when the dataset publishes a disparity range.
  std::optional<double> disparity_bound;
  /// True for 2-D camera grids, where the crosshair plan applies.
  bool grid_layout = false;
};

/// Writes views as PFM plus a `manifest.txt` listing baselines, and the
/// ground truth as `gt_disp_2x.pfm`.
void write_slats_dataset(const SlatsScene& scene,
                         const std::filesystem::path& dir);

/// Light-field benchmark scene (9x9 grid).
struct LightFieldSet {
  int grid_cols = 9;
  int grid_rows = 9;
  std::size_t center = 40;
  /// Sign applied to the column/row offsets to form B'. Detected from the
  /// ground truth on load.
  int sign_x = 1;
  int sign_y = 1;
  double baseline_mm = 0.0;
  double focal_length_mm = 0.0;
  double disp_min = 0.0;
  double disp_max = 0.0;
  std::vector<Field> images;
  Field gt_disparity;
  /// Normalised w per unit of benchmark disparity (1: one grid step is one
  /// normalised baseline).
  double disparity_unit = 1.0;

  ViewSet view_set() const;
};

/// Loads `input_CamNNN.png`, `parameters.cfg` and the ground-truth PFM
/// (`gt_disp_lowres.pfm`) from a benchmark scene directory.
LightFieldSet load_lightfield(const std::filesystem::path& dir);

/// Keeps the reference plus every view on its row or column.
ViewSet select_crosshair(const ViewSet& views);

/// Loads either a slats dataset (manifest.txt) or a light-field scene
/// (parameters.cfg; reduced to the crosshair).
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace mvde
