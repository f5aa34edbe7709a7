#pragma once

#include <filesystem>

#include "mtht/image.hpp"

namespace mtht {

/// 2D formats: 8-bit grayscale PNG and PGM (P5/P2 read, P5 write), selected
/// by magic bytes on load and by extension on save. Loaded values keep the
/// stored [0,255] range; saving quantizes via the affine map [lo,hi] -> [0,255]
/// with clamping.
Image2d load_image_2d(const std::filesystem::path& path);
void save_image_2d(const std::filesystem::path& path, const Image2d& img, double lo = 0.0,
                   double hi = 255.0);

/// Masks load as value >= half of the observed maximum (accepts 0/1, 0/255
/// and graded encodings) and save as 0/255.
Mask2 load_mask_2d(const std::filesystem::path& path);
void save_mask_2d(const std::filesystem::path& path, const Mask2& mask);

/// 3D formats: multi-page uncompressed 8-bit grayscale TIFF (either byte
/// order on load, little-endian on save, one strip per page), or raw
/// little-endian float32 in x-fastest order paired with a sidecar
/// `<stem>.json` = {"dims":[x,y,z],"dtype":"f32"}. The raw route stores
/// values verbatim; lo/hi apply to the 8-bit TIFF route only.
Image3d load_volume(const std::filesystem::path& path);
void save_volume(const std::filesystem::path& path, const Image3d& vol, double lo = 0.0,
                 double hi = 255.0);

Mask3 load_mask_3d(const std::filesystem::path& path);
void save_mask_3d(const std::filesystem::path& path, const Mask3& mask);

}  // namespace mtht
