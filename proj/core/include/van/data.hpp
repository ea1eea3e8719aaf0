#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "van/decoder.hpp"
#include "van/image.hpp"
#include "van/random.hpp"

namespace van {

struct IntRange {
  long lo = 0;
  long hi = 0;  // inclusive
};

struct LineBox {
  std::size_t top = 0;
  std::size_t bottom = 0;  // exclusive
  std::size_t left = 0;
  std::size_t right = 0;  // exclusive
};

struct ParagraphSample {
  std::string name;
  Image image;
  std::vector<std::string> lines;
  std::vector<LineBox> line_boxes;  // synthetic samples only
};

struct GeneratorConfig {
  std::string alphabet = "0123456789";
  std::size_t image_height = 160;
  std::size_t image_width = 256;
  IntRange n_lines{2, 5};
  IntRange chars_per_line{2, 8};
  std::size_t glyph_height = 21;
  std::size_t glyph_width = 15;
  std::size_t letter_spacing = 3;
  IntRange top_margin{2, 6};
  IntRange interline_gap{9, 11};
  IntRange indent{0, 40};
  double skew_degrees = 0.0;  // per-line shear angle drawn from [-skew, skew]
  double noise_std = 0.0;

  /// Throws std::invalid_argument, including when lines could overlap or
  /// the largest paragraph would not fit in the image.
  void validate() const;
};

/// Dark glyphs on a light background, lines top to bottom.
ParagraphSample generate_paragraph(const GeneratorConfig& config, Rng& rng);

/// One single-line sample per text line: the line's rows plus `margin` above
/// and below (clipped to the image), full width. Names get a _lineNN suffix.
std::vector<ParagraphSample> crop_lines(const ParagraphSample& paragraph, std::size_t margin);

/// Per-sample seeds are split from one stream, so sample i does not depend
/// on how many samples follow it.
std::vector<ParagraphSample> generate_dataset(const GeneratorConfig& config, std::size_t count, std::uint64_t seed);

class DatasetError : public std::runtime_error {
 public:
  explicit DatasetError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct Dataset {
  Alphabet alphabet;
  std::vector<ParagraphSample> samples;
};

inline constexpr const char* kManifestName = "manifest.json";

/// Writes <name>.pgm, <name>.txt (one line per text line) and manifest.json.
void write_dataset(const std::filesystem::path& root, const std::vector<ParagraphSample>& samples,
                   const Alphabet& alphabet, const GeneratorConfig* generator = nullptr, std::uint64_t seed = 0);

/// Reads every .pgm/.txt pair under root, sorted by file name. The alphabet
/// comes from `alphabet`, else manifest.json, else the characters present.
/// All problems are collected and reported together as a DatasetError.
Dataset load_dataset(const std::filesystem::path& root, const Alphabet* alphabet = nullptr);

/// Sidecar text to lines; a trailing newline does not add an empty line.
std::vector<std::string> parse_transcription(std::string_view text);

struct PreprocessConfig {
  bool downscale = false;  // bilinear x0.5, for scanned pages
  std::size_t min_height = 160;
  std::size_t min_width = 256;
};

/// Optional downscale, zero padding to the minimum size, then to multiples of (32, 8).
Image preprocess(const Image& image, const PreprocessConfig& config);

/// Image-level transform stub point for the perspective, elastic and
/// projective distortions.
class GeometricTransform {
 public:
  virtual ~GeometricTransform() = default;
  virtual Image apply(const Image& image, Rng& rng) const = 0;
};

class IdentityTransform : public GeometricTransform {
 public:
  Image apply(const Image& image, Rng&) const override { return image; }
};

struct AugmentPolicy {
  double probability = 0.2;
  bool resolution = true;
  double min_scale = 0.75;
  double max_scale = 1.25;
  // Applied in this order; once one fires the others are skipped.
  std::vector<std::shared_ptr<const GeometricTransform>> geometric{
      std::make_shared<IdentityTransform>(), std::make_shared<IdentityTransform>(),
      std::make_shared<IdentityTransform>()};
  bool morphology = true;
  bool brightness_contrast = true;
  double max_brightness_shift = 0.2;
  double min_contrast = 0.7;
  double max_contrast = 1.3;
  bool sign_flip = true;

  static AugmentPolicy disabled();
};

/// 3x3 min filter (dark ink grows) and max filter (dark ink shrinks).
Image dilate_ink(const Image& image);
Image erode_ink(const Image& image);
Image invert(const Image& image);

Image augment(const Image& image, Rng& rng, const AugmentPolicy& policy);

}  // namespace van
