#include "van/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "van/glyphs.hpp"
#include "van/text.hpp"

namespace van {

namespace fs = std::filesystem;

namespace {

constexpr double kBackground = 1.0;
constexpr double kInk = 0.0;

void check_range(const IntRange& r, long minimum, const char* name) {
  if (r.lo < minimum || r.hi < r.lo) {
    throw std::invalid_argument(std::string("generator: invalid range for ") + name + " [" + std::to_string(r.lo) +
                                ", " + std::to_string(r.hi) + "]");
  }
}

long draw(Rng& rng, const IntRange& r) { return rng.between(r.lo, r.hi); }

std::string describe(const fs::path& p) { return p.filename().string(); }

}  // namespace

void GeneratorConfig::validate() const {
  const std::u32string symbols = utf8_to_u32(alphabet);
  if (symbols.empty()) throw std::invalid_argument("generator: empty alphabet");
  Alphabet{symbols};  // duplicate check
  bool has_visible = false;
  for (char32_t s : symbols) {
    if (!atlas_has(s)) throw std::invalid_argument("generator: no glyph for '" + utf8_encode(s) + "'");
    has_visible |= s != U' ';
  }
  if (!has_visible) throw std::invalid_argument("generator: alphabet has no visible glyph");
  check_range(n_lines, 0, "n_lines");
  check_range(chars_per_line, 1, "chars_per_line");
  check_range(top_margin, 0, "top_margin");
  check_range(interline_gap, 0, "interline_gap");
  check_range(indent, 0, "indent");
  if (glyph_height == 0 || glyph_width == 0) throw std::invalid_argument("generator: glyph size must be positive");
  if (skew_degrees < 0.0 || skew_degrees >= 45.0) throw std::invalid_argument("generator: skew must be in [0, 45)");
  if (noise_std < 0.0) throw std::invalid_argument("generator: noise_std must be non-negative");

  const double advance = static_cast<double>(glyph_width + letter_spacing);
  const double max_width = static_cast<double>(indent.hi) + static_cast<double>(chars_per_line.hi) * advance;
  if (max_width > static_cast<double>(image_width)) {
    throw std::invalid_argument("generator: longest line (" + std::to_string(static_cast<long>(max_width)) +
                                " px) exceeds image width " + std::to_string(image_width));
  }
  const double rise = std::ceil(max_width * std::tan(skew_degrees * std::numbers::pi / 180.0));
  if (n_lines.hi > 1 && static_cast<double>(interline_gap.lo) <= 2.0 * rise) {
    throw std::invalid_argument("generator: skew of " + std::to_string(skew_degrees) +
                                " degrees lets lines overlap; interline_gap minimum must exceed " +
                                std::to_string(static_cast<long>(2 * rise)) + " px");
  }
  const double tallest = static_cast<double>(top_margin.hi) + rise +
                         static_cast<double>(n_lines.hi) * static_cast<double>(glyph_height) +
                         static_cast<double>(std::max(0L, n_lines.hi - 1)) * static_cast<double>(interline_gap.hi) + rise;
  if (tallest > static_cast<double>(image_height)) {
    throw std::invalid_argument("generator: " + std::to_string(n_lines.hi) + " lines need " +
                                std::to_string(static_cast<long>(tallest)) + " px but the image height is " +
                                std::to_string(image_height));
  }
}

ParagraphSample generate_paragraph(const GeneratorConfig& config, Rng& rng) {
  config.validate();
  const std::u32string symbols = utf8_to_u32(config.alphabet);
  std::u32string visible;
  for (char32_t s : symbols)
    if (s != U' ') visible.push_back(s);

  ParagraphSample sample;
  sample.image = Image({config.image_height, config.image_width, 1}, kBackground);
  const double advance = static_cast<double>(config.glyph_width + config.letter_spacing);
  const double max_width =
      static_cast<double>(config.indent.hi) + static_cast<double>(config.chars_per_line.hi) * advance;
  const auto rise = static_cast<long>(std::ceil(max_width * std::tan(config.skew_degrees * std::numbers::pi / 180.0)));

  const long n_lines = draw(rng, config.n_lines);
  long top = draw(rng, config.top_margin) + rise;
  for (long line = 0; line < n_lines; ++line) {
    const long n_chars = draw(rng, config.chars_per_line);
    std::u32string text;
    for (long i = 0; i < n_chars; ++i) {
      const bool edge = i == 0 || i == n_chars - 1;
      const std::u32string& pool = edge ? visible : symbols;
      text.push_back(pool[rng.below(pool.size())]);
    }
    const auto left = static_cast<std::size_t>(draw(rng, config.indent));
    const double shear = std::tan(rng.uniform(-config.skew_degrees, config.skew_degrees) * std::numbers::pi / 180.0);

    LineBox box{static_cast<std::size_t>(top), static_cast<std::size_t>(top), left, left};
    long min_y = top, max_y = top;
    for (std::size_t k = 0; k < text.size(); ++k) {
      const Glyph& glyph = atlas_glyph(text[k]);
      const std::size_t x0 = left + k * (config.glyph_width + config.letter_spacing);
      for (std::size_t gx = 0; gx < config.glyph_width; ++gx) {
        const std::size_t x = x0 + gx;
        const long dy = std::lround(static_cast<double>(x - left) * shear);
        const std::size_t col = gx * kGlyphCols / config.glyph_width;
        for (std::size_t gy = 0; gy < config.glyph_height; ++gy) {
          const long y = top + static_cast<long>(gy) + dy;
          min_y = std::min(min_y, y);
          max_y = std::max(max_y, y + 1);
          if (glyph.dot(gy * kGlyphRows / config.glyph_height, col)) {
            sample.image.at(static_cast<std::size_t>(y), x, 0) = kInk;
          }
        }
      }
    }
    box.top = static_cast<std::size_t>(min_y);
    box.bottom = static_cast<std::size_t>(max_y);
    box.right = left + text.size() * (config.glyph_width + config.letter_spacing) - config.letter_spacing;
    sample.line_boxes.push_back(box);
    sample.lines.push_back(u32_to_utf8(text));
    top += static_cast<long>(config.glyph_height) + draw(rng, config.interline_gap);
  }
  if (config.noise_std > 0.0) {
    for (std::size_t i = 0; i < sample.image.size(); ++i) {
      sample.image[i] = std::clamp(sample.image[i] + config.noise_std * rng.normal(), 0.0, 1.0);
    }
  }
  return sample;
}

std::vector<ParagraphSample> crop_lines(const ParagraphSample& paragraph, std::size_t margin) {
  if (paragraph.line_boxes.size() != paragraph.lines.size()) {
    throw std::invalid_argument(paragraph.name + ": crop_lines needs one line box per text line");
  }
  const std::size_t height = paragraph.image.dim(0), width = paragraph.image.dim(1), channels = paragraph.image.dim(2);
  std::vector<ParagraphSample> out;
  for (std::size_t i = 0; i < paragraph.lines.size(); ++i) {
    const LineBox& box = paragraph.line_boxes[i];
    const std::size_t top = box.top > margin ? box.top - margin : 0;
    const std::size_t bottom = std::min(height, box.bottom + margin);
    if (bottom <= top) throw std::invalid_argument(paragraph.name + ": empty line box");
    ParagraphSample line;
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "_line%02zu", i);
    line.name = paragraph.name + suffix;
    line.image = Image({bottom - top, width, channels});
    std::copy_n(paragraph.image.data().begin() + static_cast<std::ptrdiff_t>(top * width * channels),
                (bottom - top) * width * channels, line.image.data().begin());
    line.lines = {paragraph.lines[i]};
    line.line_boxes = {LineBox{box.top - top, box.bottom - top, box.left, box.right}};
    out.push_back(std::move(line));
  }
  return out;
}

std::vector<ParagraphSample> generate_dataset(const GeneratorConfig& config, std::size_t count, std::uint64_t seed) {
  config.validate();
  Rng master(seed);
  std::vector<ParagraphSample> samples;
  samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = master.split();
    ParagraphSample sample = generate_paragraph(config, rng);
    char name[32];
    std::snprintf(name, sizeof name, "sample_%05zu", i);
    sample.name = name;
    samples.push_back(std::move(sample));
  }
  return samples;
}

DatasetError::DatasetError(std::vector<std::string> problems)
    : std::runtime_error([&] {
        std::string msg = "dataset has " + std::to_string(problems.size()) + " problem(s):";
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

void write_dataset(const fs::path& root, const std::vector<ParagraphSample>& samples, const Alphabet& alphabet,
                   const GeneratorConfig* generator, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw std::runtime_error("cannot create " + root.string() + ": " + ec.message());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ParagraphSample& s = samples[i];
    std::string name = s.name;
    if (name.empty()) {
      char buffer[32];
      std::snprintf(buffer, sizeof buffer, "sample_%05zu", i);
      name = buffer;
    }
    write_pgm(root / (name + ".pgm"), quantize_8bit(s.image));
    std::ofstream txt(root / (name + ".txt"), std::ios::binary);
    if (!txt) throw std::runtime_error("cannot write " + (root / (name + ".txt")).string());
    for (const std::string& line : s.lines) txt << line << '\n';
  }
  nlohmann::ordered_json manifest;
  manifest["alphabet"] = alphabet.utf8();
  manifest["samples"] = samples.size();
  if (generator) {
    const GeneratorConfig& g = *generator;
    manifest["seed"] = seed;
    manifest["generator"] = {
        {"image_height", g.image_height},   {"image_width", g.image_width},
        {"n_lines", {g.n_lines.lo, g.n_lines.hi}},
        {"chars_per_line", {g.chars_per_line.lo, g.chars_per_line.hi}},
        {"glyph_height", g.glyph_height},   {"glyph_width", g.glyph_width},
        {"letter_spacing", g.letter_spacing},
        {"top_margin", {g.top_margin.lo, g.top_margin.hi}},
        {"interline_gap", {g.interline_gap.lo, g.interline_gap.hi}},
        {"indent", {g.indent.lo, g.indent.hi}}, {"skew_degrees", g.skew_degrees},
        {"noise_std", g.noise_std}};
  }
  std::ofstream out(root / kManifestName, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + root.string());
  out << manifest.dump(2) << '\n';
}

std::vector<std::string> parse_transcription(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(postprocess_text(line));
    start = end + 1;
  }
  return lines;
}

Dataset load_dataset(const fs::path& root, const Alphabet* alphabet) {
  if (!fs::is_directory(root)) throw DatasetError({root.string() + ": not a directory"});
  std::vector<std::string> problems;
  Dataset dataset;
  bool have_alphabet = alphabet != nullptr;
  if (alphabet) dataset.alphabet = *alphabet;

  const fs::path manifest_path = root / kManifestName;
  if (!have_alphabet && fs::exists(manifest_path)) {
    try {
      std::ifstream in(manifest_path);
      const auto manifest = nlohmann::json::parse(in);
      dataset.alphabet = Alphabet::from_utf8(manifest.at("alphabet").get<std::string>());
      have_alphabet = true;
    } catch (const std::exception& e) {
      problems.push_back(std::string(kManifestName) + ": " + e.what());
    }
  }

  std::set<std::string> images, sidecars;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const fs::path& p = entry.path();
    if (p.extension() == ".pgm") images.insert(p.stem().string());
    if (p.extension() == ".txt") sidecars.insert(p.stem().string());
  }
  for (const std::string& stem : sidecars)
    if (!images.count(stem)) problems.push_back(stem + ".txt: no matching image " + stem + ".pgm");

  std::set<char32_t> seen;
  for (const std::string& stem : images) {
    const fs::path image_path = root / (stem + ".pgm");
    const fs::path text_path = root / (stem + ".txt");
    ParagraphSample sample;
    sample.name = stem;
    if (!sidecars.count(stem)) {
      problems.push_back(describe(image_path) + ": missing sidecar " + describe(text_path));
      continue;
    }
    try {
      sample.image = read_pgm(image_path);
    } catch (const std::exception& e) {
      problems.push_back(describe(image_path) + ": " + e.what());
      continue;
    }
    std::ifstream in(text_path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
      sample.lines = parse_transcription(buffer.str());
      for (std::size_t k = 0; k < sample.lines.size(); ++k) {
        for (char32_t ch : utf8_to_u32(sample.lines[k])) {
          if (have_alphabet && !dataset.alphabet.contains(ch)) {
            throw std::invalid_argument("line " + std::to_string(k + 1) + ": character '" + utf8_encode(ch) +
                                        "' is not in the alphabet");
          }
          seen.insert(ch);
        }
      }
    } catch (const std::exception& e) {
      problems.push_back(describe(text_path) + ": " + e.what());
      continue;
    }
    dataset.samples.push_back(std::move(sample));
  }
  if (!problems.empty()) throw DatasetError(std::move(problems));
  if (!have_alphabet) dataset.alphabet = Alphabet(std::u32string(seen.begin(), seen.end()));
  return dataset;
}

Image preprocess(const Image& image, const PreprocessConfig& config) {
  if (image.rank() != 3) throw std::invalid_argument("preprocess: image must be (H, W, C)");
  Image out = image;
  if (config.downscale) {
    out = resize_bilinear(out, std::max<std::size_t>(1, out.dim(0) / 2), std::max<std::size_t>(1, out.dim(1) / 2));
  }
  auto round_up = [](std::size_t v, std::size_t m) { return (v + m - 1) / m * m; };
  const std::size_t height = round_up(std::max(out.dim(0), config.min_height), 32);
  const std::size_t width = round_up(std::max(out.dim(1), config.min_width), 8);
  return pad_bottom_right(out, height, width);
}

AugmentPolicy AugmentPolicy::disabled() {
  AugmentPolicy p;
  p.probability = 0.0;
  return p;
}

namespace {

Image filter3x3(const Image& image, bool take_min) {
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Image out(image.shape());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double v = image.at(y, x, ch);
        for (std::size_t yy = y == 0 ? 0 : y - 1; yy <= std::min(h - 1, y + 1); ++yy)
          for (std::size_t xx = x == 0 ? 0 : x - 1; xx <= std::min(w - 1, x + 1); ++xx)
            v = take_min ? std::min(v, image.at(yy, xx, ch)) : std::max(v, image.at(yy, xx, ch));
        out.at(y, x, ch) = v;
      }
  return out;
}

}  // namespace

Image dilate_ink(const Image& image) { return filter3x3(image, true); }
Image erode_ink(const Image& image) { return filter3x3(image, false); }

Image invert(const Image& image) {
  Image out = image;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - out[i];
  return out;
}

Image augment(const Image& image, Rng& rng, const AugmentPolicy& policy) {
  if (image.rank() != 3) throw std::invalid_argument("augment: image must be (H, W, C)");
  Image out = image;
  auto fires = [&] { return policy.probability > 0.0 && rng.bernoulli(policy.probability); };
  if (policy.resolution && fires()) {
    const double scale = rng.uniform(policy.min_scale, policy.max_scale);
    const auto h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(out.dim(0) * scale)));
    const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(out.dim(1) * scale)));
    out = resize_bilinear(out, h, w);
  }
  for (const auto& transform : policy.geometric) {
    if (transform && fires()) {
      out = transform->apply(out, rng);
      break;
    }
  }
  if (policy.morphology && fires()) out = rng.bernoulli(0.5) ? dilate_ink(out) : erode_ink(out);
  if (policy.brightness_contrast && fires()) {
    const double shift = rng.uniform(-policy.max_brightness_shift, policy.max_brightness_shift);
    const double contrast = rng.uniform(policy.min_contrast, policy.max_contrast);
    double mean = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) mean += out[i];
    mean /= static_cast<double>(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp((out[i] - mean) * contrast + mean + shift, 0.0, 1.0);
  }
  if (policy.sign_flip && fires()) out = invert(out);
  return out;
}

}  // namespace van
