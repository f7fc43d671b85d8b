#include "cari/toy_faces.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "cari/datasets.hpp"
#include "cari/errors.hpp"

namespace cari {

namespace {

using Rgb = std::array<float, 3>;

std::mt19937_64 stream(std::uint64_t seed, int index, int which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(which)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Point2 clamp01(Point2 p) { return {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)}; }

// Caricature palettes: skin, eye, iris, brow, nose, upper lip, inner mouth, lower lip, background.
struct Palette {
  Rgb skin, sclera, iris, brow, nose, upper, inner, lower, bg;
};

constexpr std::array<Palette, 3> kCariPalettes = {{
    // warm paper sketch
    {{0.96f, 0.92f, 0.80f}, {1.00f, 1.00f, 0.97f}, {0.15f, 0.12f, 0.10f}, {0.20f, 0.16f, 0.12f},
     {0.86f, 0.78f, 0.62f}, {0.62f, 0.48f, 0.40f}, {0.25f, 0.18f, 0.15f}, {0.72f, 0.58f, 0.48f},
     {0.90f, 0.88f, 0.84f}},
    // saturated cartoon
    {{0.98f, 0.80f, 0.35f}, {0.95f, 0.95f, 1.00f}, {0.10f, 0.30f, 0.70f}, {0.35f, 0.15f, 0.05f},
     {0.95f, 0.62f, 0.25f}, {0.90f, 0.15f, 0.25f}, {0.45f, 0.02f, 0.10f}, {0.98f, 0.30f, 0.40f},
     {0.30f, 0.75f, 0.85f}},
    // cool ink wash
    {{0.72f, 0.80f, 0.90f}, {0.96f, 0.98f, 1.00f}, {0.05f, 0.10f, 0.25f}, {0.08f, 0.10f, 0.22f},
     {0.60f, 0.68f, 0.82f}, {0.45f, 0.35f, 0.65f}, {0.12f, 0.08f, 0.25f}, {0.55f, 0.45f, 0.75f},
     {0.98f, 0.96f, 0.90f}},
}};

bool in_ellipse(double x, double y, Point2 c, double rx, double ry) {
  const double dx = (x - c.x) / rx;
  const double dy = (y - c.y) / ry;
  return dx * dx + dy * dy <= 1.0;
}

double segment_distance(double x, double y, Point2 a, Point2 b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((x - a.x) * vx + (y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = x - (a.x + t * vx), dy = y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

// Class at a normalized position; later primitives paint over earlier ones.
std::uint8_t classify(const ToyFaceGeometry& g, double x, double y) {
  std::uint8_t cls = kBackground;
  if (in_ellipse(x, y, g.face_center, g.face_rx, g.face_ry)) cls = kSkin;
  if (in_ellipse(x, y, g.nose_center, g.nose_rx, g.nose_ry)) cls = kNose;
  for (int s = 0; s < 2; ++s) {
    if (in_ellipse(x, y, g.eye_center[s], g.eye_rx, g.eye_ry)) cls = s == 0 ? kEyeL : kEyeR;
    if (segment_distance(x, y, g.brow_inner[s], g.brow_outer[s]) <= g.brow_half_thickness) {
      cls = s == 0 ? kBrowL : kBrowR;
    }
  }
  const auto& m = g.mouth_center;
  const double half_inner = 0.5 * g.inner_mouth;
  const double dy = y - m.y;
  const double ry = dy < 0 ? half_inner + g.upper_lip : half_inner + g.lower_lip;
  if (in_ellipse(x, y, m, g.mouth_half_width, ry)) {
    if (dy < -half_inner) {
      cls = kUpperLip;
    } else if (dy > half_inner) {
      cls = kLowerLip;
    } else {
      cls = kInnerMouth;
    }
  }
  return cls;
}

void exaggerate(ToyFaceGeometry& g, std::mt19937_64& rng) {
  // Mild overall exaggeration plus one dominant caricature type.
  g.eye_rx *= uniform(rng, 1.05, 1.25);
  g.eye_ry *= uniform(rng, 1.05, 1.3);
  g.mouth_half_width *= uniform(rng, 1.05, 1.2);
  g.nose_ry *= uniform(rng, 1.05, 1.2);
  const int type = std::uniform_int_distribution<int>(0, 3)(rng);
  const Point2 fc = g.face_center;
  switch (type) {
    case 0: {  // big eyes, raised brows
      const double s = uniform(rng, 1.4, 1.8);
      g.eye_rx *= s;
      g.eye_ry *= s;
      for (int i = 0; i < 2; ++i) {
        const double spread = (i == 0 ? -1 : 1) * uniform(rng, 0.01, 0.03);
        g.eye_center[i].x += spread;
        g.brow_inner[i].y -= 0.03;
        g.brow_outer[i].y -= 0.05;
        g.brow_inner[i].x += spread;
        g.brow_outer[i].x += spread;
      }
      break;
    }
    case 1: {  // huge mouth
      g.mouth_half_width *= uniform(rng, 1.35, 1.7);
      const double t = uniform(rng, 1.4, 1.9);
      g.upper_lip *= t;
      g.lower_lip *= t;
      g.inner_mouth *= uniform(rng, 1.5, 2.5);
      g.mouth_center.y += 0.02;
      break;
    }
    case 2: {  // long face, long nose, low mouth
      g.face_ry *= uniform(rng, 1.06, 1.12);
      g.face_center.y += 0.02;
      g.nose_ry *= uniform(rng, 1.4, 1.8);
      g.nose_center.y += 0.03;
      g.mouth_center.y += uniform(rng, 0.04, 0.07);
      break;
    }
    default: {  // wide face, close-set eyes, heavy brows
      g.face_rx *= uniform(rng, 1.1, 1.2);
      const double pull = uniform(rng, 0.02, 0.04);
      for (int i = 0; i < 2; ++i) {
        const double dir = i == 0 ? 1 : -1;
        g.eye_center[i].x += dir * pull;
        g.brow_inner[i].x += dir * pull;
        g.brow_outer[i].x += dir * pull * 0.5;
      }
      g.brow_half_thickness *= uniform(rng, 1.5, 2.0);
      g.nose_rx *= uniform(rng, 1.3, 1.6);
      break;
    }
  }
  // Keep the face on the canvas.
  g.face_rx = std::min(g.face_rx, std::min(fc.x, 1.0 - fc.x) - 0.01);
  g.face_ry = std::min(g.face_ry, std::min(g.face_center.y, 1.0 - g.face_center.y) - 0.01);
}

Rgb mix(const Rgb& a, const Rgb& b, float t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

}  // namespace

ToyDomain parse_domain(const std::string& name) {
  if (name == "photo") return ToyDomain::kPhoto;
  if (name == "caricature") return ToyDomain::kCaricature;
  throw ArgumentError("unknown domain '" + name + "' (expected photo or caricature)");
}

ToyFaceGeometry toy_template(std::uint64_t seed, int index) {
  auto rng = stream(seed, index, 0);
  ToyFaceGeometry g;
  g.face_center = {0.5 + uniform(rng, -0.03, 0.03), 0.5 + uniform(rng, -0.03, 0.03)};
  g.face_rx = 0.32 * uniform(rng, 0.94, 1.06);
  g.face_ry = 0.41 * uniform(rng, 0.95, 1.04);
  const auto& c = g.face_center;
  const double eye_dx = 0.135 * uniform(rng, 0.93, 1.07);
  const double eye_y = c.y - 0.07 + uniform(rng, -0.015, 0.015);
  g.eye_rx = 0.07 * uniform(rng, 0.9, 1.1);
  g.eye_ry = 0.045 * uniform(rng, 0.9, 1.1);
  g.brow_half_thickness = 0.027 * uniform(rng, 0.9, 1.15);
  const double brow_y = eye_y - 0.095 * uniform(rng, 0.92, 1.08);
  for (int s = 0; s < 2; ++s) {
    const double dir = s == 0 ? -1.0 : 1.0;
    g.eye_center[s] = {c.x + dir * eye_dx, eye_y};
    g.brow_inner[s] = {c.x + dir * (eye_dx - 0.055), brow_y + uniform(rng, -0.008, 0.008)};
    g.brow_outer[s] = {c.x + dir * (eye_dx + 0.065), brow_y + uniform(rng, -0.01, 0.01)};
  }
  g.nose_center = {c.x + uniform(rng, -0.008, 0.008), c.y + 0.05};
  g.nose_rx = 0.05 * uniform(rng, 0.9, 1.1);
  g.nose_ry = 0.08 * uniform(rng, 0.9, 1.1);
  g.mouth_center = {c.x + uniform(rng, -0.008, 0.008), c.y + 0.215 + uniform(rng, -0.012, 0.012)};
  g.mouth_half_width = 0.105 * uniform(rng, 0.9, 1.1);
  g.upper_lip = 0.036 * uniform(rng, 0.85, 1.15);
  g.inner_mouth = 0.022 * uniform(rng, 0.7, 1.3);
  g.lower_lip = 0.042 * uniform(rng, 0.85, 1.15);
  return g;
}

LandmarkSet toy_landmarks(const ToyFaceGeometry& g) {
  LandmarkSet l{};
  const auto& c = g.face_center;
  l[0] = {c.x, c.y - g.face_ry};
  l[1] = {c.x - g.face_rx, c.y};
  l[2] = {c.x, c.y + g.face_ry};
  l[3] = {c.x + g.face_rx, c.y};
  l[4] = g.brow_outer[0];
  l[5] = g.brow_inner[0];
  l[6] = g.brow_inner[1];
  l[7] = g.brow_outer[1];
  l[8] = {g.eye_center[0].x - g.eye_rx, g.eye_center[0].y};
  l[9] = {g.eye_center[0].x + g.eye_rx, g.eye_center[0].y};
  l[10] = {g.eye_center[1].x - g.eye_rx, g.eye_center[1].y};
  l[11] = {g.eye_center[1].x + g.eye_rx, g.eye_center[1].y};
  l[12] = {g.nose_center.x, g.nose_center.y + g.nose_ry};
  const auto& m = g.mouth_center;
  l[13] = {m.x - g.mouth_half_width, m.y};
  l[14] = {m.x, m.y - 0.5 * g.inner_mouth - g.upper_lip};
  l[15] = {m.x + g.mouth_half_width, m.y};
  l[16] = {m.x, m.y + 0.5 * g.inner_mouth + g.lower_lip};
  for (auto& p : l) p = clamp01(p);
  return l;
}

ToyFace render_toy_face(ToyDomain domain, std::uint64_t seed, int index, int size) {
  if (size < kMinImageSide) throw ArgumentError("toy faces must be at least 32 pixels");
  ToyFace face;
  face.geometry = toy_template(seed, index);
  auto tex = stream(seed, index, domain == ToyDomain::kPhoto ? 1 : 2);
  if (domain == ToyDomain::kCaricature) exaggerate(face.geometry, tex);
  const auto& g = face.geometry;

  face.labels = LabelMap(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) face.labels.at(y, x) = classify(g, (x + 0.5) / size, (y + 0.5) / size);
  }
  face.landmarks = toy_landmarks(g);

  Palette pal{};
  float shading = 0.0f, noise_sigma = 0.0f;
  Rgb bg_bottom{};
  if (domain == ToyDomain::kPhoto) {
    const float tone = static_cast<float>(uniform(tex, 0.0, 1.0));
    const Rgb light{0.93f, 0.78f, 0.68f}, dark{0.55f, 0.38f, 0.28f};
    pal.skin = mix(light, dark, tone);
    pal.sclera = {0.88f, 0.86f, 0.84f};
    pal.iris = mix(Rgb{0.35f, 0.22f, 0.12f}, Rgb{0.25f, 0.40f, 0.45f}, static_cast<float>(uniform(tex, 0, 1)));
    pal.brow = mix(Rgb{0.22f, 0.15f, 0.10f}, Rgb{0.45f, 0.32f, 0.20f}, static_cast<float>(uniform(tex, 0, 1)));
    pal.nose = {pal.skin[0] * 0.88f, pal.skin[1] * 0.84f, pal.skin[2] * 0.82f};
    pal.upper = {0.66f, 0.33f, 0.33f};
    pal.inner = {0.30f, 0.10f, 0.10f};
    pal.lower = {0.74f, 0.40f, 0.40f};
    const float gray = static_cast<float>(uniform(tex, 0.25, 0.75));
    pal.bg = {gray, gray * static_cast<float>(uniform(tex, 0.9, 1.1)), gray * static_cast<float>(uniform(tex, 0.9, 1.1))};
    bg_bottom = {pal.bg[0] * 0.7f, pal.bg[1] * 0.7f, pal.bg[2] * 0.7f};
    shading = 0.3f;
    noise_sigma = 0.02f;
  } else {
    pal = kCariPalettes[std::uniform_int_distribution<std::size_t>(0, kCariPalettes.size() - 1)(tex)];
    bg_bottom = pal.bg;
    noise_sigma = 0.01f;
  }

  face.image = Image(size, size);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double nx = (x + 0.5) / size, ny = (y + 0.5) / size;
      Rgb col{};
      switch (face.labels.at(y, x)) {
        case kSkin: col = pal.skin; break;
        case kNose: col = pal.nose; break;
        case kEyeL:
        case kEyeR: {
          const auto& ec = g.eye_center[face.labels.at(y, x) == kEyeL ? 0 : 1];
          col = in_ellipse(nx, ny, ec, g.eye_ry * 0.95, g.eye_ry * 0.95) ? pal.iris : pal.sclera;
          break;
        }
        case kBrowL:
        case kBrowR: col = pal.brow; break;
        case kUpperLip: col = pal.upper; break;
        case kInnerMouth: col = pal.inner; break;
        case kLowerLip: col = pal.lower; break;
        default: col = mix(pal.bg, bg_bottom, static_cast<float>(ny)); break;
      }
      if (shading > 0.0f && face.labels.at(y, x) != kBackground) {
        const double dx = (nx - g.face_center.x) / g.face_rx, dy = (ny - g.face_center.y) / g.face_ry;
        const float f = 1.0f - shading * static_cast<float>(std::min(1.0, dx * dx + dy * dy));
        for (auto& v : col) v *= f;
      }
      for (int ch = 0; ch < 3; ++ch) {
        face.image.at(ch, y, x) = std::clamp(col[ch] + noise_sigma * noise(tex), 0.0f, 1.0f);
      }
    }
  }

  if (domain == ToyDomain::kCaricature) {
    // Ink outlines along every class boundary.
    const Image flat = face.image;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const auto c = face.labels.at(y, x);
        const bool edge = (x + 1 < size && face.labels.at(y, x + 1) != c) ||
                          (y + 1 < size && face.labels.at(y + 1, x) != c);
        if (!edge) continue;
        for (int ch = 0; ch < 3; ++ch) face.image.at(ch, y, x) = flat.at(ch, y, x) * 0.3f;
      }
    }
  }
  return face;
}

void generate_toy_face_dataset(const std::filesystem::path& root, const ToyDatasetOptions& opts) {
  if (opts.count < 1) throw ArgumentError("toy dataset needs at least one face");
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  const bool labels = opts.domain == ToyDomain::kPhoto || opts.caricature_labels;
  for (int i = 0; i < opts.count; ++i) {
    const auto face = render_toy_face(opts.domain, opts.seed, i, opts.size);
    char name[32];
    std::snprintf(name, sizeof name, "toy_%04d", i);
    write_sample(root, name, face.image, face.landmarks, labels ? &face.labels : nullptr);
  }
}

}  // namespace cari
