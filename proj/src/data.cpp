#include "posekit/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "posekit/errors.hpp"
#include "posekit/rng.hpp"

namespace posekit {

using nlohmann::json;

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("json parse failure in " + path.string() + ": " + e.what());
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& annotations_or_dir, double bounds_margin_frac) {
  std::filesystem::path json_path = annotations_or_dir;
  if (std::filesystem::is_directory(json_path)) json_path /= "annotations.json";
  const json j = read_json_file(json_path);

  Dataset ds;
  ds.root = json_path.parent_path();
  try {
    const auto& cats = j.at("categories");
    if (cats.empty()) throw DataError("no categories in " + json_path.string());
    const auto& cat = cats.at(0);
    SkeletonSpec& sk = ds.skeleton;
    sk.name = cat.value("name", "person");
    sk.joint_names = cat.at("keypoints").get<std::vector<std::string>>();
    sk.num_joints = static_cast<int>(sk.joint_names.size());
    for (const auto& e : cat.at("skeleton")) sk.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    for (const auto& e : cat.at("flip_pairs"))
      sk.flip_pairs.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    sk.oks_sigmas = cat.at("oks_sigmas").get<std::vector<double>>();
    sk.validate();

    std::map<int, DatasetRecord> by_id;
    for (const auto& im : j.at("images")) {
      DatasetRecord rec;
      rec.image_id = im.at("id").get<int>();
      rec.file_name = im.at("file_name").get<std::string>();
      rec.width = im.at("width").get<int>();
      rec.height = im.at("height").get<int>();
      if (rec.width <= 0 || rec.height <= 0)
        throw DataError("image " + std::to_string(rec.image_id) + ": bad dimensions");
      if (im.contains("pairs"))
        for (const auto& p : im.at("pairs"))
          rec.pair_groups.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
      if (!by_id.emplace(rec.image_id, std::move(rec)).second)
        throw DataError("duplicate image id " + std::to_string(rec.image_id));
    }

    const int n = sk.num_joints;
    std::map<int, std::vector<Instance>> anns;  // image_id -> instances, later sorted by ann id
    std::set<int> ann_ids;
    for (const auto& a : j.at("annotations")) {
      Instance inst;
      inst.ann_id = a.at("id").get<int>();
      if (!ann_ids.insert(inst.ann_id).second)
        throw DataError("duplicate annotation id " + std::to_string(inst.ann_id));
      const int image_id = a.at("image_id").get<int>();
      auto rec_it = by_id.find(image_id);
      if (rec_it == by_id.end())
        throw DataError("annotation " + std::to_string(inst.ann_id) + ": unknown image id " +
                        std::to_string(image_id));
      const auto& bbox = a.at("bbox");
      inst.box = {bbox.at(0).get<double>(), bbox.at(1).get<double>(),
                  bbox.at(0).get<double>() + bbox.at(2).get<double>(),
                  bbox.at(1).get<double>() + bbox.at(3).get<double>()};
      if (!inst.box.valid())
        throw DataError("annotation " + std::to_string(inst.ann_id) + ": degenerate bbox");
      inst.area = a.value("area", inst.box.area());
      const auto kp = a.at("keypoints").get<std::vector<double>>();
      if (static_cast<int>(kp.size()) != 3 * n)
        throw DataError("annotation " + std::to_string(inst.ann_id) + ": keypoints length " +
                        std::to_string(kp.size()) + ", expected " + std::to_string(3 * n));
      inst.gt.frame = Frame::kSourcePixels;
      inst.gt.joints.resize(n);
      const DatasetRecord& rec = rec_it->second;
      const double margin = bounds_margin_frac * std::max(rec.width, rec.height);
      for (int k = 0; k < n; ++k) {
        const double x = kp[3 * k], y = kp[3 * k + 1];
        const int v = static_cast<int>(kp[3 * k + 2]);
        if (v < 0 || v > 2)
          throw DataError("annotation " + std::to_string(inst.ann_id) + ": visibility flag " +
                          std::to_string(v) + " out of {0,1,2}");
        GtJoint& gj = inst.gt.joints[k];
        gj.x = x;
        gj.y = y;
        gj.labeled = v != 2;
        gj.visible = v == 1;
        if (gj.labeled &&
            (x < -margin || x > rec.width + margin || y < -margin || y > rec.height + margin))
          throw DataError("annotation " + std::to_string(inst.ann_id) + ": labeled joint " +
                          std::to_string(k) + " outside image bounds");
      }
      anns[image_id].push_back(std::move(inst));
    }

    for (auto& [image_id, rec] : by_id) {
      auto it = anns.find(image_id);
      if (it != anns.end()) {
        std::sort(it->second.begin(), it->second.end(),
                  [](const Instance& a, const Instance& b) { return a.ann_id < b.ann_id; });
        rec.instances = std::move(it->second);
      }
      for (auto [a, b] : rec.pair_groups) {
        const int m = static_cast<int>(rec.instances.size());
        if (a < 0 || b < 0 || a >= m || b >= m || a == b)
          throw DataError("image " + std::to_string(image_id) + ": invalid pair group (" +
                          std::to_string(a) + "," + std::to_string(b) + ")");
      }
      ds.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw DataError("annotation schema violation in " + json_path.string() + ": " + e.what());
  }
  return ds;
}

void save_annotations(const Dataset& dataset, const std::filesystem::path& json_path) {
  json j;
  j["info"] = {{"description", "posekit dataset"}, {"version", "1.0"}};
  json cat;
  cat["id"] = 1;
  cat["name"] = dataset.skeleton.name;
  cat["keypoints"] = dataset.skeleton.joint_names;
  json edges = json::array(), flips = json::array();
  for (auto [a, b] : dataset.skeleton.edges) edges.push_back({a, b});
  for (auto [a, b] : dataset.skeleton.flip_pairs) flips.push_back({a, b});
  cat["skeleton"] = edges;
  cat["flip_pairs"] = flips;
  cat["oks_sigmas"] = dataset.skeleton.oks_sigmas;
  j["categories"] = json::array({cat});

  json images = json::array(), annotations = json::array();
  for (const auto& rec : dataset.records) {
    json im;
    im["id"] = rec.image_id;
    im["file_name"] = rec.file_name;
    im["width"] = rec.width;
    im["height"] = rec.height;
    if (!rec.pair_groups.empty()) {
      json pairs = json::array();
      for (auto [a, b] : rec.pair_groups) pairs.push_back({a, b});
      im["pairs"] = pairs;
    }
    images.push_back(std::move(im));
    for (const auto& inst : rec.instances) {
      json a;
      a["id"] = inst.ann_id;
      a["image_id"] = rec.image_id;
      a["category_id"] = 1;
      a["bbox"] = {inst.box.x1, inst.box.y1, inst.box.width(), inst.box.height()};
      a["area"] = inst.area;
      json kp = json::array();
      int labeled = 0;
      for (const auto& gj : inst.gt.joints) {
        kp.push_back(gj.x);
        kp.push_back(gj.y);
        kp.push_back(gj.visible ? 1 : (gj.labeled ? 0 : 2));
        labeled += gj.labeled ? 1 : 0;
      }
      a["keypoints"] = std::move(kp);
      a["num_keypoints"] = labeled;
      annotations.push_back(std::move(a));
    }
  }
  j["images"] = std::move(images);
  j["annotations"] = std::move(annotations);

  std::ofstream out(json_path);
  if (!out) throw DataError("cannot write " + json_path.string());
  out << j.dump(1) << '\n';
}

ImageF load_record_image(const Dataset& dataset, const DatasetRecord& record, int channels) {
  const ImageU8 img = read_png(dataset.root / record.file_name);
  if (img.width != record.width || img.height != record.height)
    throw DataError("image " + record.file_name + ": size does not match annotations");
  return to_float(img, channels);
}

Crop crop_instance(const ImageF& image, const BoundingBox& box, int target_size,
                   double margin_frac) {
  if (!box.valid()) throw DataError("crop: degenerate box");
  const double w = image.width(), h = image.height();
  const double ix = std::min(box.x2, w) - std::max(box.x1, 0.0);
  const double iy = std::min(box.y2, h) - std::max(box.y1, 0.0);
  if (ix <= 0.0 || iy <= 0.0) throw DataError("crop: box does not intersect the image");

  Crop crop;
  crop.box = box;
  crop.expanded = box.expanded(margin_frac);
  const BoundingBox& e = crop.expanded;
  const double s = target_size;
  crop.to_crop = {s / e.width(), -e.x1 * s / e.width(), s / e.height(), -e.y1 * s / e.height()};

  const int c = image.channels();
  crop.pixels.pixels = Tensor::zeros({c, target_size, target_size});
  for (int ty = 0; ty < target_size; ++ty) {
    const double sy = e.y1 + (ty + 0.5) * e.height() / s - 0.5;
    const double cy = std::clamp(sy, 0.0, h - 1.0);
    const int y0 = std::min(static_cast<int>(cy), image.height() - 2);
    const double fy = cy - y0;
    for (int tx = 0; tx < target_size; ++tx) {
      const double sx = e.x1 + (tx + 0.5) * e.width() / s - 0.5;
      const double cx = std::clamp(sx, 0.0, w - 1.0);
      const int x0 = std::min(static_cast<int>(cx), image.width() - 2);
      const double fx = cx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double v00 = image.pixels.at3(ch, y0, x0), v01 = image.pixels.at3(ch, y0, x0 + 1);
        const double v10 = image.pixels.at3(ch, y0 + 1, x0),
                     v11 = image.pixels.at3(ch, y0 + 1, x0 + 1);
        crop.pixels.pixels.at3(ch, ty, tx) =
            (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
      }
    }
  }
  return crop;
}

// ----------------------------------------------------------------- synthetic

void SynthConfig::validate() const {
  if (num_images <= 0) throw ConfigError("synth: num_images must be positive");
  if (image_size < 32) throw ConfigError("synth: image_size must be at least 32");
  if (occlusion_rate < 0.0 || occlusion_rate > 1.0)
    throw ConfigError("synth: occlusion_rate must be in [0,1]");
  if (!(scale_min > 0.0) || scale_max < scale_min)
    throw ConfigError("synth: bad scale range");
  if (!(thickness_min > 0.0) || thickness_max < thickness_min)
    throw ConfigError("synth: bad thickness range");
  skeleton.validate();
}

namespace {

struct Figure {
  std::vector<double> xs, ys;  // 12 joints
  double intensity = 0.7;
  double thickness = 2.5;
};

// Joint order: L/R shoulder, L/R elbow, L/R wrist, L/R hip, L/R knee,
// L/R ankle. Segment lengths stay within [0.2, 0.7] of the body scale,
// which keeps every skeleton edge inside SynthConfig::limb_bounds.
Figure sample_figure(Rng& rng, double scale, double cx, double cy) {
  Figure f;
  f.xs.resize(12);
  f.ys.resize(12);
  const double torso_angle = rng.uniform(-0.35, 0.35);
  const double dx = std::sin(torso_angle), dy = std::cos(torso_angle);  // down vector
  const double rx = dy, ry = -dx;                                      // right vector

  const double torso = scale * rng.uniform(0.50, 0.64);
  const double half_sho = scale * rng.uniform(0.16, 0.21);
  const double half_hip = scale * rng.uniform(0.13, 0.16);
  const double hx = cx + torso * dx, hy = cy + torso * dy;

  f.xs[0] = cx - half_sho * rx;
  f.ys[0] = cy - half_sho * ry;
  f.xs[1] = cx + half_sho * rx;
  f.ys[1] = cy + half_sho * ry;
  f.xs[6] = hx - half_hip * rx;
  f.ys[6] = hy - half_hip * ry;
  f.xs[7] = hx + half_hip * rx;
  f.ys[7] = hy + half_hip * ry;

  auto place = [&](int from, int to, double len, double angle) {
    // angle measured from the torso-down direction
    const double c = std::cos(angle), s = std::sin(angle);
    f.xs[to] = f.xs[from] + len * (dx * c + rx * s);
    f.ys[to] = f.ys[from] + len * (dy * c + ry * s);
  };
  for (int side = 0; side < 2; ++side) {
    const double upper = scale * rng.uniform(0.26, 0.34);
    const double fore = scale * rng.uniform(0.24, 0.32);
    const double a1 = rng.uniform(-M_PI, M_PI);
    place(side == 0 ? 0 : 1, side == 0 ? 2 : 3, upper, a1);
    place(side == 0 ? 2 : 3, side == 0 ? 4 : 5, fore, a1 + rng.uniform(-1.8, 1.8));

    const double thigh = scale * rng.uniform(0.30, 0.40);
    const double shin = scale * rng.uniform(0.30, 0.40);
    const double b1 = rng.uniform(-0.55, 0.55);
    place(side == 0 ? 6 : 7, side == 0 ? 8 : 9, thigh, b1);
    place(side == 0 ? 8 : 9, side == 0 ? 10 : 11, shin, b1 + rng.uniform(-0.8, 0.8));
  }
  f.intensity = rng.uniform(0.45, 0.85);
  f.thickness = 0.0;  // set by caller
  return f;
}

bool figure_in_bounds(const Figure& f, int size, double margin) {
  for (int k = 0; k < 12; ++k)
    if (f.xs[k] < margin || f.xs[k] > size - 1 - margin || f.ys[k] < margin ||
        f.ys[k] > size - 1 - margin)
      return false;
  return true;
}

void quantize_figure(Figure& f) {
  // 1/64 px grid keeps coordinate mirroring exactly invertible
  for (int k = 0; k < 12; ++k) {
    f.xs[k] = std::round(f.xs[k] * 64.0) / 64.0;
    f.ys[k] = std::round(f.ys[k] * 64.0) / 64.0;
  }
}

void draw_disc(std::vector<double>& canvas, std::vector<std::uint8_t>* mask, int size, double px,
               double py, double radius, double intensity) {
  const int x0 = std::max(0, static_cast<int>(std::floor(px - radius - 1)));
  const int x1 = std::min(size - 1, static_cast<int>(std::ceil(px + radius + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(py - radius - 1)));
  const int y1 = std::min(size - 1, static_cast<int>(std::ceil(py + radius + 1)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double d = std::hypot(x - px, y - py);
      const double a = std::clamp(radius + 0.5 - d, 0.0, 1.0);
      if (a <= 0.0) continue;
      double& pix = canvas[static_cast<std::size_t>(y) * size + x];
      pix = std::max(pix, a * intensity);
      if (mask && a > 0.5) (*mask)[static_cast<std::size_t>(y) * size + x] = 1;
    }
}

void draw_segment(std::vector<double>& canvas, std::vector<std::uint8_t>* mask, int size,
                  double ax, double ay, double bx, double by, double half_w, double intensity) {
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - half_w - 1)));
  const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(ax, bx) + half_w + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - half_w - 1)));
  const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(ay, by) + half_w + 1)));
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double t = len2 > 0.0 ? ((x - ax) * vx + (y - ay) * vy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double d = std::hypot(x - (ax + t * vx), y - (ay + t * vy));
      const double a = std::clamp(half_w + 0.5 - d, 0.0, 1.0);
      if (a <= 0.0) continue;
      double& pix = canvas[static_cast<std::size_t>(y) * size + x];
      pix = std::max(pix, a * intensity);
      if (mask && a > 0.5) (*mask)[static_cast<std::size_t>(y) * size + x] = 1;
    }
}

void draw_figure(const Figure& f, const SkeletonSpec& sk, int size, std::vector<double>& canvas,
                 std::vector<std::uint8_t>* mask) {
  const double half_w = 0.5 * f.thickness;
  for (auto [a, b] : sk.edges)
    draw_segment(canvas, mask, size, f.xs[a], f.ys[a], f.xs[b], f.ys[b], half_w, f.intensity);
  for (int k = 0; k < 12; ++k)
    draw_disc(canvas, mask, size, f.xs[k], f.ys[k], half_w + 0.8,
              std::min(1.0, f.intensity * 1.25));
}

int count_occluded(const Figure& a, const std::vector<std::uint8_t>& mask_b, int size) {
  int occluded = 0;
  for (int k = 0; k < 12; ++k) {
    const int px = static_cast<int>(std::lround(a.xs[k]));
    const int py = static_cast<int>(std::lround(a.ys[k]));
    bool hit = false;
    for (int dy = -1; dy <= 1 && !hit; ++dy)
      for (int dx = -1; dx <= 1 && !hit; ++dx) {
        const int x = px + dx, y = py + dy;
        if (x >= 0 && x < size && y >= 0 && y < size &&
            mask_b[static_cast<std::size_t>(y) * size + x])
          hit = true;
      }
    occluded += hit ? 1 : 0;
  }
  return occluded;
}

BoundingBox figure_box(const Figure& f, int size, double pad) {
  BoundingBox b{f.xs[0], f.ys[0], f.xs[0], f.ys[0]};
  for (int k = 0; k < 12; ++k) {
    b.x1 = std::min(b.x1, f.xs[k]);
    b.y1 = std::min(b.y1, f.ys[k]);
    b.x2 = std::max(b.x2, f.xs[k]);
    b.y2 = std::max(b.y2, f.ys[k]);
  }
  b.x1 = std::max(0.0, b.x1 - pad);
  b.y1 = std::max(0.0, b.y1 - pad);
  b.x2 = std::min(static_cast<double>(size - 1), b.x2 + pad);
  b.y2 = std::min(static_cast<double>(size - 1), b.y2 + pad);
  return b;
}

}  // namespace

SynthResult synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  if (cfg.skeleton.num_joints != 12)
    throw ConfigError("synth: generator renders the bundled 12-joint skeleton");

  SynthResult out;
  out.dataset.skeleton = cfg.skeleton;
  out.dataset.root = "";

  const int size = cfg.image_size;
  long long labeled_total = 0, invisible_total = 0;
  int next_ann_id = 1;

  for (int idx = 0; idx < cfg.num_images; ++idx) {
    const int image_id = idx + 1;
    Rng rng(cfg.seed + static_cast<std::uint64_t>(image_id));

    // how many occluded joints this image should contribute to stay on target
    const double want_frac = cfg.occlusion_rate;
    const double needed =
        want_frac * (static_cast<double>(labeled_total) + 24.0) - static_cast<double>(invisible_total);
    const double desired_k = std::clamp(needed, 0.0, 12.0);

    Figure fig_a, best_b;
    std::vector<std::uint8_t> best_mask;
    int best_k = -1;
    bool found = false;
    const int kMaxAttempts = 120;

    for (int attempt = 0; attempt < kMaxAttempts && !found; ++attempt) {
      const double scale_a = cfg.image_size * rng.uniform(cfg.scale_min, cfg.scale_max);
      const double ax = size * rng.uniform(0.32, 0.58);
      const double ay = size * rng.uniform(0.18, 0.32);
      fig_a = sample_figure(rng, scale_a, ax, ay);
      fig_a.thickness = rng.uniform(cfg.thickness_min, cfg.thickness_max);
      if (!figure_in_bounds(fig_a, size, 2.0)) continue;
      quantize_figure(fig_a);

      best_k = -1;
      for (int battempt = 0; battempt < 40; ++battempt) {
        const double scale_b = cfg.image_size * rng.uniform(cfg.scale_min, cfg.scale_max);
        // offset shrinks as more occlusion is needed
        const double reach = 0.05 + 0.5 * (1.0 - desired_k / 12.0);
        const double r = scale_a * rng.uniform(0.02, reach);
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        Figure fb = sample_figure(rng, scale_b, ax + r * std::cos(phi), ay + r * std::sin(phi));
        fb.thickness = rng.uniform(cfg.thickness_min, cfg.thickness_max);
        if (!figure_in_bounds(fb, size, 2.0)) continue;
        quantize_figure(fb);
        if (iou(figure_box(fig_a, size, fb.thickness), figure_box(fb, size, fb.thickness)) < 0.05)
          continue;
        std::vector<double> scratch(static_cast<std::size_t>(size) * size, 0.0);
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(size) * size, 0);
        draw_figure(fb, cfg.skeleton, size, scratch, &mask);
        const int k = count_occluded(fig_a, mask, size);
        if (best_k < 0 || std::fabs(k - desired_k) < std::fabs(best_k - desired_k)) {
          best_k = k;
          best_b = fb;
          best_mask = std::move(mask);
        }
        if (best_k >= 0 && std::fabs(best_k - desired_k) <= 0.5) break;
      }
      found = best_k >= 0;
    }
    if (!found)
      throw ConfigError("synth: could not place a figure pair after bounded retries (image " +
                        std::to_string(image_id) + ")");

    // render: first figure below, second on top
    std::vector<double> canvas(static_cast<std::size_t>(size) * size, 0.0);
    draw_figure(fig_a, cfg.skeleton, size, canvas, nullptr);
    draw_figure(best_b, cfg.skeleton, size, canvas, nullptr);

    ImageU8 img;
    img.width = size;
    img.height = size;
    img.channels = 1;
    img.pixels.resize(canvas.size());
    for (std::size_t i = 0; i < canvas.size(); ++i) {
      const double noise = 0.05 + 0.02 * rng.normal();
      const double v = std::clamp(std::max(canvas[i], 0.0) + noise, 0.0, 1.0);
      img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }

    DatasetRecord rec;
    rec.image_id = image_id;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%06d.png", image_id);
    rec.file_name = buf;
    rec.width = size;
    rec.height = size;
    rec.pair_groups = {{0, 1}};

    auto to_instance = [&](const Figure& f, bool occludee) {
      Instance inst;
      inst.ann_id = next_ann_id++;
      inst.box = figure_box(f, size, f.thickness + 2.0);
      inst.area = inst.box.area();
      inst.gt.frame = Frame::kSourcePixels;
      inst.gt.joints.resize(12);
      for (int k = 0; k < 12; ++k) {
        GtJoint& gj = inst.gt.joints[k];
        gj.x = f.xs[k];
        gj.y = f.ys[k];
        gj.labeled = true;
        gj.visible = true;
        if (occludee) {
          const int px = static_cast<int>(std::lround(f.xs[k]));
          const int py = static_cast<int>(std::lround(f.ys[k]));
          bool hit = false;
          for (int dy = -1; dy <= 1 && !hit; ++dy)
            for (int dx = -1; dx <= 1 && !hit; ++dx) {
              const int x = px + dx, y = py + dy;
              if (x >= 0 && x < size && y >= 0 && y < size &&
                  best_mask[static_cast<std::size_t>(y) * size + x])
                hit = true;
            }
          gj.visible = !hit;
        }
      }
      return inst;
    };
    rec.instances.push_back(to_instance(fig_a, true));
    rec.instances.push_back(to_instance(best_b, false));

    labeled_total += 24;
    invisible_total += 12 - rec.instances[0].gt.visible_count();

    out.dataset.records.push_back(std::move(rec));
    out.images.push_back(std::move(img));
  }

  const double measured =
      static_cast<double>(invisible_total) / static_cast<double>(labeled_total);
  if (std::fabs(measured - cfg.occlusion_rate) > 0.10)
    throw ConfigError("synth: occlusion target " + std::to_string(cfg.occlusion_rate) +
                      " infeasible, measured " + std::to_string(measured));
  return out;
}

void synth_write(const SynthResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < result.dataset.records.size(); ++i)
    write_png(out_dir / result.dataset.records[i].file_name, result.images[i]);
  save_annotations(result.dataset, out_dir / "annotations.json");
}

}  // namespace posekit
