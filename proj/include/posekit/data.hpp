#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "posekit/geometry.hpp"
#include "posekit/image.hpp"
#include "posekit/skeleton.hpp"

namespace posekit {

struct Instance {
  int ann_id = 0;
  BoundingBox box;     // source-image coordinates
  GroundTruthPose gt;  // source-image coordinates
  double area = 0;     // object scale for OKS; defaults to the box area
};

struct DatasetRecord {
  int image_id = 0;
  std::string file_name;
  int width = 0, height = 0;
  std::vector<Instance> instances;
  std::vector<std::pair<int, int>> pair_groups;  // indices into instances
};

struct Dataset {
  std::filesystem::path root;  // directory the image files live in
  SkeletonSpec skeleton;
  std::vector<DatasetRecord> records;

  int total_instances() const {
    int n = 0;
    for (const auto& r : records) n += static_cast<int>(r.instances.size());
    return n;
  }
};

// Annotation schema: COCO-keypoints-style JSON. Keypoints are (x, y, v)
// triples with v = 0 labeled-but-invisible, v = 1 visible, v = 2 unlabeled;
// bbox is [x, y, w, h]. Images may carry a "pairs" array grouping
// interacting instances by their index among that image's annotations.
// Loading sorts by id, so load -> save -> load is a fixed point.
Dataset load_dataset(const std::filesystem::path& annotations_or_dir,
                     double bounds_margin_frac = 0.15);
void save_annotations(const Dataset& dataset, const std::filesystem::path& json_path);

ImageF load_record_image(const Dataset& dataset, const DatasetRecord& record, int channels);

struct Crop {
  ImageF pixels;          // channels x size x size
  BoundingBox box;        // the instance box that was requested
  BoundingBox expanded;   // box actually cropped (margin applied)
  AffineXf to_crop;       // source coords -> crop coords (box corners -> crop corners)
  int image_id = 0;
};

// Expands the box by margin_frac, then resamples it to a square
// target_size crop with bilinear interpolation (border clamped).
Crop crop_instance(const ImageF& image, const BoundingBox& box, int target_size,
                   double margin_frac = 0.15);

// Synthetic two-person occlusion benchmark: each image holds a couple of
// stick figures with randomized, limb-length-consistent poses; the second
// figure is drawn over the first and any first-figure joint it covers is
// labeled invisible. Occlusion ground truth is exact by construction.
struct SynthConfig {
  int num_images = 200;
  int image_size = 128;
  double occlusion_rate = 0.25;  // target invisible fraction over all labeled joints
  double scale_min = 0.34;       // body scale as a fraction of image_size
  double scale_max = 0.50;
  double thickness_min = 2.0;
  double thickness_max = 3.2;
  std::uint64_t seed = 1;
  SkeletonSpec skeleton = SkeletonSpec::ocpose12();

  // Every rendered limb length falls inside these bounds.
  double limb_min_px() const { return 0.20 * scale_min * image_size; }
  double limb_max_px() const { return 0.70 * scale_max * image_size; }
  void validate() const;
};

struct SynthResult {
  Dataset dataset;
  std::vector<ImageU8> images;  // aligned with dataset.records
};

SynthResult synth_generate(const SynthConfig& cfg);
// Writes images plus annotations.json into out_dir.
void synth_write(const SynthResult& result, const std::filesystem::path& out_dir);

}  // namespace posekit
