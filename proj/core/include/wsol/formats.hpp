#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "wsol/boxes.hpp"
#include "wsol/metrics.hpp"

namespace wsol {

// Score map file ("WSM1"): 4-byte magic, u32 LE height, u32 LE width, then
// height*width IEEE-754 float32 LE values in row-major order.

std::vector<std::uint8_t> encode_score_map(const Tensor& map);
/// Throws FormatError on bad magic, truncation or trailing bytes.
Tensor decode_score_map(const std::vector<std::uint8_t>& bytes);

void write_score_map(const std::filesystem::path& path, const Tensor& map);
Tensor read_score_map(const std::filesystem::path& path);

/// Every "*.wsm" file in `dir`, image id = file stem, sorted by id.
std::vector<ScoreMap> read_score_map_dir(const std::filesystem::path& dir);

// Ground-truth boxes: UTF-8 lines "image_id,x0,y0,x1,y1"; several lines per
// image allowed; lines starting with '#' and blank lines are skipped.

BoxSets parse_gt_boxes(std::istream& in);
BoxSets read_gt_boxes(const std::filesystem::path& path);
void write_gt_boxes(const std::filesystem::path& path, const BoxSets& boxes);

/// key=value report: n_samples, maxboxacc@<delta>, best_tau@<delta>, maxboxaccv2.
std::string format_report(const MaxBoxAccV2& result);

/// Binary PGM (P5, maxval 255) of the min-max-normalized map.
std::vector<std::uint8_t> encode_pgm(const Tensor& map);
void write_pgm(const std::filesystem::path& path, const Tensor& map);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace wsol
