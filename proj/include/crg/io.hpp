#pragma once

// Project file formats.
//
// Raster file:
//   "CRG1\n"
//   "<dtype> <channels> <height> <width>\n"     dtype in {u8, f32, f64}
//   height*width*channels little-endian values, row-major, channel-last
//
// Checkpoint file:
//   "CRGCKPT1\n"
//   "<tensor count>\n"
//   one "<name> <d0>x<d1>x... f64 <offset>\n" line per tensor, offsets in
//   bytes from the start of the payload
//   concatenated little-endian f64 payloads

#include <filesystem>
#include <iosfwd>
#include <string>

#include "crg/grid.hpp"
#include "crg/model.hpp"

namespace crg::io {

enum class DType { u8, f32, f64 };

std::string dtype_name(DType dtype);
DType parse_dtype(const std::string& name);
std::size_t dtype_size(DType dtype);

struct RasterFile {
    DType dtype = DType::f64;
    grid::Raster raster;  // values as stored, no rescaling
};

void write_raster(std::ostream& out, const grid::Raster& raster, DType dtype);
RasterFile read_raster(std::istream& in);

std::string encode_raster(const grid::Raster& raster, DType dtype);
RasterFile decode_raster(const std::string& bytes);

void save_raster(const std::filesystem::path& path, const grid::Raster& raster, DType dtype);
RasterFile load_raster(const std::filesystem::path& path);

// Image rasters: u8 files are rescaled to [0, 1], float files are read as is.
grid::Raster load_image(const std::filesystem::path& path);

// Label rasters: single-channel u8, 0 = unlabeled.
void save_labels(const std::filesystem::path& path, const grid::LabelMatrix& labels);
grid::LabelMatrix load_labels(const std::filesystem::path& path);
grid::LabelMatrix to_labels(const grid::Raster& raster);
grid::Raster from_labels(const grid::LabelMatrix& labels);

void write_checkpoint(std::ostream& out, const model::ModelParams& params);
model::ModelParams read_checkpoint(std::istream& in);

std::string encode_checkpoint(const model::ModelParams& params);
model::ModelParams decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const model::ModelParams& params);
model::ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace crg::io
