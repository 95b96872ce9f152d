#include "crg/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "crg/errors.hpp"

namespace crg::io {

namespace {

constexpr const char* kRasterMagic = "CRG1";
constexpr const char* kCheckpointMagic = "CRGCKPT1";

template <typename T>
void put_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(bytes), std::end(bytes));
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const char* src) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, src, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(bytes), std::end(bytes));
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

std::string read_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError(std::string("truncated file: missing ") + what);
    }
    return line;
}

std::string read_bytes(std::istream& in, std::size_t count, const char* what) {
    std::string buf(count, '\0');
    in.read(buf.data(), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) {
        throw FormatError(std::string("truncated payload in ") + what);
    }
    return buf;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw DataError("write failed for " + path.string());
    }
}

void expect_end(std::istream& in, const char* what) {
    if (in.peek() != std::char_traits<char>::eof()) {
        throw FormatError(std::string("trailing bytes after ") + what);
    }
}

}  // namespace

std::string dtype_name(DType dtype) {
    switch (dtype) {
        case DType::u8: return "u8";
        case DType::f32: return "f32";
        case DType::f64: return "f64";
    }
    return "?";
}

DType parse_dtype(const std::string& name) {
    if (name == "u8") return DType::u8;
    if (name == "f32") return DType::f32;
    if (name == "f64") return DType::f64;
    throw FormatError("unknown dtype '" + name + "'");
}

std::size_t dtype_size(DType dtype) {
    switch (dtype) {
        case DType::u8: return 1;
        case DType::f32: return 4;
        case DType::f64: return 8;
    }
    return 0;
}

void write_raster(std::ostream& out, const grid::Raster& raster, DType dtype) {
    out << kRasterMagic << '\n'
        << dtype_name(dtype) << ' ' << raster.channels() << ' ' << raster.height() << ' ' << raster.width() << '\n';
    for (double v : raster.data()) {
        switch (dtype) {
            case DType::u8: {
                if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v)) {
                    throw FormatError("value " + std::to_string(v) + " is not representable as u8");
                }
                put_le(out, static_cast<std::uint8_t>(v));
                break;
            }
            case DType::f32: put_le(out, static_cast<float>(v)); break;
            case DType::f64: put_le(out, v); break;
        }
    }
}

RasterFile read_raster(std::istream& in) {
    if (read_line(in, "magic") != kRasterMagic) {
        throw FormatError("not a raster file (bad magic)");
    }
    std::istringstream header(read_line(in, "header"));
    std::string dtype_str;
    long channels = -1, height = -1, width = -1;
    header >> dtype_str >> channels >> height >> width;
    std::string extra;
    if (!header || (header >> extra) || channels < 0 || height < 0 || width < 0) {
        throw FormatError("malformed raster header");
    }
    const DType dtype = parse_dtype(dtype_str);
    const std::size_t count = static_cast<std::size_t>(channels) * height * width;
    const std::string payload = read_bytes(in, count * dtype_size(dtype), "raster");
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        const char* p = payload.data() + i * dtype_size(dtype);
        switch (dtype) {
            case DType::u8: data[i] = static_cast<unsigned char>(*p); break;
            case DType::f32: data[i] = get_le<float>(p); break;
            case DType::f64: data[i] = get_le<double>(p); break;
        }
    }
    return {dtype, grid::Raster(static_cast<int>(height), static_cast<int>(width), static_cast<int>(channels),
                                std::move(data))};
}

std::string encode_raster(const grid::Raster& raster, DType dtype) {
    std::ostringstream out(std::ios::binary);
    write_raster(out, raster, dtype);
    return out.str();
}

RasterFile decode_raster(const std::string& bytes) {
    std::istringstream in(bytes, std::ios::binary);
    auto file = read_raster(in);
    expect_end(in, "raster payload");
    return file;
}

void save_raster(const std::filesystem::path& path, const grid::Raster& raster, DType dtype) {
    spit(path, encode_raster(raster, dtype));
}

RasterFile load_raster(const std::filesystem::path& path) {
    try {
        return decode_raster(slurp(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

grid::Raster load_image(const std::filesystem::path& path) {
    auto file = load_raster(path);
    if (file.dtype == DType::u8) {
        for (double& v : file.raster.data()) {
            v /= 255.0;
        }
    }
    return std::move(file.raster);
}

grid::LabelMatrix to_labels(const grid::Raster& raster) {
    if (raster.channels() != 1) {
        throw FormatError("label raster must have one channel, got " + std::to_string(raster.channels()));
    }
    std::vector<int> labels(raster.data().size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i] = static_cast<int>(raster.data()[i]);
    }
    return grid::LabelMatrix(raster.height(), raster.width(), std::move(labels));
}

grid::Raster from_labels(const grid::LabelMatrix& labels) {
    return grid::Raster(labels.height(), labels.width(), 1,
                        std::vector<double>(labels.labels().begin(), labels.labels().end()));
}

void save_labels(const std::filesystem::path& path, const grid::LabelMatrix& labels) {
    save_raster(path, from_labels(labels), DType::u8);
}

grid::LabelMatrix load_labels(const std::filesystem::path& path) {
    auto file = load_raster(path);
    if (file.dtype != DType::u8) {
        throw FormatError(path.string() + ": label files must be u8");
    }
    return to_labels(file.raster);
}

void write_checkpoint(std::ostream& out, const model::ModelParams& params) {
    const auto tensors = params.tensors();
    const auto names = params.tensor_names();
    out << kCheckpointMagic << '\n' << tensors.size() << '\n';
    std::size_t offset = 0;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        std::string dims;
        for (std::size_t d = 0; d < tensors[t]->shape.size(); ++d) {
            dims += (d ? "x" : "") + std::to_string(tensors[t]->shape[d]);
        }
        out << names[t] << ' ' << dims << " f64 " << offset << '\n';
        offset += tensors[t]->size() * sizeof(double);
    }
    for (const auto* tensor : tensors) {
        for (double v : tensor->values) {
            put_le(out, v);
        }
    }
}

model::ModelParams read_checkpoint(std::istream& in) {
    if (read_line(in, "magic") != kCheckpointMagic) {
        throw FormatError("not a checkpoint file (bad magic)");
    }
    std::size_t count = 0;
    {
        std::istringstream line(read_line(in, "tensor count"));
        if (!(line >> count) || count == 0 || count > 4096) {
            throw FormatError("malformed tensor count");
        }
    }
    struct Entry {
        std::string name;
        ad::Shape shape;
        std::size_t offset;
    };
    std::vector<Entry> entries;
    std::size_t expected_offset = 0;
    for (std::size_t t = 0; t < count; ++t) {
        std::istringstream line(read_line(in, "manifest line"));
        Entry e;
        std::string dims, dtype;
        if (!(line >> e.name >> dims >> dtype >> e.offset) || dtype != "f64") {
            throw FormatError("malformed manifest line " + std::to_string(t + 1));
        }
        std::istringstream dim_stream(dims);
        std::string part;
        while (std::getline(dim_stream, part, 'x')) {
            try {
                e.shape.push_back(static_cast<std::size_t>(std::stoul(part)));
            } catch (const std::exception&) {
                throw FormatError("bad shape '" + dims + "' in manifest");
            }
        }
        // Payloads are packed in manifest order; any gap or overlap is corrupt.
        if (e.offset != expected_offset) {
            throw FormatError("tensor '" + e.name + "' has offset " + std::to_string(e.offset) + ", expected " +
                              std::to_string(expected_offset));
        }
        expected_offset += ad::shape_size(e.shape) * sizeof(double);
        entries.push_back(std::move(e));
    }
    const std::string payload = read_bytes(in, expected_offset, "checkpoint");
    std::vector<ad::Tensor> tensors;
    for (const auto& e : entries) {
        ad::Tensor t(e.shape);
        for (std::size_t i = 0; i < t.size(); ++i) {
            t.values[i] = get_le<double>(payload.data() + e.offset + i * sizeof(double));
        }
        tensors.push_back(std::move(t));
    }
    auto params = model::from_tensors(std::move(tensors));
    const auto names = params.tensor_names();
    for (std::size_t t = 0; t < entries.size(); ++t) {
        if (entries[t].name != names[t]) {
            throw FormatError("unexpected tensor name '" + entries[t].name + "', expected '" + names[t] + "'");
        }
    }
    return params;
}

std::string encode_checkpoint(const model::ModelParams& params) {
    std::ostringstream out(std::ios::binary);
    write_checkpoint(out, params);
    return out.str();
}

model::ModelParams decode_checkpoint(const std::string& bytes) {
    std::istringstream in(bytes, std::ios::binary);
    auto params = read_checkpoint(in);
    expect_end(in, "checkpoint payload");
    return params;
}

void save_checkpoint(const std::filesystem::path& path, const model::ModelParams& params) {
    spit(path, encode_checkpoint(params));
}

model::ModelParams load_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(slurp(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace crg::io
