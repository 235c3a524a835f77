#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "udic/sha256.hpp"
#include "udic/tensor.hpp"

namespace udic::io {

enum class IoErrorCode {
    io_failure,
    bad_magic,
    truncated,
    dtype_mismatch,
    format_error,
    bad_index,
    fingerprint_mismatch,
};

class IoError : public std::runtime_error {
public:
    IoError(IoErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    IoErrorCode code() const { return code_; }

private:
    IoErrorCode code_;
};

enum class Dtype : std::uint8_t { f32 = 1, f64 = 2, u16 = 3 };

/// Tensor of any supported payload type, as read from disk.
struct AnyTensor {
    Dtype dtype = Dtype::f64;
    std::vector<std::size_t> shape;
    std::vector<double> f64;
    std::vector<float> f32;
    std::vector<std::uint16_t> u16;

    std::size_t element_count() const { return Tensor::element_count(shape); }
};

// Tensor file: magic "UDT1", dtype u8, ndim u8, dims as ndim x u64 LE,
// row-major little-endian payload.

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
std::vector<std::uint8_t> encode_tensor_f32(const std::vector<std::size_t>& shape,
                                            const std::vector<float>& data);
std::vector<std::uint8_t> encode_tensor_u16(const std::vector<std::size_t>& shape,
                                            const std::vector<std::uint16_t>& data);
AnyTensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
void write_tensor_u16(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
                      const std::vector<std::uint16_t>& data);
Tensor read_tensor(const std::filesystem::path& path);  // requires f64 payload
AnyTensor read_tensor_any(const std::filesystem::path& path);

// Container: magic "UDC1", u64 manifest length + UTF-8 JSON manifest,
// u32 entry count, then per entry u16 name length, name bytes, u64 blob
// length and an embedded tensor-file blob.

struct Container {
    nlohmann::json manifest;
    std::vector<std::pair<std::string, AnyTensor>> tensors;

    const AnyTensor& tensor(const std::string& name) const;
};

std::vector<std::uint8_t> encode_container(const Container& c);
Container decode_container(const std::vector<std::uint8_t>& bytes);
void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

// Compressed stream: magic "UVQ1", code dims n1,n2,n3 as u32, codebook size
// L as u32, 32-byte model fingerprint, row-major u16 indices.

struct CompressedStream {
    std::array<std::size_t, 3> code_shape{0, 0, 0};
    std::uint32_t codebook_size = 0;
    Sha256Digest fingerprint{};
    std::vector<std::uint16_t> indices;
};

std::vector<std::uint8_t> encode_stream(const CompressedStream& s);
CompressedStream decode_stream(const std::vector<std::uint8_t>& bytes);
void write_stream(const std::filesystem::path& path, const CompressedStream& s);
CompressedStream read_stream(const std::filesystem::path& path);

/// 8-bit binary PGM preview; values min/max normalized, rows along n_z.
void write_pgm(const std::filesystem::path& path, const Tensor& image);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Write-then-rename so readers never observe partial files.
void atomic_write_file(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes);
void atomic_write_text(const std::filesystem::path& path, const std::string& text);

Sha256Digest file_fingerprint(const std::filesystem::path& path);

}  // namespace udic::io
