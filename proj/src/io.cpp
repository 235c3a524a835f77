#include "udic/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace udic::io {

namespace {

constexpr char kTensorMagic[4] = {'U', 'D', 'T', '1'};
constexpr char kContainerMagic[4] = {'U', 'D', 'C', '1'};
constexpr char kStreamMagic[4] = {'U', 'V', 'Q', '1'};

class Writer {
public:
    std::vector<std::uint8_t> bytes;

    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
    void magic(const char m[4]) { raw(m, 4); }
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& bytes, std::string context)
        : bytes_(bytes), context_(std::move(context)) {}

    void expect_magic(const char m[4], IoErrorCode mismatch_code = IoErrorCode::bad_magic) {
        if (bytes_.size() - pos_ < 4)
            throw IoError(IoErrorCode::truncated, context_ + ": truncated before magic");
        if (std::memcmp(bytes_.data() + pos_, m, 4) != 0)
            throw IoError(mismatch_code, context_ + ": bad magic");
        pos_ += 4;
    }
    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() {
        const std::uint8_t* p = take(2);
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }
    std::uint32_t u32() {
        const std::uint8_t* p = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
        return v;
    }
    std::uint64_t u64() {
        const std::uint8_t* p = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    float f32() { return std::bit_cast<float>(u32()); }
    const std::uint8_t* take(std::size_t n) {
        if (bytes_.size() - pos_ < n)
            throw IoError(IoErrorCode::truncated, context_ + ": truncated payload");
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    void expect_end() {
        if (remaining() != 0)
            throw IoError(IoErrorCode::format_error, context_ + ": trailing bytes");
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
    std::string context_;
};

void encode_header(Writer& w, Dtype dtype, const std::vector<std::size_t>& shape) {
    w.magic(kTensorMagic);
    w.u8(static_cast<std::uint8_t>(dtype));
    if (shape.size() > 255)
        throw IoError(IoErrorCode::format_error, "tensor: rank exceeds format limit");
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (std::size_t d : shape) w.u64(d);
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
    Writer w;
    encode_header(w, Dtype::f64, t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) w.f64(t[i]);
    return std::move(w.bytes);
}

std::vector<std::uint8_t> encode_tensor_f32(const std::vector<std::size_t>& shape,
                                            const std::vector<float>& data) {
    if (data.size() != Tensor::element_count(shape))
        throw IoError(IoErrorCode::format_error, "tensor: payload does not match shape");
    Writer w;
    encode_header(w, Dtype::f32, shape);
    for (float v : data) w.f32(v);
    return std::move(w.bytes);
}

std::vector<std::uint8_t> encode_tensor_u16(const std::vector<std::size_t>& shape,
                                            const std::vector<std::uint16_t>& data) {
    if (data.size() != Tensor::element_count(shape))
        throw IoError(IoErrorCode::format_error, "tensor: payload does not match shape");
    Writer w;
    encode_header(w, Dtype::u16, shape);
    for (std::uint16_t v : data) w.u16(v);
    return std::move(w.bytes);
}

AnyTensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes, "tensor");
    r.expect_magic(kTensorMagic);
    const std::uint8_t dtype_code = r.u8();
    if (dtype_code < 1 || dtype_code > 3)
        throw IoError(IoErrorCode::format_error, "tensor: unknown dtype code");
    AnyTensor t;
    t.dtype = static_cast<Dtype>(dtype_code);
    const std::uint8_t ndim = r.u8();
    t.shape.resize(ndim);
    for (std::uint8_t i = 0; i < ndim; ++i)
        t.shape[i] = static_cast<std::size_t>(r.u64());
    const std::size_t n = t.element_count();
    switch (t.dtype) {
        case Dtype::f64:
            t.f64.resize(n);
            for (std::size_t i = 0; i < n; ++i) t.f64[i] = r.f64();
            break;
        case Dtype::f32:
            t.f32.resize(n);
            for (std::size_t i = 0; i < n; ++i) t.f32[i] = r.f32();
            break;
        case Dtype::u16:
            t.u16.resize(n);
            for (std::size_t i = 0; i < n; ++i) t.u16[i] = r.u16();
            break;
    }
    r.expect_end();
    return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    atomic_write_file(path, encode_tensor(t));
}

void write_tensor_u16(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
                      const std::vector<std::uint16_t>& data) {
    atomic_write_file(path, encode_tensor_u16(shape, data));
}

Tensor read_tensor(const std::filesystem::path& path) {
    AnyTensor t = decode_tensor(read_file(path));
    if (t.dtype != Dtype::f64)
        throw IoError(IoErrorCode::dtype_mismatch,
                      path.string() + ": expected f64 tensor payload");
    return Tensor(t.shape, std::move(t.f64));
}

AnyTensor read_tensor_any(const std::filesystem::path& path) {
    return decode_tensor(read_file(path));
}

const AnyTensor& Container::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw IoError(IoErrorCode::format_error, "container: missing tensor entry " + name);
}

std::vector<std::uint8_t> encode_container(const Container& c) {
    Writer w;
    w.magic(kContainerMagic);
    const std::string manifest = c.manifest.dump();
    w.u64(manifest.size());
    w.raw(manifest.data(), manifest.size());
    w.u32(static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, tensor] : c.tensors) {
        if (name.size() > 0xffff)
            throw IoError(IoErrorCode::format_error, "container: entry name too long");
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.raw(name.data(), name.size());
        std::vector<std::uint8_t> blob;
        switch (tensor.dtype) {
            case Dtype::f64:
                blob = encode_tensor(Tensor(tensor.shape, tensor.f64));
                break;
            case Dtype::f32:
                blob = encode_tensor_f32(tensor.shape, tensor.f32);
                break;
            case Dtype::u16:
                blob = encode_tensor_u16(tensor.shape, tensor.u16);
                break;
        }
        w.u64(blob.size());
        w.raw(blob.data(), blob.size());
    }
    return std::move(w.bytes);
}

Container decode_container(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes, "container");
    r.expect_magic(kContainerMagic);
    Container c;
    const std::uint64_t manifest_len = r.u64();
    const std::uint8_t* mp = r.take(manifest_len);
    try {
        c.manifest = nlohmann::json::parse(mp, mp + manifest_len);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(IoErrorCode::format_error,
                      std::string("container: bad manifest JSON: ") + e.what());
    }
    const std::uint32_t n_entries = r.u32();
    for (std::uint32_t i = 0; i < n_entries; ++i) {
        const std::uint16_t name_len = r.u16();
        const std::uint8_t* np = r.take(name_len);
        std::string name(reinterpret_cast<const char*>(np), name_len);
        const std::uint64_t blob_len = r.u64();
        const std::uint8_t* bp = r.take(blob_len);
        std::vector<std::uint8_t> blob(bp, bp + blob_len);
        c.tensors.emplace_back(std::move(name), decode_tensor(blob));
    }
    r.expect_end();
    return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
    atomic_write_file(path, encode_container(c));
}

Container read_container(const std::filesystem::path& path) {
    return decode_container(read_file(path));
}

std::vector<std::uint8_t> encode_stream(const CompressedStream& s) {
    const std::size_t n = s.code_shape[0] * s.code_shape[1] * s.code_shape[2];
    if (s.indices.size() != n)
        throw IoError(IoErrorCode::format_error, "stream: index count does not match shape");
    for (std::uint16_t idx : s.indices)
        if (idx >= s.codebook_size)
            throw IoError(IoErrorCode::bad_index, "stream: index out of codebook range");
    Writer w;
    w.magic(kStreamMagic);
    for (std::size_t d : s.code_shape) w.u32(static_cast<std::uint32_t>(d));
    w.u32(s.codebook_size);
    w.raw(s.fingerprint.data(), s.fingerprint.size());
    for (std::uint16_t idx : s.indices) w.u16(idx);
    return std::move(w.bytes);
}

CompressedStream decode_stream(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes, "stream");
    r.expect_magic(kStreamMagic);
    CompressedStream s;
    for (std::size_t a = 0; a < 3; ++a) s.code_shape[a] = r.u32();
    s.codebook_size = r.u32();
    const std::uint8_t* fp = r.take(s.fingerprint.size());
    std::copy(fp, fp + s.fingerprint.size(), s.fingerprint.begin());
    const std::size_t n = s.code_shape[0] * s.code_shape[1] * s.code_shape[2];
    s.indices.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.indices[i] = r.u16();
        if (s.indices[i] >= s.codebook_size)
            throw IoError(IoErrorCode::bad_index, "stream: index out of codebook range");
    }
    r.expect_end();
    return s;
}

void write_stream(const std::filesystem::path& path, const CompressedStream& s) {
    atomic_write_file(path, encode_stream(s));
}

CompressedStream read_stream(const std::filesystem::path& path) {
    return decode_stream(read_file(path));
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
    if (image.rank() != 2)
        throw IoError(IoErrorCode::format_error, "pgm: image must be 2D");
    double lo = image[0], hi = image[0];
    for (std::size_t i = 0; i < image.size(); ++i) {
        lo = std::min(lo, image[i]);
        hi = std::max(hi, image[i]);
    }
    const double span = hi - lo;
    const std::size_t n_x = image.dim(0), n_z = image.dim(1);

    std::string header = "P5\n" + std::to_string(n_x) + " " + std::to_string(n_z) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.reserve(bytes.size() + image.size());
    // Rows along n_z so depth runs down the image.
    for (std::size_t iz = 0; iz < n_z; ++iz)
        for (std::size_t ix = 0; ix < n_x; ++ix) {
            const double v = image.at(ix, iz);
            const double g = span > 0.0 ? (v - lo) / span : 0.0;
            bytes.push_back(static_cast<std::uint8_t>(std::lround(g * 255.0)));
        }
    atomic_write_file(path, bytes);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(IoErrorCode::io_failure, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError(IoErrorCode::io_failure, "read failed for " + path.string());
    return bytes;
}

void atomic_write_file(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError(IoErrorCode::io_failure, "cannot open " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw IoError(IoErrorCode::io_failure, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
    atomic_write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Sha256Digest file_fingerprint(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    return sha256(bytes.data(), bytes.size());
}

}  // namespace udic::io
