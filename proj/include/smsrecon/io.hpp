#ifndef SMSRECON_IO_HPP
#define SMSRECON_IO_HPP

// On-disk array interchange format.
//
// Each array NAME is a pair of files:
//   NAME.json  header {"dtype":"complex64"|"float32","shape":[...],
//                      "order":"row-major","byte_order":"little"}
//   NAME.bin   raw 32-bit IEEE floats, row-major, little endian;
//              complex64 stores interleaved (real, imaginary) pairs.
//
// Values are truncated to single precision at write time; reading returns
// doubles holding exactly the stored float32 values, so write -> read -> write
// reproduces the bytes.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smsrecon/errors.hpp"
#include "smsrecon/tensor.hpp"

namespace smsrecon {

static_assert(std::endian::native == std::endian::little,
              "array interchange I/O assumes a little-endian host");

struct ArrayHeader {
    std::string dtype; // "complex64" or "float32"
    Shape shape;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw IoError("read failed: " + path.string());
    return text;
}

namespace detail {

inline void write_array_files(const std::filesystem::path& base, const std::string& dtype,
                              const Shape& shape, const std::vector<float>& payload) {
    nlohmann::json hdr;
    hdr["dtype"] = dtype;
    hdr["shape"] = shape;
    hdr["order"] = "row-major";
    hdr["byte_order"] = "little";
    write_text_file(base.string() + ".json", hdr.dump(2) + "\n");

    std::ofstream f(base.string() + ".bin", std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + base.string() + ".bin");
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!f) throw IoError("write failed: " + base.string() + ".bin");
}

inline ArrayHeader parse_header(const std::filesystem::path& base) {
    const std::string text = read_text_file(base.string() + ".json");
    nlohmann::json hdr;
    try {
        hdr = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed array header " + base.string() + ".json: " + e.what());
    }
    ArrayHeader out;
    try {
        out.dtype = hdr.at("dtype").get<std::string>();
        out.shape = hdr.at("shape").get<Shape>();
        if (hdr.at("order").get<std::string>() != "row-major")
            throw IoError("unsupported order in " + base.string() + ".json");
        if (hdr.at("byte_order").get<std::string>() != "little")
            throw IoError("unsupported byte order in " + base.string() + ".json");
    } catch (const nlohmann::json::exception& e) {
        throw IoError("invalid array header " + base.string() + ".json: " + e.what());
    }
    if (out.dtype != "complex64" && out.dtype != "float32")
        throw IoError("unsupported dtype '" + out.dtype + "' in " + base.string() + ".json");
    if (out.shape.empty()) throw IoError("empty shape in " + base.string() + ".json");
    return out;
}

inline std::vector<float> read_payload(const std::filesystem::path& base,
                                       std::size_t expected_floats) {
    std::ifstream f(base.string() + ".bin", std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open: " + base.string() + ".bin");
    const auto bytes = static_cast<std::size_t>(f.tellg());
    if (bytes != expected_floats * sizeof(float))
        throw IoError(base.string() + ".bin: size " + std::to_string(bytes) +
                      " does not match header (expected " +
                      std::to_string(expected_floats * sizeof(float)) + " bytes)");
    std::vector<float> payload(expected_floats);
    f.seekg(0);
    f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw IoError("read failed: " + base.string() + ".bin");
    return payload;
}

} // namespace detail

inline void write_array(const std::filesystem::path& base, const ComplexArray& a) {
    std::vector<float> payload(2 * a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        payload[2 * i] = static_cast<float>(a[i].real());
        payload[2 * i + 1] = static_cast<float>(a[i].imag());
    }
    detail::write_array_files(base, "complex64", a.shape(), payload);
}

inline void write_array(const std::filesystem::path& base, const RealArray& a) {
    std::vector<float> payload(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) payload[i] = static_cast<float>(a[i]);
    detail::write_array_files(base, "float32", a.shape(), payload);
}

inline ArrayHeader read_array_header(const std::filesystem::path& base) {
    return detail::parse_header(base);
}

inline ComplexArray read_complex_array(const std::filesystem::path& base) {
    const ArrayHeader hdr = detail::parse_header(base);
    if (hdr.dtype != "complex64")
        throw IoError(base.string() + ": expected complex64, found " + hdr.dtype);
    ComplexArray a(hdr.shape);
    const auto payload = detail::read_payload(base, 2 * a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        a[i] = cxd(static_cast<double>(payload[2 * i]), static_cast<double>(payload[2 * i + 1]));
    return a;
}

inline RealArray read_real_array(const std::filesystem::path& base) {
    const ArrayHeader hdr = detail::parse_header(base);
    if (hdr.dtype != "float32")
        throw IoError(base.string() + ": expected float32, found " + hdr.dtype);
    RealArray a(hdr.shape);
    const auto payload = detail::read_payload(base, a.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<double>(payload[i]);
    return a;
}

} // namespace smsrecon

#endif
