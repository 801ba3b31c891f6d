#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "pcnn/net.hpp"

namespace pcnn {

// Model file layout (".pcnn", all little-endian):
//   magic "PCNN" (4 bytes)
//   u32 format version
//   u32 input_h, input_w, input_c, num_classes, block count
//   per block: u32 filters, u32 pool flag
//   per block: f32 blobs conv_w, conv_b, bn_gamma, bn_beta, bn_mean, bn_var
//   f32 blobs fc_w, fc_b
//   u32 CRC32 over all preceding bytes

inline constexpr std::uint32_t kModelFormatVersion = 1;

class ModelFileError : public std::runtime_error {
public:
    enum class Kind { bad_magic, unsupported_version, bad_header, truncated, crc_mismatch, io };
    Kind kind;
    ModelFileError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

void save_model(const Model& model, const std::filesystem::path& path);

/// Reconstructs the model in infer mode. Throws ModelFileError with a distinct
/// kind for bad magic, unsupported version, truncation, and CRC mismatch.
Model load_model(const std::filesystem::path& path);

} // namespace pcnn
