#pragma once

// Binary weight files ("FCW1"): magic, model name, layer spec list, then the
// flattened parameters as 64-bit little-endian IEEE doubles.
//
//   "FCW1" | u32 name_len | name | u32 layers | {u32 in, u32 out, u8 act}*
//          | u64 param_count | f64 * param_count

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "fedchan/nn.hpp"

namespace fedchan::io {

inline constexpr char kWeightMagic[4] = {'F', 'C', 'W', '1'};

void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);

void write_network(std::ostream& out, const nn::Network& network);
nn::Network read_network(std::istream& in);

/// Bytes preceding the parameter block for `network`.
std::size_t network_header_bytes(const nn::Network& network);

void save_network(const std::filesystem::path& path, const nn::Network& network);
nn::Network load_network(const std::filesystem::path& path);

}  // namespace fedchan::io
