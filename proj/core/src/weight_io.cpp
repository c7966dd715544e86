#include "fedchan/weight_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "fedchan/errors.hpp"

namespace fedchan::io {

namespace {

template <typename T>
void write_le(std::ostream& out, T v) {
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw ParseError("unexpected end of weight data");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
    return v;
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }
std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }
double read_f64(std::istream& in) { return std::bit_cast<double>(read_le<std::uint64_t>(in)); }

void write_network(std::ostream& out, const nn::Network& network) {
    nn::check_shapes(network.weights, network.specs);
    out.write(kWeightMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(network.name.size()));
    out.write(network.name.data(), static_cast<std::streamsize>(network.name.size()));
    write_u32(out, static_cast<std::uint32_t>(network.specs.size()));
    for (const auto& s : network.specs) {
        write_u32(out, static_cast<std::uint32_t>(s.input_dim));
        write_u32(out, static_cast<std::uint32_t>(s.output_dim));
        out.put(static_cast<char>(s.activation));
    }
    const auto flat = nn::flatten(network.weights);
    write_u64(out, flat.size());
    for (double v : flat) write_f64(out, v);
    if (!out) throw ParseError("failed writing weight data");
}

nn::Network read_network(std::istream& in) {
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kWeightMagic, 4) != 0) throw ParseError("bad weight file magic (expected FCW1)");
    nn::Network net;
    const auto name_len = read_u32(in);
    if (name_len > 4096) throw ParseError("weight file name field too long");
    net.name.resize(name_len);
    in.read(net.name.data(), name_len);
    const auto layers = read_u32(in);
    if (layers == 0 || layers > 1024) throw ParseError("weight file declares " + std::to_string(layers) + " layers");
    for (std::uint32_t i = 0; i < layers; ++i) {
        nn::LayerSpec s;
        s.input_dim = read_u32(in);
        s.output_dim = read_u32(in);
        const int act = in.get();
        if (!in || act < 0 || act > static_cast<int>(nn::Activation::softmax))
            throw ParseError("layer " + std::to_string(i) + ": bad activation code");
        s.activation = static_cast<nn::Activation>(act);
        net.specs.push_back(s);
    }
    nn::validate(net.specs);
    const auto count = read_u64(in);
    if (count != nn::parameter_count(net.specs))
        throw ParseError("parameter count " + std::to_string(count) + " does not match layer specs (" +
                         std::to_string(nn::parameter_count(net.specs)) + ")");
    std::vector<double> flat(count);
    for (auto& v : flat) v = read_f64(in);
    net.weights = nn::unflatten(flat, net.specs);
    return net;
}

std::size_t network_header_bytes(const nn::Network& network) {
    return 4 + 4 + network.name.size() + 4 + 9 * network.specs.size() + 8;
}

void save_network(const std::filesystem::path& path, const nn::Network& network) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    write_network(out, network);
}

nn::Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    try {
        return read_network(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace fedchan::io
