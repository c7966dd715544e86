#include "fedchan/exchange.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "fedchan/errors.hpp"
#include "fedchan/weight_io.hpp"

namespace fedchan::fed {

void write_payload(std::ostream& out, const Payload& payload) {
    out.write(kPayloadMagic, 4);
    io::write_u64(out, payload.round);
    io::write_u32(out, static_cast<std::uint32_t>(payload.client_id.size()));
    out.write(payload.client_id.data(), static_cast<std::streamsize>(payload.client_id.size()));
    io::write_u64(out, payload.sample_count);
    io::write_u32(out, static_cast<std::uint32_t>(payload.networks.size()));
    for (const auto& net : payload.networks) io::write_network(out, net);
    if (!out) throw ProtocolError("failed writing payload");
}

Payload read_payload(std::istream& in, const PayloadExpectation& expect) {
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kPayloadMagic, 4) != 0) throw ProtocolError("bad payload magic (expected FCX1)");
    Payload p;
    try {
        p.round = io::read_u64(in);
        if (p.round != expect.round)
            throw ProtocolError("payload is for round " + std::to_string(p.round) + ", expected round " +
                                std::to_string(expect.round));
        const auto id_len = io::read_u32(in);
        if (id_len > 4096) throw ProtocolError("payload client id too long");
        p.client_id.resize(id_len);
        in.read(p.client_id.data(), id_len);
        if (p.client_id != expect.client_id)
            throw ProtocolError("payload from client '" + p.client_id + "', expected '" + expect.client_id + "'");
        p.sample_count = io::read_u64(in);
        const auto count = io::read_u32(in);
        if (count != expect.specs.size())
            throw ProtocolError("payload carries " + std::to_string(count) + " networks, expected " +
                                std::to_string(expect.specs.size()));
        for (std::uint32_t i = 0; i < count; ++i) {
            auto net = io::read_network(in);
            if (net.specs != expect.specs[i])
                throw ProtocolError("network " + std::to_string(i) + " ('" + net.name +
                                    "') has unexpected layer shapes");
            p.networks.push_back(std::move(net));
        }
    } catch (const ParseError& e) {
        throw ProtocolError(std::string("malformed payload: ") + e.what());
    }
    return p;
}

std::size_t payload_header_bytes(const Payload& payload) {
    std::size_t n = 4 + 8 + 4 + payload.client_id.size() + 8 + 4;
    for (const auto& net : payload.networks) n += io::network_header_bytes(net);
    return n;
}

std::size_t payload_bytes(const Payload& payload) {
    std::size_t params = 0;
    for (const auto& net : payload.networks) params += net.weights.parameter_count();
    return payload_header_bytes(payload) + 8 * params;
}

ExchangeDirectory::ExchangeDirectory(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

std::filesystem::path ExchangeDirectory::round_dir(std::uint64_t round) const {
    return root_ / ("round_" + std::to_string(round));
}

std::filesystem::path ExchangeDirectory::client_path(std::uint64_t round, const std::string& client_id) const {
    return round_dir(round) / ("client_" + client_id + ".fcw");
}

std::filesystem::path ExchangeDirectory::global_path(std::uint64_t round) const {
    return round_dir(round) / "global.fcw";
}

void ExchangeDirectory::write(const Payload& payload) const {
    std::filesystem::create_directories(round_dir(payload.round));
    const auto path = payload.client_id == kGlobalId ? global_path(payload.round)
                                                     : client_path(payload.round, payload.client_id);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ProtocolError("cannot open " + path.string() + " for writing");
    write_payload(out, payload);
}

Payload ExchangeDirectory::read(const PayloadExpectation& expect) const {
    const auto path = expect.client_id == kGlobalId ? global_path(expect.round)
                                                    : client_path(expect.round, expect.client_id);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ProtocolError("missing payload " + path.string());
    return read_payload(in, expect);
}

}  // namespace fedchan::fed
