#pragma once

// Parameter payloads exchanged between the server and city clients.
//
//   "FCX1" | u64 round | u32 id_len | client id | u64 n_k | u32 networks
//          | FCW1 weight block * networks
//
// On disk: <root>/round_<t>/client_<id>.fcw and <root>/round_<t>/global.fcw.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedchan/nn.hpp"

namespace fedchan::fed {

inline constexpr char kPayloadMagic[4] = {'F', 'C', 'X', '1'};
inline constexpr const char* kGlobalId = "global";

struct Payload {
    std::uint64_t round = 0;
    std::string client_id;
    std::uint64_t sample_count = 0;  // n_k; the total n for the global payload
    std::vector<nn::Network> networks;
};

/// What a reader expects; the payload is rejected unless it matches.
struct PayloadExpectation {
    std::uint64_t round = 0;
    std::string client_id;
    std::vector<nn::LayerSpecs> specs;  // one per network, in order
};

void write_payload(std::ostream& out, const Payload& payload);
/// Throws ProtocolError on a magic, round, client or shape mismatch.
Payload read_payload(std::istream& in, const PayloadExpectation& expect);

/// Payload size excluding the 8-byte parameter values.
std::size_t payload_header_bytes(const Payload& payload);
std::size_t payload_bytes(const Payload& payload);

class ExchangeDirectory {
public:
    explicit ExchangeDirectory(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path round_dir(std::uint64_t round) const;
    std::filesystem::path client_path(std::uint64_t round, const std::string& client_id) const;
    std::filesystem::path global_path(std::uint64_t round) const;

    void write(const Payload& payload) const;
    Payload read(const PayloadExpectation& expect) const;

private:
    std::filesystem::path root_;
};

}  // namespace fedchan::fed
