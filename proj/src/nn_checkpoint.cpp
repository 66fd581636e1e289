#include "amorgs/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace amorgs::nn {

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    throw std::invalid_argument("base64: invalid character");
}

std::vector<unsigned char> to_le_bytes(const std::vector<double>& values) {
    std::vector<unsigned char> bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &values[i], 8);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    return bytes;
}
}  // namespace

std::string base64_encode_doubles(const std::vector<double>& values) {
    const auto bytes = to_le_bytes(values);
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        unsigned int chunk = bytes[i] << 16;
        const std::size_t rem = bytes.size() - i;
        if (rem > 1) chunk |= bytes[i + 1] << 8;
        if (rem > 2) chunk |= bytes[i + 2];
        out.push_back(kAlphabet[(chunk >> 18) & 63]);
        out.push_back(kAlphabet[(chunk >> 12) & 63]);
        out.push_back(rem > 1 ? kAlphabet[(chunk >> 6) & 63] : '=');
        out.push_back(rem > 2 ? kAlphabet[chunk & 63] : '=');
    }
    return out;
}

std::vector<double> base64_decode_doubles(const std::string& text) {
    if (text.size() % 4 != 0) throw std::invalid_argument("base64: truncated input");
    std::vector<unsigned char> bytes;
    bytes.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4] = {0, 0, 0, 0};
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            if (text[i + k] == '=') {
                ++pad;
            } else {
                vals[k] = decode_char(text[i + k]);
            }
        }
        const unsigned int chunk = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        bytes.push_back((chunk >> 16) & 0xFF);
        if (pad < 2) bytes.push_back((chunk >> 8) & 0xFF);
        if (pad < 1) bytes.push_back(chunk & 0xFF);
    }
    if (bytes.size() % 8 != 0) throw std::invalid_argument("base64: not a double array");
    std::vector<double> values(bytes.size() / 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        std::memcpy(&values[i], &bits, 8);
    }
    return values;
}

nlohmann::json make_checkpoint(const std::string& model_kind, const nlohmann::json& architecture,
                               const std::vector<double>& parameters, std::uint64_t rng_seed,
                               const nlohmann::json& training_metadata) {
    return nlohmann::json{{"format_version", kCheckpointFormatVersion},
                          {"model_kind", model_kind},
                          {"architecture", architecture},
                          {"parameters", base64_encode_doubles(parameters)},
                          {"rng_seed", rng_seed},
                          {"training_metadata", training_metadata}};
}

void write_checkpoint(const nlohmann::json& checkpoint, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_checkpoint: cannot open " + path);
    out << checkpoint.dump(2) << '\n';
}

nlohmann::json read_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_checkpoint: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
        throw std::runtime_error("read_checkpoint: unsupported format version");
    return j;
}

}  // namespace amorgs::nn
