#ifndef AMORGS_NN_CHECKPOINT_HPP
#define AMORGS_NN_CHECKPOINT_HPP

#include <string>
#include <vector>

#include <json.hpp>

namespace amorgs::nn {

/// Little-endian 64-bit float array <-> base64, bit-exact round trip.
std::string base64_encode_doubles(const std::vector<double>& values);
std::vector<double> base64_decode_doubles(const std::string& text);

inline constexpr int kCheckpointFormatVersion = 1;

/// Assembles the single-document checkpoint: format_version, architecture
/// manifest, base64 parameters, rng seed, and free-form training metadata.
nlohmann::json make_checkpoint(const std::string& model_kind, const nlohmann::json& architecture,
                               const std::vector<double>& parameters, std::uint64_t rng_seed,
                               const nlohmann::json& training_metadata);

void write_checkpoint(const nlohmann::json& checkpoint, const std::string& path);
nlohmann::json read_checkpoint(const std::string& path);

}  // namespace amorgs::nn

#endif
