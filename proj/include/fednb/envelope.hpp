#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fednb/error.hpp"

namespace fednb {

// public_part is DER SubjectPublicKeyInfo, private_part DER PKCS#8; both are
// opaque to callers. Private parts never appear in protocol messages.
struct KeyPair {
    std::vector<std::uint8_t> public_part;
    std::vector<std::uint8_t> private_part;
};

struct SealedEnvelope {
    std::string sender_id;
    std::vector<std::uint8_t> ciphertext;
    std::vector<std::uint8_t> signature;  // over the plaintext payload
    std::string scheme_id;

    nlohmann::json to_json() const;
    static SealedEnvelope from_json(const nlohmann::json& j);
};

// Algorithm-agility seam. The real scheme signs the plaintext with the
// sender's private key, then hybrid-encrypts to the recipient's public key.
class EnvelopeScheme {
public:
    virtual ~EnvelopeScheme() = default;
    virtual std::string id() const = 0;
    virtual KeyPair generate_keypair(unsigned strength_bits) const = 0;
    virtual SealedEnvelope seal(std::span<const std::uint8_t> payload,
                                std::span<const std::uint8_t> recipient_public,
                                std::span<const std::uint8_t> sender_private,
                                std::string sender_id) const = 0;
    virtual std::vector<std::uint8_t> open(const SealedEnvelope& envelope,
                                           std::span<const std::uint8_t> recipient_private,
                                           std::span<const std::uint8_t> sender_public) const = 0;
};

inline constexpr unsigned kMinRsaBits = 2048;
inline constexpr const char* kRsaSchemeId = "rsa-oaep-aes256gcm-pss";
inline constexpr const char* kNullSchemeId = "null";

// RSA-2048+ keypairs; RSA-PSS/SHA-256 signature over the plaintext; payload
// under a fresh AES-256-GCM session key, itself sealed with RSA-OAEP/SHA-256.
class RsaHybridScheme final : public EnvelopeScheme {
public:
    std::string id() const override { return kRsaSchemeId; }
    KeyPair generate_keypair(unsigned strength_bits) const override;
    SealedEnvelope seal(std::span<const std::uint8_t> payload,
                        std::span<const std::uint8_t> recipient_public,
                        std::span<const std::uint8_t> sender_private,
                        std::string sender_id) const override;
    std::vector<std::uint8_t> open(const SealedEnvelope& envelope,
                                   std::span<const std::uint8_t> recipient_private,
                                   std::span<const std::uint8_t> sender_public) const override;
};

// Identity seal/open with empty keys. NOT SECURE - exists so protocol tests
// replay deterministically without key generation. Never use outside tests.
class NullScheme final : public EnvelopeScheme {
public:
    std::string id() const override { return kNullSchemeId; }
    KeyPair generate_keypair(unsigned strength_bits) const override;
    SealedEnvelope seal(std::span<const std::uint8_t> payload,
                        std::span<const std::uint8_t> recipient_public,
                        std::span<const std::uint8_t> sender_private,
                        std::string sender_id) const override;
    std::vector<std::uint8_t> open(const SealedEnvelope& envelope,
                                   std::span<const std::uint8_t> recipient_private,
                                   std::span<const std::uint8_t> sender_public) const override;
};

// Throws KeyMismatch for an unknown id.
const EnvelopeScheme& scheme_by_id(const std::string& id);

// Default-scheme conveniences.
KeyPair generate_keypair(unsigned strength_bits = kMinRsaBits);
SealedEnvelope seal(std::span<const std::uint8_t> payload,
                    std::span<const std::uint8_t> recipient_public,
                    std::span<const std::uint8_t> sender_private, std::string sender_id);
std::vector<std::uint8_t> open(const SealedEnvelope& envelope,
                               std::span<const std::uint8_t> recipient_private,
                               std::span<const std::uint8_t> sender_public);

}  // namespace fednb
