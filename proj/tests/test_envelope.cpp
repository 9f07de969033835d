#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "fednb/envelope.hpp"
#include "fednb/rng.hpp"

using namespace fednb;

namespace {

std::vector<std::uint8_t> random_payload(std::size_t n, std::uint64_t seed) {
    Xoshiro256pp rng(seed);
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng.next() & 0xFF);
    return out;
}

struct Peers {
    KeyPair alice = generate_keypair();
    KeyPair bob = generate_keypair();
};

Peers& peers() {
    static Peers p;  // RSA keygen once for the whole binary
    return p;
}

}  // namespace

TEST_CASE("roundtrip identity at 0 B, 1 B, 1 KB, 1 MB") {
    auto& p = peers();
    for (std::size_t size : {std::size_t{0}, std::size_t{1}, std::size_t{1024},
                             std::size_t{1024 * 1024}}) {
        const auto payload = random_payload(size, 100 + size);
        const auto envelope = seal(payload, p.bob.public_part, p.alice.private_part, "alice");
        CHECK(envelope.scheme_id == kRsaSchemeId);
        const auto opened = open(envelope, p.bob.private_part, p.alice.public_part);
        CHECK(opened == payload);
    }
}

TEST_CASE("two keypairs differ; two seals of one payload differ") {
    auto& p = peers();
    CHECK(p.alice.public_part != p.bob.public_part);

    const auto payload = random_payload(64, 7);
    const auto a = seal(payload, p.bob.public_part, p.alice.private_part, "alice");
    const auto b = seal(payload, p.bob.public_part, p.alice.private_part, "alice");
    CHECK(a.ciphertext != b.ciphertext);  // fresh session key and IV
}

TEST_CASE("below-minimum modulus is rejected") {
    CHECK_THROWS_AS(generate_keypair(1024), WeakParameters);
}

TEST_CASE("100 random single-byte flips never open") {
    auto& p = peers();
    const auto payload = random_payload(256, 9);
    const auto envelope = seal(payload, p.bob.public_part, p.alice.private_part, "alice");

    Xoshiro256pp rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        SealedEnvelope tampered = envelope;
        const std::size_t total = tampered.ciphertext.size() + tampered.signature.size();
        const std::size_t pos = static_cast<std::size_t>(rng.bounded(total));
        const auto bit = static_cast<std::uint8_t>(1u << rng.bounded(8));
        if (pos < tampered.ciphertext.size())
            tampered.ciphertext[pos] ^= bit;
        else
            tampered.signature[pos - tampered.ciphertext.size()] ^= bit;
        CHECK_THROWS_AS(open(tampered, p.bob.private_part, p.alice.public_part), EnvelopeError);
    }
}

TEST_CASE("verification against the wrong sender fails") {
    auto& p = peers();
    const KeyPair mallory = generate_keypair();
    const auto payload = random_payload(128, 17);
    const auto envelope = seal(payload, p.bob.public_part, p.alice.private_part, "alice");
    CHECK_THROWS_AS(open(envelope, p.bob.private_part, mallory.public_part), SignatureError);
}

TEST_CASE("malformed key material raises KeyMismatch") {
    auto& p = peers();
    const auto payload = random_payload(16, 4);
    const std::vector<std::uint8_t> junk = {0x01, 0x02, 0x03};
    CHECK_THROWS_AS(seal(payload, junk, p.alice.private_part, "alice"), KeyMismatch);
    CHECK_THROWS_AS(seal(payload, p.bob.public_part, junk, "alice"), KeyMismatch);
    const auto envelope = seal(payload, p.bob.public_part, p.alice.private_part, "alice");
    CHECK_THROWS_AS(open(envelope, junk, p.alice.public_part), KeyMismatch);
}

TEST_CASE("serialized envelope leaks no 9-byte run of the plaintext") {
    auto& p = peers();
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        const auto payload = random_payload(200, seed);
        const auto envelope = seal(payload, p.bob.public_part, p.alice.private_part, "alice");
        const std::string wire = envelope.to_json().dump();
        bool leaked = false;
        for (std::size_t i = 0; i + 9 <= payload.size() && !leaked; ++i) {
            const std::string window(payload.begin() + i, payload.begin() + i + 9);
            leaked = wire.find(window) != std::string::npos;
        }
        CHECK_FALSE(leaked);
    }
}

TEST_CASE("envelope JSON round-trips") {
    auto& p = peers();
    const auto payload = random_payload(64, 5);
    const auto envelope = seal(payload, p.bob.public_part, p.alice.private_part, "alice");
    const auto back = SealedEnvelope::from_json(envelope.to_json());
    CHECK(back.sender_id == envelope.sender_id);
    CHECK(back.scheme_id == envelope.scheme_id);
    CHECK(back.ciphertext == envelope.ciphertext);
    CHECK(back.signature == envelope.signature);
    CHECK(open(back, p.bob.private_part, p.alice.public_part) == payload);
}

TEST_CASE("null scheme is an identity and must be asked for by name") {
    const auto& null_scheme = scheme_by_id(kNullSchemeId);
    const auto payload = random_payload(50, 3);
    const auto envelope = null_scheme.seal(payload, {}, {}, "2");
    CHECK(envelope.ciphertext == payload);
    CHECK(null_scheme.open(envelope, {}, {}) == payload);
    CHECK_THROWS_AS(scheme_by_id("rot13"), KeyMismatch);
}
