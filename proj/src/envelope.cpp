#include "fednb/envelope.hpp"

#include <memory>

#include <nlohmann/json.hpp>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>
#include <openssl/x509.h>

#include "fednb/base64.hpp"

namespace fednb {

using nlohmann::json;

namespace {

struct PkeyDeleter {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct PkeyCtxDeleter {
    void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};

using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

[[noreturn]] void fail_openssl(const std::string& what) {
    const unsigned long code = ERR_get_error();
    char buf[256] = {0};
    if (code != 0) ERR_error_string_n(code, buf, sizeof buf);
    ERR_clear_error();
    throw Error(what + (code ? std::string(": ") + buf : std::string()));
}

PkeyPtr parse_public(std::span<const std::uint8_t> der) {
    const unsigned char* p = der.data();
    EVP_PKEY* key = d2i_PUBKEY(nullptr, &p, static_cast<long>(der.size()));
    if (!key) {
        ERR_clear_error();
        throw KeyMismatch("malformed public key");
    }
    return PkeyPtr(key);
}

PkeyPtr parse_private(std::span<const std::uint8_t> der) {
    const unsigned char* p = der.data();
    PKCS8_PRIV_KEY_INFO* info = d2i_PKCS8_PRIV_KEY_INFO(nullptr, &p, static_cast<long>(der.size()));
    if (!info) {
        ERR_clear_error();
        throw KeyMismatch("malformed private key");
    }
    EVP_PKEY* key = EVP_PKCS82PKEY(info);
    PKCS8_PRIV_KEY_INFO_free(info);
    if (!key) {
        ERR_clear_error();
        throw KeyMismatch("malformed private key");
    }
    return PkeyPtr(key);
}

std::vector<std::uint8_t> sign_payload(std::span<const std::uint8_t> payload, EVP_PKEY* key) {
    MdCtxPtr ctx(EVP_MD_CTX_new());
    EVP_PKEY_CTX* pctx = nullptr;
    if (EVP_DigestSignInit(ctx.get(), &pctx, EVP_sha256(), nullptr, key) != 1)
        fail_openssl("DigestSignInit");
    if (EVP_PKEY_CTX_set_rsa_padding(pctx, RSA_PKCS1_PSS_PADDING) != 1 ||
        EVP_PKEY_CTX_set_rsa_pss_saltlen(pctx, RSA_PSS_SALTLEN_DIGEST) != 1)
        fail_openssl("PSS setup");
    std::size_t sig_len = 0;
    if (EVP_DigestSign(ctx.get(), nullptr, &sig_len, payload.data(), payload.size()) != 1)
        fail_openssl("DigestSign size");
    std::vector<std::uint8_t> signature(sig_len);
    if (EVP_DigestSign(ctx.get(), signature.data(), &sig_len, payload.data(), payload.size()) != 1)
        fail_openssl("DigestSign");
    signature.resize(sig_len);
    return signature;
}

bool verify_payload(std::span<const std::uint8_t> payload, std::span<const std::uint8_t> signature,
                    EVP_PKEY* key) {
    MdCtxPtr ctx(EVP_MD_CTX_new());
    EVP_PKEY_CTX* pctx = nullptr;
    if (EVP_DigestVerifyInit(ctx.get(), &pctx, EVP_sha256(), nullptr, key) != 1)
        fail_openssl("DigestVerifyInit");
    if (EVP_PKEY_CTX_set_rsa_padding(pctx, RSA_PKCS1_PSS_PADDING) != 1 ||
        EVP_PKEY_CTX_set_rsa_pss_saltlen(pctx, RSA_PSS_SALTLEN_DIGEST) != 1)
        fail_openssl("PSS setup");
    const int rc = EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), payload.data(),
                                    payload.size());
    ERR_clear_error();
    return rc == 1;
}

constexpr std::size_t kAesKeyLen = 32;
constexpr std::size_t kGcmIvLen = 12;
constexpr std::size_t kGcmTagLen = 16;

}  // namespace

KeyPair RsaHybridScheme::generate_keypair(unsigned strength_bits) const {
    if (strength_bits < kMinRsaBits)
        throw WeakParameters("RSA modulus below the " + std::to_string(kMinRsaBits) + "-bit minimum");

    PkeyCtxPtr ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_RSA, nullptr));
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) != 1 ||
        EVP_PKEY_CTX_set_rsa_keygen_bits(ctx.get(), static_cast<int>(strength_bits)) != 1)
        fail_openssl("RSA keygen init");
    EVP_PKEY* raw = nullptr;
    if (EVP_PKEY_keygen(ctx.get(), &raw) != 1) fail_openssl("RSA keygen");
    PkeyPtr key(raw);

    KeyPair pair;
    {
        const int len = i2d_PUBKEY(key.get(), nullptr);
        if (len <= 0) fail_openssl("export public key");
        pair.public_part.resize(static_cast<std::size_t>(len));
        unsigned char* p = pair.public_part.data();
        i2d_PUBKEY(key.get(), &p);
    }
    {
        PKCS8_PRIV_KEY_INFO* info = EVP_PKEY2PKCS8(key.get());
        if (!info) fail_openssl("export private key");
        const int len = i2d_PKCS8_PRIV_KEY_INFO(info, nullptr);
        if (len <= 0) {
            PKCS8_PRIV_KEY_INFO_free(info);
            fail_openssl("export private key");
        }
        pair.private_part.resize(static_cast<std::size_t>(len));
        unsigned char* p = pair.private_part.data();
        i2d_PKCS8_PRIV_KEY_INFO(info, &p);
        PKCS8_PRIV_KEY_INFO_free(info);
    }
    return pair;
}

SealedEnvelope RsaHybridScheme::seal(std::span<const std::uint8_t> payload,
                                     std::span<const std::uint8_t> recipient_public,
                                     std::span<const std::uint8_t> sender_private,
                                     std::string sender_id) const {
    PkeyPtr recipient = parse_public(recipient_public);
    PkeyPtr sender = parse_private(sender_private);

    SealedEnvelope envelope;
    envelope.sender_id = std::move(sender_id);
    envelope.scheme_id = id();
    envelope.signature = sign_payload(payload, sender.get());

    std::uint8_t session_key[kAesKeyLen];
    std::uint8_t iv[kGcmIvLen];
    if (RAND_bytes(session_key, sizeof session_key) != 1 || RAND_bytes(iv, sizeof iv) != 1)
        fail_openssl("RAND_bytes");

    // Session key under RSA-OAEP/SHA-256.
    std::vector<std::uint8_t> sealed_key;
    {
        PkeyCtxPtr ctx(EVP_PKEY_CTX_new(recipient.get(), nullptr));
        if (!ctx || EVP_PKEY_encrypt_init(ctx.get()) != 1 ||
            EVP_PKEY_CTX_set_rsa_padding(ctx.get(), RSA_PKCS1_OAEP_PADDING) != 1 ||
            EVP_PKEY_CTX_set_rsa_oaep_md(ctx.get(), EVP_sha256()) != 1)
            fail_openssl("OAEP init");
        std::size_t out_len = 0;
        if (EVP_PKEY_encrypt(ctx.get(), nullptr, &out_len, session_key, sizeof session_key) != 1)
            fail_openssl("OAEP size");
        sealed_key.resize(out_len);
        if (EVP_PKEY_encrypt(ctx.get(), sealed_key.data(), &out_len, session_key, sizeof session_key) != 1)
            fail_openssl("OAEP encrypt");
        sealed_key.resize(out_len);
    }

    // Payload under AES-256-GCM.
    std::vector<std::uint8_t> body(payload.size());
    std::uint8_t tag[kGcmTagLen];
    {
        CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
        int len = 0;
        if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, session_key, iv) != 1)
            fail_openssl("GCM init");
        if (!payload.empty() &&
            EVP_EncryptUpdate(ctx.get(), body.data(), &len, payload.data(),
                              static_cast<int>(payload.size())) != 1)
            fail_openssl("GCM encrypt");
        int fin = 0;
        if (EVP_EncryptFinal_ex(ctx.get(), body.data() + len, &fin) != 1) fail_openssl("GCM final");
        if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kGcmTagLen, tag) != 1)
            fail_openssl("GCM tag");
    }
    OPENSSL_cleanse(session_key, sizeof session_key);

    // ciphertext = u16be(sealed_key length) | sealed_key | iv | tag | body
    envelope.ciphertext.reserve(2 + sealed_key.size() + kGcmIvLen + kGcmTagLen + body.size());
    envelope.ciphertext.push_back(static_cast<std::uint8_t>(sealed_key.size() >> 8));
    envelope.ciphertext.push_back(static_cast<std::uint8_t>(sealed_key.size() & 0xFF));
    envelope.ciphertext.insert(envelope.ciphertext.end(), sealed_key.begin(), sealed_key.end());
    envelope.ciphertext.insert(envelope.ciphertext.end(), iv, iv + kGcmIvLen);
    envelope.ciphertext.insert(envelope.ciphertext.end(), tag, tag + kGcmTagLen);
    envelope.ciphertext.insert(envelope.ciphertext.end(), body.begin(), body.end());
    return envelope;
}

std::vector<std::uint8_t> RsaHybridScheme::open(const SealedEnvelope& envelope,
                                                std::span<const std::uint8_t> recipient_private,
                                                std::span<const std::uint8_t> sender_public) const {
    PkeyPtr recipient = parse_private(recipient_private);
    PkeyPtr sender = parse_public(sender_public);

    const auto& ct = envelope.ciphertext;
    if (ct.size() < 2) throw IntegrityError("ciphertext truncated");
    const std::size_t key_len = (static_cast<std::size_t>(ct[0]) << 8) | ct[1];
    if (ct.size() < 2 + key_len + kGcmIvLen + kGcmTagLen) throw IntegrityError("ciphertext truncated");
    const std::uint8_t* sealed_key = ct.data() + 2;
    const std::uint8_t* iv = sealed_key + key_len;
    const std::uint8_t* tag = iv + kGcmIvLen;
    const std::uint8_t* body = tag + kGcmTagLen;
    const std::size_t body_len = ct.size() - 2 - key_len - kGcmIvLen - kGcmTagLen;

    std::uint8_t session_key[kAesKeyLen];
    {
        PkeyCtxPtr ctx(EVP_PKEY_CTX_new(recipient.get(), nullptr));
        if (!ctx || EVP_PKEY_decrypt_init(ctx.get()) != 1 ||
            EVP_PKEY_CTX_set_rsa_padding(ctx.get(), RSA_PKCS1_OAEP_PADDING) != 1 ||
            EVP_PKEY_CTX_set_rsa_oaep_md(ctx.get(), EVP_sha256()) != 1)
            fail_openssl("OAEP init");
        // the scratch buffer must fit a whole RSA block, not just the key
        std::vector<std::uint8_t> scratch(EVP_PKEY_size(recipient.get()));
        std::size_t out_len = scratch.size();
        if (EVP_PKEY_decrypt(ctx.get(), scratch.data(), &out_len, sealed_key, key_len) != 1 ||
            out_len != kAesKeyLen) {
            OPENSSL_cleanse(scratch.data(), scratch.size());
            ERR_clear_error();
            throw IntegrityError("session key cannot be recovered");
        }
        std::copy(scratch.begin(), scratch.begin() + kAesKeyLen, session_key);
        OPENSSL_cleanse(scratch.data(), scratch.size());
    }

    std::vector<std::uint8_t> payload(body_len);
    {
        CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
        int len = 0;
        if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, session_key, iv) != 1)
            fail_openssl("GCM init");
        if (body_len > 0 &&
            EVP_DecryptUpdate(ctx.get(), payload.data(), &len, body, static_cast<int>(body_len)) != 1) {
            ERR_clear_error();
            OPENSSL_cleanse(session_key, sizeof session_key);
            throw IntegrityError("payload decryption failed");
        }
        // GCM requires the tag to be set before final.
        std::uint8_t tag_copy[kGcmTagLen];
        std::copy(tag, tag + kGcmTagLen, tag_copy);
        if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kGcmTagLen, tag_copy) != 1)
            fail_openssl("GCM set tag");
        int fin = 0;
        if (EVP_DecryptFinal_ex(ctx.get(), payload.data() + len, &fin) != 1) {
            ERR_clear_error();
            OPENSSL_cleanse(session_key, sizeof session_key);
            throw IntegrityError("authentication tag mismatch");
        }
    }
    OPENSSL_cleanse(session_key, sizeof session_key);

    if (!verify_payload(payload, envelope.signature, sender.get()))
        throw SignatureError("signature does not verify against the claimed sender");
    return payload;
}

KeyPair NullScheme::generate_keypair(unsigned) const { return {}; }

SealedEnvelope NullScheme::seal(std::span<const std::uint8_t> payload, std::span<const std::uint8_t>,
                                std::span<const std::uint8_t>, std::string sender_id) const {
    SealedEnvelope envelope;
    envelope.sender_id = std::move(sender_id);
    envelope.scheme_id = id();
    envelope.ciphertext.assign(payload.begin(), payload.end());
    return envelope;
}

std::vector<std::uint8_t> NullScheme::open(const SealedEnvelope& envelope,
                                           std::span<const std::uint8_t>,
                                           std::span<const std::uint8_t>) const {
    return envelope.ciphertext;
}

const EnvelopeScheme& scheme_by_id(const std::string& id) {
    static const RsaHybridScheme rsa;
    static const NullScheme null;
    if (id == rsa.id()) return rsa;
    if (id == null.id()) return null;
    throw KeyMismatch("unknown envelope scheme '" + id + "'");
}

KeyPair generate_keypair(unsigned strength_bits) {
    return RsaHybridScheme{}.generate_keypair(strength_bits);
}

SealedEnvelope seal(std::span<const std::uint8_t> payload,
                    std::span<const std::uint8_t> recipient_public,
                    std::span<const std::uint8_t> sender_private, std::string sender_id) {
    return RsaHybridScheme{}.seal(payload, recipient_public, sender_private, std::move(sender_id));
}

std::vector<std::uint8_t> open(const SealedEnvelope& envelope,
                               std::span<const std::uint8_t> recipient_private,
                               std::span<const std::uint8_t> sender_public) {
    return RsaHybridScheme{}.open(envelope, recipient_private, sender_public);
}

json SealedEnvelope::to_json() const {
    return json{{"ciphertext", base64_encode(ciphertext)},
                {"scheme_id", scheme_id},
                {"sender_id", sender_id},
                {"signature", base64_encode(signature)}};
}

SealedEnvelope SealedEnvelope::from_json(const json& j) {
    SealedEnvelope envelope;
    envelope.sender_id = j.at("sender_id").get<std::string>();
    envelope.scheme_id = j.at("scheme_id").get<std::string>();
    envelope.ciphertext = base64_decode(j.at("ciphertext").get<std::string>());
    envelope.signature = base64_decode(j.at("signature").get<std::string>());
    return envelope;
}

}  // namespace fednb
