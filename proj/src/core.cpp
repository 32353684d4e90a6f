#include "lockss/core.hpp"

#include <sodium.h>

#include <bit>
#include <cstring>

namespace lockss {

static_assert(sizeof(crypto_generichash_state) <= 384);

namespace {

struct SodiumInit {
    SodiumInit()
    {
        if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    }
};

void ensure_sodium()
{
    static SodiumInit init;
}

crypto_generichash_state* as_state(unsigned char* raw)
{
    return reinterpret_cast<crypto_generichash_state*>(raw);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x10c55u};
    return Rng(seq);
}

Hasher::Hasher()
{
    ensure_sodium();
    crypto_generichash_init(as_state(state_), nullptr, 0, 32);
}

Hasher::Hasher(std::span<const std::uint8_t> key)
{
    ensure_sodium();
    crypto_generichash_init(as_state(state_), key.data(), key.size(), 32);
}

Hasher::~Hasher() { sodium_memzero(state_, sizeof state_); }

Hasher& Hasher::update(std::span<const std::uint8_t> bytes)
{
    crypto_generichash_update(as_state(state_), bytes.data(), bytes.size());
    return *this;
}

Hasher& Hasher::update(std::string_view tag)
{
    crypto_generichash_update(as_state(state_), reinterpret_cast<const unsigned char*>(tag.data()), tag.size());
    return *this;
}

Hasher& Hasher::update_u64(std::uint64_t v)
{
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    crypto_generichash_update(as_state(state_), buf, sizeof buf);
    return *this;
}

Hasher& Hasher::update_f64(double v) { return update_u64(std::bit_cast<std::uint64_t>(v)); }

Digest Hasher::finish()
{
    Digest out{};
    crypto_generichash_final(as_state(state_), out.data(), out.size());
    return out;
}

Digest random_digest(Rng& rng)
{
    Digest d{};
    for (std::size_t i = 0; i < d.size(); i += 8) {
        std::uint64_t v = rng();
        std::memcpy(d.data() + i, &v, 8);
    }
    return d;
}

std::string to_hex(const Digest& d)
{
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (auto b : d) {
        s.push_back(kHex[b >> 4]);
        s.push_back(kHex[b & 0xf]);
    }
    return s;
}

}  // namespace lockss
