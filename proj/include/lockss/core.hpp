#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lockss {

// Simulated time in seconds.
using SimTime = double;

inline constexpr SimTime kMinute = 60.0;
inline constexpr SimTime kHour = 3600.0;
inline constexpr SimTime kDay = 86400.0;
inline constexpr SimTime kYear = 365.25 * kDay;
inline constexpr SimTime kMonth = kYear / 12.0;

struct PeerId {
    std::uint32_t value = 0;
    friend constexpr auto operator<=>(PeerId, PeerId) = default;
};

struct PollId {
    std::uint64_t value = 0;
    friend constexpr auto operator<=>(PollId, PollId) = default;
};

using Rng = std::mt19937_64;

// Independent deterministic stream for (seed, stream) pairs.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

// Error categories map onto CLI exit codes.
enum class ErrorKind { Config = 2, Io = 3, Invariant = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};
struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};
struct InvariantError : Error {
    explicit InvariantError(const std::string& what) : Error(ErrorKind::Invariant, what) {}
};

using Digest = std::array<std::uint8_t, 32>;

// Incremental BLAKE2b-256, optionally keyed.
class Hasher {
public:
    Hasher();
    explicit Hasher(std::span<const std::uint8_t> key);
    ~Hasher();
    Hasher(const Hasher&) = delete;
    Hasher& operator=(const Hasher&) = delete;

    Hasher& update(std::span<const std::uint8_t> bytes);
    Hasher& update(const Digest& d) { return update(std::span<const std::uint8_t>(d)); }
    Hasher& update(std::string_view tag);
    Hasher& update_u64(std::uint64_t v);
    Hasher& update_f64(double v);
    Digest finish();

private:
    alignas(64) unsigned char state_[384];
};

Digest random_digest(Rng& rng);
std::string to_hex(const Digest& d);

}  // namespace lockss

template <>
struct std::hash<lockss::PeerId> {
    std::size_t operator()(lockss::PeerId p) const noexcept { return std::hash<std::uint32_t>{}(p.value); }
};

template <>
struct std::hash<lockss::PollId> {
    std::size_t operator()(lockss::PollId p) const noexcept { return std::hash<std::uint64_t>{}(p.value); }
};
