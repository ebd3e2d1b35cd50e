#include "gridvqa/common.hpp"

#include <array>

namespace gridvqa {

namespace {

std::uint64_t absorb(std::uint64_t h, std::string_view key)
{
    std::array<char, 8> len{};
    std::uint64_t n = key.size();
    for (auto& b : len) {
        b = static_cast<char>(n & 0xff);
        n >>= 8;
    }
    h = fnv1a64(std::string_view(len.data(), len.size()), h);
    return fnv1a64(key, h);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key1, std::string_view key2)
{
    std::uint64_t h = mix64(seed);
    h = absorb(h, key1);
    h = absorb(h, key2);
    return mix64(h);
}

std::string hex64(std::uint64_t v)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

std::size_t Rng::index(std::size_t n)
{
    if (n == 0)
        throw Error("Rng::index: empty range");
    const std::uint64_t bound = n;
    // Reject the low (2^64 mod n) values so every residue is equally likely.
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = engine_();
        if (r >= threshold)
            return static_cast<std::size_t>(r % bound);
    }
}

} // namespace gridvqa
