#ifndef NNWAVE_HASH_HPP
#define NNWAVE_HASH_HPP

#include <cstdint>
#include <string_view>

namespace nnwave {

// FNV-1a, hand-rolled so hashes are identical across platforms and standard
// library implementations. Row-key hashing (validation splits) and per-cell
// seed derivation both depend on this being stable.
struct Fnv1a {
    static constexpr std::uint64_t offset = 14695981039346656037ull;
    static constexpr std::uint64_t prime = 1099511628211ull;

    std::uint64_t state = offset;

    Fnv1a& bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state ^= p[i];
            state *= prime;
        }
        return *this;
    }
    Fnv1a& str(std::string_view s) { return bytes(s.data(), s.size()).u8(0x1f); }
    Fnv1a& u8(std::uint8_t v) { return bytes(&v, 1); }
    Fnv1a& i64(std::int64_t v) {
        unsigned char b[8];
        auto u = static_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
        return bytes(b, 8);
    }
    std::uint64_t get() const { return state; }
};

// splitmix64: decorrelates seeds derived from xor-combined hashes.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace nnwave

#endif
