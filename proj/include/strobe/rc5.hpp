#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace strobe::permute {

// RC5 with 16-bit words, giving the 32-bit block that the probing
// permutation runs on.  Key schedule and round structure follow Rivest's
// algorithm; all arithmetic is mod 2^16 and rotate amounts are mod 16.
//
// Block mapping: a 32-bit integer x splits little-endian into words
// A = x & 0xFFFF (first), B = x >> 16 (second); the ciphertext packs back
// as A' | B' << 16.  Fixed here so permutations are identical across
// platforms.

struct CipherKey {
    std::vector<uint8_t> key_bytes;
    int rounds = 12;
};

class Rc5 {
  public:
    explicit Rc5(const CipherKey& key) : rounds_(key.rounds) {
        if (key.key_bytes.empty() || key.key_bytes.size() > 255)
            throw std::invalid_argument("rc5: key must be 1-255 bytes");
        if (key.rounds < 1 || key.rounds > 255)
            throw std::invalid_argument("rc5: rounds must be 1-255");
        expand_key(key.key_bytes);
    }

    uint32_t encrypt(uint32_t x) const {
        uint16_t a = uint16_t((x & 0xFFFF) + s_[0]);
        uint16_t b = uint16_t((x >> 16) + s_[1]);
        for (int i = 1; i <= rounds_; ++i) {
            a = uint16_t(rotl(uint16_t(a ^ b), b) + s_[2 * i]);
            b = uint16_t(rotl(uint16_t(b ^ a), a) + s_[2 * i + 1]);
        }
        return uint32_t(a) | uint32_t(b) << 16;
    }

    uint32_t decrypt(uint32_t x) const {
        uint16_t a = uint16_t(x & 0xFFFF);
        uint16_t b = uint16_t(x >> 16);
        for (int i = rounds_; i >= 1; --i) {
            b = uint16_t(rotr(uint16_t(b - s_[2 * i + 1]), a) ^ a);
            a = uint16_t(rotr(uint16_t(a - s_[2 * i]), b) ^ b);
        }
        b = uint16_t(b - s_[1]);
        a = uint16_t(a - s_[0]);
        return uint32_t(a) | uint32_t(b) << 16;
    }

    int rounds() const { return rounds_; }

  private:
    static constexpr uint16_t kP16 = 0xB7E1; // Odd((e-2) * 2^16)
    static constexpr uint16_t kQ16 = 0x9E37; // Odd((phi-1) * 2^16)

    static uint16_t rotl(uint16_t x, uint16_t s) {
        s &= 15;
        return s ? uint16_t(uint16_t(x << s) | uint16_t(x >> (16 - s))) : x;
    }
    static uint16_t rotr(uint16_t x, uint16_t s) {
        s &= 15;
        return s ? uint16_t(uint16_t(x >> s) | uint16_t(x << (16 - s))) : x;
    }

    void expand_key(std::span<const uint8_t> key) {
        const size_t b = key.size();
        const size_t c = (b + 1) / 2;
        std::vector<uint16_t> l(c, 0);
        for (size_t i = b; i-- > 0;)
            l[i / 2] = uint16_t(uint16_t(l[i / 2] << 8) + key[i]);

        const size_t t = 2 * size_t(rounds_ + 1);
        s_.assign(t, 0);
        s_[0] = kP16;
        for (size_t i = 1; i < t; ++i)
            s_[i] = uint16_t(s_[i - 1] + kQ16);

        uint16_t a = 0, bw = 0;
        size_t i = 0, j = 0;
        const size_t mixes = 3 * (t > c ? t : c);
        for (size_t k = 0; k < mixes; ++k) {
            a = s_[i] = rotl(uint16_t(s_[i] + a + bw), 3);
            bw = l[j] = rotl(uint16_t(l[j] + a + bw), uint16_t(a + bw));
            i = (i + 1) % t;
            j = (j + 1) % c;
        }
    }

    int rounds_;
    std::vector<uint16_t> s_;
};

} // namespace strobe::permute
