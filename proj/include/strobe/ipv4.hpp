#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace strobe {

// IPv4 address held in host byte order.  Comparable and hashable so it can
// key maps and sets directly.
class IPv4Addr {
  public:
    constexpr IPv4Addr() = default;
    constexpr explicit IPv4Addr(uint32_t value) : value_(value) {}
    constexpr IPv4Addr(uint8_t a, uint8_t b, uint8_t c, uint8_t d)
        : value_((uint32_t(a) << 24) | (uint32_t(b) << 16) | (uint32_t(c) << 8) | d) {}

    constexpr uint32_t value() const { return value_; }
    constexpr uint8_t octet(int i) const { return uint8_t(value_ >> (8 * (3 - i))); }

    std::string to_string() const {
        return std::to_string(octet(0)) + '.' + std::to_string(octet(1)) + '.' +
               std::to_string(octet(2)) + '.' + std::to_string(octet(3));
    }

    static std::optional<IPv4Addr> parse(std::string_view s) {
        uint32_t out = 0;
        int octets = 0;
        size_t i = 0;
        while (octets < 4) {
            if (i >= s.size() || s[i] < '0' || s[i] > '9')
                return std::nullopt;
            uint32_t v = 0;
            size_t start = i;
            while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
                v = v * 10 + uint32_t(s[i] - '0');
                if (v > 255 || i - start >= 3)
                    return std::nullopt;
                ++i;
            }
            out = (out << 8) | v;
            ++octets;
            if (octets < 4) {
                if (i >= s.size() || s[i] != '.')
                    return std::nullopt;
                ++i;
            }
        }
        if (i != s.size())
            return std::nullopt;
        return IPv4Addr(out);
    }

    friend constexpr bool operator==(IPv4Addr a, IPv4Addr b) { return a.value_ == b.value_; }
    friend constexpr bool operator!=(IPv4Addr a, IPv4Addr b) { return a.value_ != b.value_; }
    friend constexpr bool operator<(IPv4Addr a, IPv4Addr b) { return a.value_ < b.value_; }

  private:
    uint32_t value_ = 0;
};

} // namespace strobe

template <> struct std::hash<strobe::IPv4Addr> {
    size_t operator()(strobe::IPv4Addr a) const noexcept {
        return std::hash<uint32_t>{}(a.value());
    }
};
