// Text normalization, tokenization, hashing, and the deterministic RNG.

#include "calset/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace calset {

namespace {

// Decodes one UTF-8 codepoint at s[i]. Returns the codepoint and advances i;
// invalid bytes are surfaced as negative values so callers can copy them
// through untouched.
long decode_utf8(const std::string& s, std::size_t& i) {
  unsigned char b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    i += 1;
    return b0;
  }
  auto cont = [&](std::size_t k) {
    return i + k < s.size() &&
           (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    long cp = (b0 & 0x1F) << 6 | (static_cast<unsigned char>(s[i + 1]) & 0x3F);
    i += 2;
    return cp >= 0x80 ? cp : -1;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    long cp = (b0 & 0x0F) << 12 |
              (static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6 |
              (static_cast<unsigned char>(s[i + 2]) & 0x3F);
    i += 3;
    return cp >= 0x800 ? cp : -1;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    long cp = (b0 & 0x07) << 18 |
              (static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12 |
              (static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6 |
              (static_cast<unsigned char>(s[i + 3]) & 0x3F);
    i += 4;
    return cp >= 0x10000 ? cp : -1;
  }
  i += 1;
  return -static_cast<long>(b0) - 1;  // invalid lead byte, pass through
}

void encode_utf8(long cp, std::string& out) {
  if (cp < 0) {  // raw byte from an invalid sequence
    out.push_back(static_cast<char>(-(cp + 1)));
    return;
  }
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

struct Composition {
  long base;
  long mark;
  long composed;
};

// Latin base + combining mark pairs with precomposed forms. Ordered by
// (base, mark) for lookup.
constexpr std::array<Composition, 52> kCompositions = {{
    {'A', 0x300, 0xC0}, {'A', 0x301, 0xC1}, {'A', 0x302, 0xC2},
    {'A', 0x303, 0xC3}, {'A', 0x308, 0xC4}, {'A', 0x30A, 0xC5},
    {'C', 0x301, 0x106}, {'C', 0x327, 0xC7},
    {'E', 0x300, 0xC8}, {'E', 0x301, 0xC9}, {'E', 0x302, 0xCA},
    {'E', 0x308, 0xCB},
    {'I', 0x300, 0xCC}, {'I', 0x301, 0xCD}, {'I', 0x302, 0xCE},
    {'I', 0x308, 0xCF},
    {'N', 0x303, 0xD1},
    {'O', 0x300, 0xD2}, {'O', 0x301, 0xD3}, {'O', 0x302, 0xD4},
    {'O', 0x303, 0xD5}, {'O', 0x308, 0xD6},
    {'U', 0x300, 0xD9}, {'U', 0x301, 0xDA}, {'U', 0x302, 0xDB},
    {'U', 0x308, 0xDC},
    {'Y', 0x301, 0xDD},
    {'a', 0x300, 0xE0}, {'a', 0x301, 0xE1}, {'a', 0x302, 0xE2},
    {'a', 0x303, 0xE3}, {'a', 0x308, 0xE4}, {'a', 0x30A, 0xE5},
    {'c', 0x301, 0x107}, {'c', 0x327, 0xE7},
    {'e', 0x300, 0xE8}, {'e', 0x301, 0xE9}, {'e', 0x302, 0xEA},
    {'e', 0x308, 0xEB},
    {'i', 0x300, 0xEC}, {'i', 0x301, 0xED}, {'i', 0x302, 0xEE},
    {'i', 0x308, 0xEF},
    {'n', 0x303, 0xF1},
    {'o', 0x300, 0xF2}, {'o', 0x301, 0xF3}, {'o', 0x302, 0xF4},
    {'o', 0x303, 0xF5}, {'o', 0x308, 0xF6},
    {'u', 0x300, 0xF9}, {'u', 0x301, 0xFA}, {'u', 0x308, 0xFC},
}};

long compose(long base, long mark) {
  for (const auto& c : kCompositions) {
    if (c.base == base && c.mark == mark) return c.composed;
  }
  return -1;
}

bool is_ascii_space(char ch) {
  return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' ||
         ch == '\v';
}

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::string nfc(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  long pending = -1;  // last decoded codepoint not yet emitted
  bool has_pending = false;
  std::size_t i = 0;
  while (i < text.size()) {
    long cp = decode_utf8(text, i);
    if (has_pending && cp >= 0x300 && cp <= 0x36F) {
      long composed = compose(pending, cp);
      if (composed >= 0) {
        pending = composed;  // composed form may take further marks
        continue;
      }
    }
    if (has_pending) encode_utf8(pending, out);
    pending = cp;
    has_pending = true;
  }
  if (has_pending) encode_utf8(pending, out);
  return out;
}

std::string lowercase(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    long cp = decode_utf8(text, i);
    if (cp >= 'A' && cp <= 'Z') {
      cp += 0x20;
    } else if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) {  // Latin-1 capitals
      cp += 0x20;
    }
    encode_utf8(cp, out);
  }
  return out;
}

std::string normalize_ws(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = true;  // leading whitespace dropped
  for (char ch : text) {
    if (is_ascii_space(ch)) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(ch);
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::string canon = lowercase(nfc(text));
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < canon.size()) {
    while (i < canon.size() && is_ascii_space(canon[i])) ++i;
    std::size_t start = i;
    while (i < canon.size() && !is_ascii_space(canon[i])) ++i;
    if (i > start) tokens.push_back(canon.substr(start, i - start));
  }
  return tokens;
}

std::string dedup_key(const std::string& text) { return nfc(text); }

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char ch : data) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t seed_from(const std::vector<std::string>& parts) {
  std::string joined;
  for (const auto& p : parts) {
    joined += p;
    joined.push_back('\x1F');  // unit separator, keeps parts unambiguous
  }
  return fnv1a64(joined);
}

Rng::Rng(std::uint64_t seed) : state_(seed ^ 0xA5A5A5A55A5A5A5AULL) {
  // A couple of warmup draws so nearby seeds diverge immediately.
  splitmix64(state_);
  splitmix64(state_);
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

std::uint64_t Rng::bounded(std::uint64_t n) {
  if (n == 0) throw Error("Rng::bounded: n must be > 0");
  // Rejection sampling over the largest multiple of n.
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1, u2;
  do {
    u1 = unit();
  } while (u1 <= 0.0);
  u2 = unit();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
  if (k > n) throw Error("Rng::sample_indices: k exceeds n");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(bounded(n - i));
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

void log_warn(const std::string& message) {
  std::fprintf(stderr, "warning: %s\n", message.c_str());
}

}  // namespace calset
