#include <cstdint>
#include <string_view>

namespace {

constexpr uint32_t kAdlerMod = 65521;

}  // namespace

struct Adler32 {
  uint32_t a = 1;
  uint32_t b = 0;

  void update(std::string_view data) {
    for (unsigned char c : data) {
      a = (a + c) % kAdlerMod;
      b = (b + a) % kAdlerMod;
    }
  }

  uint32_t digest() const { return (b << 16) | a; }
};

bool operator==(const Adler32& x, const Adler32& y) {
  return x.a == y.a && x.b == y.b;
}

uint32_t adler32(std::string_view data) {
  Adler32 sum;
  sum.update(data);
  return sum.digest();
}

int (*g_checksum_hook)(const char*, int) = nullptr;
