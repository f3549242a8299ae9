#ifndef HMG_JSONIO_HPP
#define HMG_JSONIO_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hmg {

// Deterministic JSON emitter. Keys keep insertion order and every floating
// point number is printed with 17 significant digits, so identical inputs
// produce byte-identical documents. Non-finite values are emitted as null.
class JsonWriter {
public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view k);

  JsonWriter& value(double v);
  JsonWriter& value(bool v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(std::size_t v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& value_null();

  // Appends pre-rendered `"key":value[,...]` members inside the current
  // object, with comma handling. The fragment must be valid JSON members.
  JsonWriter& raw_members(std::string_view fragment);

  JsonWriter& kv(std::string_view k, double v) { return key(k).value(v); }
  JsonWriter& kv(std::string_view k, bool v) { return key(k).value(v); }
  JsonWriter& kv(std::string_view k, std::int64_t v) { return key(k).value(v); }
  JsonWriter& kv(std::string_view k, int v) { return key(k).value(v); }
  JsonWriter& kv(std::string_view k, std::size_t v) { return key(k).value(v); }
  JsonWriter& kv(std::string_view k, std::string_view v) { return key(k).value(v); }
  JsonWriter& kv(std::string_view k, const char* v) { return key(k).value(v); }

  const std::string& str() const { return out_; }
  std::string take() { return std::move(out_); }

  static std::string format_double(double v);

private:
  void maybe_comma();
  std::string out_;
  std::vector<bool> has_item_;
  bool after_key_ = false;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(std::uint64_t v);

// Deterministic RNG used by all samplers (splitmix64 stream).  The double
// mapping avoids implementation-defined std::uniform_real_distribution.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // uniform in [0, 1)
  double next_double();
  // uniform in [a, b)
  double next_range(double a, double b) { return a + (b - a) * next_double(); }
  // uniform integer in [0, n)
  std::size_t next_index(std::size_t n);

private:
  std::uint64_t state_;
  std::uint64_t splitmix();
};

} // namespace hmg

#endif
