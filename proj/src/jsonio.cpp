#include "hmg/jsonio.hpp"

#include <cmath>
#include <cstdio>

namespace hmg {

void JsonWriter::maybe_comma() {
  if (after_key_) {
    after_key_ = false;
    return;
  }
  if (!has_item_.empty()) {
    if (has_item_.back()) out_.push_back(',');
    has_item_.back() = true;
  }
}

JsonWriter& JsonWriter::begin_object() {
  maybe_comma();
  out_.push_back('{');
  has_item_.push_back(false);
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  out_.push_back('}');
  has_item_.pop_back();
  return *this;
}

JsonWriter& JsonWriter::begin_array() {
  maybe_comma();
  out_.push_back('[');
  has_item_.push_back(false);
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  out_.push_back(']');
  has_item_.pop_back();
  return *this;
}

JsonWriter& JsonWriter::key(std::string_view k) {
  maybe_comma();
  out_.push_back('"');
  out_.append(k);
  out_.append("\":");
  after_key_ = true;
  return *this;
}

std::string JsonWriter::format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

JsonWriter& JsonWriter::value(double v) {
  maybe_comma();
  out_.append(format_double(v));
  return *this;
}

JsonWriter& JsonWriter::value(bool v) {
  maybe_comma();
  out_.append(v ? "true" : "false");
  return *this;
}

JsonWriter& JsonWriter::value(std::int64_t v) {
  maybe_comma();
  out_.append(std::to_string(v));
  return *this;
}

JsonWriter& JsonWriter::value(std::string_view v) {
  maybe_comma();
  out_.push_back('"');
  for (char c : v) {
    switch (c) {
      case '"': out_.append("\\\""); break;
      case '\\': out_.append("\\\\"); break;
      case '\n': out_.append("\\n"); break;
      case '\t': out_.append("\\t"); break;
      case '\r': out_.append("\\r"); break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out_.append(buf);
        } else {
          out_.push_back(c);
        }
    }
  }
  out_.push_back('"');
  return *this;
}

JsonWriter& JsonWriter::value_null() {
  maybe_comma();
  out_.append("null");
  return *this;
}

JsonWriter& JsonWriter::raw_members(std::string_view fragment) {
  if (fragment.empty()) return *this;
  maybe_comma();
  out_.append(fragment);
  return *this;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t Rng::splitmix() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() { return splitmix(); }

double Rng::next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::size_t Rng::next_index(std::size_t n) {
  if (n == 0) return 0;
  return static_cast<std::size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

} // namespace hmg
