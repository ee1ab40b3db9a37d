// Copyright 2026 The ModelWarden Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "modelwarden/pickle/program.h"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>

namespace modelwarden::pickle {

TruncatedProgram::TruncatedProgram(std::size_t position)
    : ParseError("pickle truncated inside opcode at byte " + std::to_string(position)),
      position_(position) {}

UnknownOpcode::UnknownOpcode(std::size_t position, std::uint8_t byte)
    : ParseError("unknown pickle opcode 0x" + hex64(byte).substr(14) + " at byte " +
                 std::to_string(position)),
      position_(position),
      byte_(byte) {}

namespace {

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Decodes one UTF-8 sequence; returns false on malformed input.
bool next_utf8(std::string_view s, std::size_t& i, std::uint32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  int extra = 0;
  if (b0 < 0x80) {
    cp = b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    cp = b0 & 0x1F;
    extra = 1;
  } else if ((b0 & 0xF0) == 0xE0) {
    cp = b0 & 0x0F;
    extra = 2;
  } else if ((b0 & 0xF8) == 0xF0) {
    cp = b0 & 0x07;
    extra = 3;
  } else {
    return false;
  }
  if (i + extra >= s.size() && extra > 0) return false;
  for (int k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return false;
    cp = (cp << 6) | (b & 0x3F);
  }
  i += 1 + extra;
  return true;
}

std::string latin1_to_utf8(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  for (unsigned char c : bytes) append_utf8(out, c);
  return out;
}

std::string utf8_to_latin1(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size();) {
    std::uint32_t cp = 0;
    if (!next_utf8(text, i, cp) || cp > 0xFF) {
      throw Error("text is not representable in latin-1");
    }
    out += static_cast<char>(cp);
  }
  return out;
}

std::string raw_unicode_escape_decode(std::string_view bytes) {
  std::string out;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    if (c == '\\' && i + 1 < bytes.size() && (bytes[i + 1] == 'u' || bytes[i + 1] == 'U')) {
      const std::size_t width = bytes[i + 1] == 'u' ? 4 : 8;
      if (i + 2 + width <= bytes.size()) {
        std::uint32_t cp = 0;
        const auto digits = bytes.substr(i + 2, width);
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + width, cp, 16);
        if (ec == std::errc() && p == digits.data() + width) {
          append_utf8(out, cp);
          i += 1 + width;
          continue;
        }
      }
    }
    append_utf8(out, c);
  }
  return out;
}

std::string raw_unicode_escape_encode(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size();) {
    std::uint32_t cp = 0;
    if (!next_utf8(text, i, cp)) throw Error("invalid UTF-8 in UNICODE argument");
    char buf[16];
    if (cp >= 0x10000) {
      std::snprintf(buf, sizeof buf, "\\U%08x", cp);
      out += buf;
    } else if (cp >= 0x100 || cp == 0 || cp == '\\' || cp == '\n' || cp == '\r' || cp == 0x1a) {
      std::snprintf(buf, sizeof buf, "\\u%04x", cp);
      out += buf;
    } else {
      out += static_cast<char>(cp);
    }
  }
  return out;
}

// Python repr(float): shortest round-trip digits, fixed notation for
// exponents in [-4, 16), otherwise d.ddde+XX.
std::string python_float_repr(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::scientific);
  std::string sci(buf.data(), end);
  std::string sign;
  if (sci.front() == '-') {
    sign = "-";
    sci.erase(0, 1);
  }
  const auto epos = sci.find('e');
  std::string mantissa = sci.substr(0, epos);
  const int exponent = std::stoi(sci.substr(epos + 1));
  std::string digits;
  for (char c : mantissa) {
    if (c != '.') digits += c;
  }
  if (exponent >= -4 && exponent < 16) {
    std::string out;
    if (exponent < 0) {
      out = "0." + std::string(static_cast<std::size_t>(-exponent - 1), '0') + digits;
    } else {
      const auto int_len = static_cast<std::size_t>(exponent + 1);
      if (digits.size() <= int_len) {
        out = digits + std::string(int_len - digits.size(), '0') + ".0";
      } else {
        out = digits.substr(0, int_len) + "." + digits.substr(int_len);
      }
    }
    return sign + out;
  }
  std::string out = digits.substr(0, 1);
  if (digits.size() > 1) out += "." + digits.substr(1);
  char ebuf[16];
  std::snprintf(ebuf, sizeof ebuf, "e%c%02d", exponent < 0 ? '-' : '+', std::abs(exponent));
  return sign + out + ebuf;
}

// Little-endian two's complement to decimal (arbitrary width).
std::string long_bytes_to_decimal(std::string_view bytes, bool& fits,
                                  std::int64_t& small) {
  fits = bytes.size() <= 8;
  if (bytes.empty()) {
    small = 0;
    return "0";
  }
  const bool negative = (static_cast<unsigned char>(bytes.back()) & 0x80) != 0;
  if (fits) {
    std::uint64_t u = negative ? ~std::uint64_t{0} : 0;
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      u &= ~(std::uint64_t{0xFF} << (8 * i));
      u |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
    }
    small = static_cast<std::int64_t>(u);
    return std::to_string(small);
  }
  // Magnitude in little-endian base 256.
  std::vector<unsigned> mag(bytes.begin(), bytes.end());
  for (auto& b : mag) b &= 0xFF;
  if (negative) {
    unsigned carry = 1;
    for (auto& b : mag) {
      b = (~b & 0xFF) + carry;
      carry = b >> 8;
      b &= 0xFF;
    }
  }
  std::string digits;
  while (std::any_of(mag.begin(), mag.end(), [](unsigned b) { return b != 0; })) {
    unsigned rem = 0;
    for (std::size_t i = mag.size(); i-- > 0;) {
      const unsigned cur = (rem << 8) | mag[i];
      mag[i] = cur / 10;
      rem = cur % 10;
    }
    digits += static_cast<char>('0' + rem);
  }
  std::reverse(digits.begin(), digits.end());
  return (negative ? "-" : "") + digits;
}

// Drops redundant sign-extension bytes, as pickle.encode_long does.
void trim_sign_extension(std::string& out) {
  while (out.size() > 1) {
    const auto last = static_cast<unsigned char>(out.back());
    const auto prev = static_cast<unsigned char>(out[out.size() - 2]);
    if ((last == 0x00 && (prev & 0x80) == 0) || (last == 0xFF && (prev & 0x80) != 0)) {
      out.pop_back();
    } else {
      break;
    }
  }
}

std::string encode_long_bytes(std::int64_t v) {
  if (v == 0) return {};
  std::string out;
  auto u = static_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out += static_cast<char>((u >> (8 * i)) & 0xFF);
  trim_sign_extension(out);
  return out;
}

std::string encode_long_bytes(std::string_view decimal) {
  const bool negative = decimal.starts_with('-');
  if (negative || decimal.starts_with('+')) decimal.remove_prefix(1);
  if (decimal.empty()) throw Error("empty integer literal");
  std::vector<unsigned> mag;  // little-endian base 256
  for (char c : decimal) {
    if (c < '0' || c > '9') throw Error("bad integer literal");
    unsigned carry = static_cast<unsigned>(c - '0');
    for (auto& b : mag) {
      const unsigned cur = b * 10 + carry;
      b = cur & 0xFF;
      carry = cur >> 8;
    }
    if (carry != 0) mag.push_back(carry);
  }
  if (mag.empty()) return {};
  mag.push_back(0);
  if (negative) {
    unsigned carry = 1;
    for (auto& b : mag) {
      b = (~b & 0xFF) + carry;
      carry = b >> 8;
      b &= 0xFF;
    }
  }
  std::string out(mag.begin(), mag.end());
  trim_sign_extension(out);
  return out;
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> data, std::size_t pos) : data_(data), pos_(pos) {}

  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ >= data_.size(); }

  std::string_view take(std::size_t n, std::size_t op_pos) {
    if (n > data_.size() - pos_) throw TruncatedProgram(op_pos);
    std::string_view out(reinterpret_cast<const char*>(data_.data()) + pos_, n);
    pos_ += n;
    return out;
  }

  // Line without its terminating newline.
  std::string_view line(std::size_t op_pos) {
    const auto* begin = data_.data() + pos_;
    const auto* end = data_.data() + data_.size();
    const auto* nl = std::find(begin, end, std::uint8_t{'\n'});
    if (nl == end) throw TruncatedProgram(op_pos);
    std::string_view out(reinterpret_cast<const char*>(begin),
                         static_cast<std::size_t>(nl - begin));
    pos_ += out.size() + 1;
    return out;
  }

  std::uint64_t le(std::size_t n, std::size_t op_pos) {
    const auto bytes = take(n, op_pos);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
    }
    return v;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_;
};

std::string unquote_stringnl(std::string_view s) {
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 >= s.size()) {
      out += s[i];
      continue;
    }
    const char e = s[++i];
    switch (e) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      case '\\': out += '\\'; break;
      case '\'': out += '\''; break;
      case '"': out += '"'; break;
      case 'x':
        if (i + 3 <= s.size()) {
          unsigned v = 0;
          auto [p, ec] = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
          if (ec == std::errc() && p == s.data() + i + 3) {
            out += static_cast<char>(v);
            i += 2;
            break;
          }
        }
        out += "\\x";
        break;
      default:
        out += '\\';
        out += e;
    }
  }
  return latin1_to_utf8(out);
}

OpArg decode_decimal_short(std::string_view text) {
  if (text == "00") return OpArg::of_bool(false);
  if (text == "01") return OpArg::of_bool(true);
  std::int64_t v = 0;
  auto t = trim(text);
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) {
    throw ParseError("invalid decimal argument: " + std::string(text));
  }
  return OpArg::of_int(v);
}

Opcode decode_one(Reader& r, std::size_t op_pos, const OpcodeInfo& info) {
  Opcode op;
  op.position = op_pos;
  op.info = &info;
  const std::size_t arg_begin = r.pos();
  switch (info.arg) {
    case ArgKind::kNone:
      break;
    case ArgKind::kUint1:
      op.arg = OpArg::of_int(static_cast<std::int64_t>(r.le(1, op_pos)));
      break;
    case ArgKind::kUint2:
      op.arg = OpArg::of_int(static_cast<std::int64_t>(r.le(2, op_pos)));
      break;
    case ArgKind::kInt4:
      op.arg = OpArg::of_int(static_cast<std::int32_t>(r.le(4, op_pos)));
      break;
    case ArgKind::kUint4:
      op.arg = OpArg::of_int(static_cast<std::int64_t>(r.le(4, op_pos)));
      break;
    case ArgKind::kUint8:
      op.arg = OpArg::of_int(static_cast<std::int64_t>(r.le(8, op_pos)));
      break;
    case ArgKind::kDecimalnlShort:
      op.arg = decode_decimal_short(r.line(op_pos));
      break;
    case ArgKind::kDecimalnlLong: {
      std::string_view t = r.line(op_pos);
      if (t.ends_with('L')) t.remove_suffix(1);
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec == std::errc() && p == t.data() + t.size()) {
        op.arg = OpArg::of_int(v);
      } else {
        op.arg = {OpArg::Kind::kBigInt, 0, 0.0, std::string(t)};
      }
      break;
    }
    case ArgKind::kFloatnl: {
      const std::string t(r.line(op_pos));
      op.arg = OpArg::of_float(std::strtod(t.c_str(), nullptr));
      break;
    }
    case ArgKind::kFloat8: {
      const auto b = r.take(8, op_pos);
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits = (bits << 8) | static_cast<unsigned char>(b[i]);
      op.arg = OpArg::of_float(std::bit_cast<double>(bits));
      break;
    }
    case ArgKind::kLong1:
    case ArgKind::kLong4: {
      std::int64_t n = info.arg == ArgKind::kLong1
                           ? static_cast<std::int64_t>(r.le(1, op_pos))
                           : static_cast<std::int32_t>(r.le(4, op_pos));
      if (n < 0) throw ParseError("LONG4 byte count < 0");
      const auto bytes = r.take(static_cast<std::size_t>(n), op_pos);
      bool fits = false;
      std::int64_t small = 0;
      std::string dec = long_bytes_to_decimal(bytes, fits, small);
      op.arg = fits ? OpArg::of_int(small) : OpArg{OpArg::Kind::kBigInt, 0, 0.0, dec};
      break;
    }
    case ArgKind::kStringnl:
      op.arg = OpArg::of_text(unquote_stringnl(r.line(op_pos)));
      break;
    case ArgKind::kStringnlNoescape:
      op.arg = OpArg::of_text(latin1_to_utf8(r.line(op_pos)));
      break;
    case ArgKind::kStringnlNoescapePair: {
      std::string module = latin1_to_utf8(r.line(op_pos));
      std::string name = latin1_to_utf8(r.line(op_pos));
      op.arg = OpArg::of_text(module + " " + name);
      break;
    }
    case ArgKind::kString1:
    case ArgKind::kString4: {
      std::int64_t n = info.arg == ArgKind::kString1
                           ? static_cast<std::int64_t>(r.le(1, op_pos))
                           : static_cast<std::int32_t>(r.le(4, op_pos));
      if (n < 0) throw ParseError("BINSTRING length < 0");
      op.arg = OpArg::of_text(latin1_to_utf8(r.take(static_cast<std::size_t>(n), op_pos)));
      break;
    }
    case ArgKind::kBytes1:
    case ArgKind::kBytes4:
    case ArgKind::kBytes8: {
      const std::size_t width =
          info.arg == ArgKind::kBytes1 ? 1 : (info.arg == ArgKind::kBytes4 ? 4 : 8);
      const std::uint64_t n = r.le(width, op_pos);
      op.arg = OpArg::of_bytes(std::string(r.take(n, op_pos)));
      break;
    }
    case ArgKind::kUnicodestringnl:
      op.arg = OpArg::of_text(raw_unicode_escape_decode(r.line(op_pos)));
      break;
    case ArgKind::kUnicodestring1:
    case ArgKind::kUnicodestring4:
    case ArgKind::kUnicodestring8: {
      const std::size_t width = info.arg == ArgKind::kUnicodestring1
                                    ? 1
                                    : (info.arg == ArgKind::kUnicodestring4 ? 4 : 8);
      const std::uint64_t n = r.le(width, op_pos);
      op.arg = OpArg::of_text(std::string(r.take(n, op_pos)));
      break;
    }
  }
  (void)arg_begin;
  return op;
}

}  // namespace

PickleProgram disassemble(std::span<const std::uint8_t> data) {
  PickleProgram program;
  Reader reader(data, 0);
  int max_proto = 0;
  while (!reader.at_end()) {
    const std::size_t op_pos = reader.pos();
    const std::uint8_t code = data[op_pos];
    const OpcodeInfo* info = find_opcode(code);
    if (info == nullptr) throw UnknownOpcode(op_pos, code);
    reader.take(1, op_pos);
    const std::size_t arg_begin = reader.pos();
    Opcode op = decode_one(reader, op_pos, *info);
    op.raw_arg.assign(data.begin() + static_cast<std::ptrdiff_t>(arg_begin),
                      data.begin() + static_cast<std::ptrdiff_t>(reader.pos()));
    max_proto = std::max(max_proto, info->protocol);
    const bool stop = info->name == "STOP";
    program.opcodes.push_back(std::move(op));
    if (stop) {
      program.ends_with_stop = true;
      program.trailing_bytes = data.size() - reader.pos();
      break;
    }
  }
  if (!program.opcodes.empty() && program.opcodes.front().mnemonic() == "PROTO") {
    program.protocol = static_cast<int>(program.opcodes.front().arg.integer);
  } else {
    program.protocol = max_proto;
  }
  return program;
}

Bytes assemble(std::span<const Opcode> opcodes) {
  Bytes out;
  for (const auto& op : opcodes) {
    out.push_back(op.code());
    out.insert(out.end(), op.raw_arg.begin(), op.raw_arg.end());
  }
  return out;
}

namespace {

void put_le(Bytes& out, std::uint64_t v, std::size_t width) {
  for (std::size_t i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_str(Bytes& out, std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }

std::int64_t require_int(const OpArg& arg, std::string_view op) {
  if (arg.kind != OpArg::Kind::kInt && arg.kind != OpArg::Kind::kBool) {
    throw Error(std::string(op) + ": integer argument required");
  }
  return arg.integer;
}

void check_range(std::int64_t v, std::int64_t lo, std::int64_t hi, std::string_view op) {
  if (v < lo || v > hi) throw Error(std::string(op) + ": argument out of range");
}

}  // namespace

Opcode make_opcode(const OpcodeInfo& info, OpArg arg) {
  Opcode op;
  op.info = &info;
  Bytes& raw = op.raw_arg;
  const std::string_view name = info.name;
  switch (info.arg) {
    case ArgKind::kNone:
      arg = OpArg::none();
      break;
    case ArgKind::kUint1: {
      const auto v = require_int(arg, name);
      check_range(v, 0, 0xFF, name);
      put_le(raw, static_cast<std::uint64_t>(v), 1);
      break;
    }
    case ArgKind::kUint2: {
      const auto v = require_int(arg, name);
      check_range(v, 0, 0xFFFF, name);
      put_le(raw, static_cast<std::uint64_t>(v), 2);
      break;
    }
    case ArgKind::kInt4: {
      const auto v = require_int(arg, name);
      check_range(v, INT32_MIN, INT32_MAX, name);
      put_le(raw, static_cast<std::uint32_t>(static_cast<std::int32_t>(v)), 4);
      break;
    }
    case ArgKind::kUint4: {
      const auto v = require_int(arg, name);
      check_range(v, 0, 0xFFFFFFFFLL, name);
      put_le(raw, static_cast<std::uint64_t>(v), 4);
      break;
    }
    case ArgKind::kUint8: {
      const auto v = require_int(arg, name);
      check_range(v, 0, INT64_MAX, name);
      put_le(raw, static_cast<std::uint64_t>(v), 8);
      break;
    }
    case ArgKind::kDecimalnlShort:
      if (arg.kind == OpArg::Kind::kBool) {
        put_str(raw, arg.integer ? "01" : "00");
      } else {
        put_str(raw, std::to_string(require_int(arg, name)));
      }
      raw.push_back('\n');
      break;
    case ArgKind::kDecimalnlLong:
      put_str(raw, arg.kind == OpArg::Kind::kBigInt ? arg.data
                                                    : std::to_string(require_int(arg, name)));
      put_str(raw, "L\n");
      break;
    case ArgKind::kFloatnl:
      put_str(raw, python_float_repr(arg.real));
      raw.push_back('\n');
      break;
    case ArgKind::kFloat8: {
      const auto bits = std::bit_cast<std::uint64_t>(arg.real);
      for (int i = 7; i >= 0; --i) raw.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
      break;
    }
    case ArgKind::kLong1:
    case ArgKind::kLong4: {
      const std::string b = arg.kind == OpArg::Kind::kBigInt
                                ? encode_long_bytes(arg.data)
                                : encode_long_bytes(require_int(arg, name));
      put_le(raw, b.size(), info.arg == ArgKind::kLong1 ? 1 : 4);
      put_str(raw, b);
      break;
    }
    case ArgKind::kStringnl: {
      const std::string latin = utf8_to_latin1(arg.data);
      raw.push_back('\'');
      for (char c : latin) {
        if (c == '\\' || c == '\'') {
          raw.push_back('\\');
          raw.push_back(static_cast<std::uint8_t>(c));
        } else if (c == '\n') {
          put_str(raw, "\\n");
        } else {
          raw.push_back(static_cast<std::uint8_t>(c));
        }
      }
      put_str(raw, "'\n");
      break;
    }
    case ArgKind::kStringnlNoescape:
      put_str(raw, utf8_to_latin1(arg.data));
      raw.push_back('\n');
      break;
    case ArgKind::kStringnlNoescapePair: {
      const auto sp = arg.data.find(' ');
      if (sp == std::string::npos) throw Error(std::string(name) + ": expected 'module name'");
      put_str(raw, utf8_to_latin1(arg.data.substr(0, sp)));
      raw.push_back('\n');
      put_str(raw, utf8_to_latin1(arg.data.substr(sp + 1)));
      raw.push_back('\n');
      break;
    }
    case ArgKind::kString1:
    case ArgKind::kString4: {
      const std::string latin = utf8_to_latin1(arg.data);
      if (info.arg == ArgKind::kString1 && latin.size() > 0xFF) throw Error("SHORT_BINSTRING too long");
      put_le(raw, latin.size(), info.arg == ArgKind::kString1 ? 1 : 4);
      put_str(raw, latin);
      break;
    }
    case ArgKind::kBytes1:
    case ArgKind::kBytes4:
    case ArgKind::kBytes8:
    case ArgKind::kUnicodestring1:
    case ArgKind::kUnicodestring4:
    case ArgKind::kUnicodestring8: {
      const bool one = info.arg == ArgKind::kBytes1 || info.arg == ArgKind::kUnicodestring1;
      const bool four = info.arg == ArgKind::kBytes4 || info.arg == ArgKind::kUnicodestring4;
      if (one && arg.data.size() > 0xFF) throw Error(std::string(name) + ": argument too long");
      if (four && arg.data.size() > 0xFFFFFFFFULL) throw Error(std::string(name) + ": argument too long");
      put_le(raw, arg.data.size(), one ? 1 : (four ? 4 : 8));
      put_str(raw, arg.data);
      break;
    }
    case ArgKind::kUnicodestringnl:
      put_str(raw, raw_unicode_escape_encode(arg.data));
      raw.push_back('\n');
      break;
  }
  op.arg = std::move(arg);
  return op;
}

Opcode make_opcode(std::string_view mnemonic, OpArg arg) {
  return make_opcode(opcode(mnemonic), std::move(arg));
}

Opcode make_put(std::uint64_t index) {
  if (index <= 0xFF) return make_opcode("BINPUT", OpArg::of_int(static_cast<std::int64_t>(index)));
  return make_opcode("LONG_BINPUT", OpArg::of_int(static_cast<std::int64_t>(index)));
}

Opcode make_get(std::uint64_t index) {
  if (index <= 0xFF) return make_opcode("BINGET", OpArg::of_int(static_cast<std::int64_t>(index)));
  return make_opcode("LONG_BINGET", OpArg::of_int(static_cast<std::int64_t>(index)));
}

bool is_put(const Opcode& op) {
  const auto m = op.mnemonic();
  return m == "PUT" || m == "BINPUT" || m == "LONG_BINPUT";
}

bool is_get(const Opcode& op) {
  const auto m = op.mnemonic();
  return m == "GET" || m == "BINGET" || m == "LONG_BINGET";
}

bool is_memoize(const Opcode& op) { return op.mnemonic() == "MEMOIZE"; }

std::uint64_t memo_index(const Opcode& op) {
  return static_cast<std::uint64_t>(op.arg.integer);
}

Opcode with_memo_index(const Opcode& op, std::uint64_t index) {
  const auto m = op.mnemonic();
  if (m == "PUT" || m == "GET") {
    return make_opcode(*op.info, OpArg::of_int(static_cast<std::int64_t>(index)));
  }
  if (is_put(op)) return make_put(index);
  if (is_get(op)) return make_get(index);
  throw Error("with_memo_index: not a memo reference: " + std::string(m));
}

std::string python_str_repr(std::string_view utf8) {
  const bool has_single = utf8.find('\'') != std::string_view::npos;
  const bool has_double = utf8.find('"') != std::string_view::npos;
  const char quote = (has_single && !has_double) ? '"' : '\'';
  std::string out(1, quote);
  for (std::size_t i = 0; i < utf8.size();) {
    const std::size_t start = i;
    std::uint32_t cp = 0;
    if (!next_utf8(utf8, i, cp)) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "\\x%02x", static_cast<unsigned char>(utf8[start]));
      out += buf;
      i = start + 1;
      continue;
    }
    if (cp == static_cast<std::uint32_t>(quote) || cp == '\\') {
      out += '\\';
      out += static_cast<char>(cp);
    } else if (cp == '\n') {
      out += "\\n";
    } else if (cp == '\r') {
      out += "\\r";
    } else if (cp == '\t') {
      out += "\\t";
    } else if (cp < 0x20 || (cp >= 0x7F && cp <= 0xA0) || cp == 0xAD) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "\\x%02x", cp);
      out += buf;
    } else {
      out.append(utf8.substr(start, i - start));
    }
  }
  out += quote;
  return out;
}

std::string python_bytes_repr(std::string_view bytes) {
  const bool has_single = bytes.find('\'') != std::string_view::npos;
  const bool has_double = bytes.find('"') != std::string_view::npos;
  const char quote = (has_single && !has_double) ? '"' : '\'';
  std::string out = "b";
  out += quote;
  for (unsigned char c : bytes) {
    if (c == static_cast<unsigned char>(quote) || c == '\\') {
      out += '\\';
      out += static_cast<char>(c);
    } else if (c == '\n') {
      out += "\\n";
    } else if (c == '\r') {
      out += "\\r";
    } else if (c == '\t') {
      out += "\\t";
    } else if (c < 0x20 || c >= 0x7F) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "\\x%02x", c);
      out += buf;
    } else {
      out += static_cast<char>(c);
    }
  }
  out += quote;
  return out;
}

namespace {

std::string arg_repr(const OpArg& arg) {
  switch (arg.kind) {
    case OpArg::Kind::kNone: return {};
    case OpArg::Kind::kInt: return std::to_string(arg.integer);
    case OpArg::Kind::kBool: return arg.integer ? "True" : "False";
    case OpArg::Kind::kFloat: return python_float_repr(arg.real);
    case OpArg::Kind::kText: return python_str_repr(arg.data);
    case OpArg::Kind::kBytes: return python_bytes_repr(arg.data);
    case OpArg::Kind::kBigInt: return arg.data;
  }
  return {};
}

std::string code_repr(std::uint8_t code) {
  if (code >= 0x20 && code < 0x7F && code != '\\' && code != '\'') {
    return std::string(1, static_cast<char>(code));
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "\\x%02x", code);
  return buf;
}

}  // namespace

std::string format_disassembly(const PickleProgram& program) {
  std::string out;
  // Mark positions, and how many values sit above each mark.
  std::vector<std::size_t> markstack;
  std::vector<long> saved_depth;
  long depth = 0;
  std::set<std::uint64_t> memo;
  int max_proto = 0;
  char buf[32];
  for (const auto& op : program.opcodes) {
    std::string code = code_repr(op.code());
    code.resize(std::max<std::size_t>(code.size(), 4), ' ');
    std::string line = code + " " + std::string(markstack.size() * 4, ' ') +
                       std::string(op.mnemonic());
    max_proto = std::max(max_proto, op.info->protocol);

    std::string markmsg;
    const StackEffect effect = stack_effect(*op.info);
    const bool pops_mark = op.info->pops_mark ||
                           (op.mnemonic() == "POP" && depth == 0 && !markstack.empty());
    if (pops_mark && !markstack.empty()) {
      markmsg = "(MARK at " + std::to_string(markstack.back()) + ")";
      markstack.pop_back();
      depth = saved_depth.back();
      saved_depth.pop_back();
      if (op.mnemonic() != "POP") depth = std::max(0L, depth - effect.pops) + effect.pushes;
    } else if (op.mnemonic() == "MARK") {
      markstack.push_back(op.position);
      saved_depth.push_back(depth);
      depth = 0;
    } else {
      depth = std::max(0L, depth - effect.pops) + effect.pushes;
    }
    if (is_memoize(op)) {
      const std::uint64_t idx = memo.size();
      markmsg = "(as " + std::to_string(idx) + ")";
      memo.insert(idx);
    } else if (is_put(op)) {
      memo.insert(memo_index(op));
    }

    const bool has_arg = op.info->arg != ArgKind::kNone;
    if (has_arg || !markmsg.empty()) {
      if (op.mnemonic().size() < 10) line += std::string(10 - op.mnemonic().size(), ' ');
      if (has_arg) line += " " + arg_repr(op.arg);
      if (!markmsg.empty()) line += " " + markmsg;
    }
    std::snprintf(buf, sizeof buf, "%5zu: ", op.position);
    out += buf;
    out += line;
    out += '\n';
  }
  out += "highest protocol among opcodes = " + std::to_string(max_proto) + "\n";
  return out;
}

}  // namespace modelwarden::pickle
