#include "dengue/snapshot.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "dengue/error.hpp"

namespace dengue {

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'N', 'G', 'S', 'N', 'A', 'P', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), b.size());
}

void put_f64(std::ostream& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), b.size());
}

void read_exact(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw Error(ErrorKind::Io, "truncated parameter snapshot");
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  read_exact(in, reinterpret_cast<char*>(b.data()), b.size());
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  read_exact(in, reinterpret_cast<char*>(b.data()), b.size());
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void write_snapshot(std::ostream& out, std::span<const Parameter> params) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.value.rows()));
    put_u32(out, static_cast<std::uint32_t>(p.value.cols()));
  }
  for (const auto& p : params)
    for (double v : p.value.data()) put_f64(out, v);
  if (!out) throw Error(ErrorKind::Io, "failed writing parameter snapshot");
}

std::vector<Matrix> read_snapshot(std::istream& in) {
  std::array<char, 8> magic{};
  read_exact(in, magic.data(), magic.size());
  if (magic != kMagic) throw Error(ErrorKind::Io, "not a parameter snapshot (bad magic)");
  const std::uint32_t n = get_u32(in);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  shapes.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto r = get_u32(in);
    const auto c = get_u32(in);
    shapes.emplace_back(r, c);
  }
  std::vector<Matrix> out;
  out.reserve(n);
  for (const auto& [r, c] : shapes) {
    Matrix m(r, c);
    for (double& v : m.data()) v = get_f64(in);
    out.push_back(std::move(m));
  }
  return out;
}

void restore_snapshot(std::span<Parameter> params, const std::vector<Matrix>& values) {
  if (values.size() != params.size()) {
    throw Error(ErrorKind::Shape, "snapshot holds " + std::to_string(values.size()) + " tensors, model expects " +
                                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!values[i].same_shape(params[i].value)) {
      throw Error(ErrorKind::Shape, "snapshot tensor " + std::to_string(i) + " is " + values[i].shape_string() +
                                        ", '" + params[i].name + "' is " + params[i].value.shape_string());
    }
    params[i].value = values[i];
  }
}

}  // namespace dengue
