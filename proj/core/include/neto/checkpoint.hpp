#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "neto/adam.hpp"
#include "neto/mlp.hpp"
#include "neto/types.hpp"

namespace neto {

/// Binary network snapshot. Layout, all little-endian:
///   "NETO" | u32 version | u32 depth | u32 width | u32 enc_freqs |
///   per layer l = 0..depth: w[l] row-major f64, then b[l] f64 |
///   f64 sharpness
/// Readers reject bad magic, unknown versions, truncation, and trailing
/// bytes with FormatError.
void save_checkpoint(const std::filesystem::path& path,
                     const MlpParams<double>& params);
MlpParams<double> load_checkpoint(const std::filesystem::path& path);

namespace detail {

template <typename T>
void put_scalar(std::ostream& os, T v) {
  static_assert(std::is_arithmetic_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
  } else {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
}

template <typename T>
T get_scalar(std::istream& is, const std::string& what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("truncated file while reading " + what);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    std::memcpy(&v, buf, sizeof(T));
  }
  return v;
}

template <typename T, typename Mat>
void put_matrix(std::ostream& os, const Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      put_scalar<T>(os, static_cast<T>(m(i, j)));
}

template <typename T, typename Mat>
void get_matrix(std::istream& is, Mat& m, const std::string& what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = get_scalar<T>(is, what);
}

}  // namespace detail

/// Full optimizer snapshot used by --resume. Stores parameters and Adam
/// moments in the trainer's native scalar type so a resumed run continues
/// from the exact bit pattern it left at.
///   "NETS" | u32 version | u32 scalar_size | u32 depth | u32 width |
///   u32 enc_freqs | i64 train_iter | i64 adam_step | params (w,b per
///   layer, then log_s) | moments (mw, vw per layer, mb, vb per layer,
///   m_logs, v_logs)
template <typename T>
void save_train_state(const std::filesystem::path& path,
                      const MlpParams<T>& p, const AdamState<T>& opt,
                      std::int64_t train_iter) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write("NETS", 4);
  detail::put_scalar<std::uint32_t>(os, 1);
  detail::put_scalar<std::uint32_t>(os, sizeof(T));
  detail::put_scalar<std::uint32_t>(os, static_cast<std::uint32_t>(p.depth));
  detail::put_scalar<std::uint32_t>(os, static_cast<std::uint32_t>(p.width));
  detail::put_scalar<std::uint32_t>(os,
                                    static_cast<std::uint32_t>(p.enc_freqs));
  detail::put_scalar<std::int64_t>(os, train_iter);
  detail::put_scalar<std::int64_t>(os, opt.step);
  for (int l = 0; l <= p.depth; ++l) {
    detail::put_matrix<T>(os, p.w[l]);
    detail::put_matrix<T>(os, p.b[l]);
  }
  detail::put_scalar<T>(os, p.log_s);
  for (int l = 0; l <= p.depth; ++l) {
    detail::put_matrix<T>(os, opt.mw[l]);
    detail::put_matrix<T>(os, opt.vw[l]);
    detail::put_matrix<T>(os, opt.mb[l]);
    detail::put_matrix<T>(os, opt.vb[l]);
  }
  detail::put_scalar<T>(os, opt.m_logs);
  detail::put_scalar<T>(os, opt.v_logs);
  if (!os) throw FormatError("write failed for " + path.string());
}

template <typename T>
void load_train_state(const std::filesystem::path& path, MlpParams<T>& p,
                      AdamState<T>& opt, std::int64_t& train_iter) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "NETS")
    throw FormatError("bad magic in " + path.string());
  if (detail::get_scalar<std::uint32_t>(is, "version") != 1)
    throw FormatError("unsupported train state version in " + path.string());
  if (detail::get_scalar<std::uint32_t>(is, "scalar size") != sizeof(T))
    throw FormatError("train state scalar type mismatch in " + path.string());
  const int depth = static_cast<int>(detail::get_scalar<std::uint32_t>(is, "depth"));
  const int width = static_cast<int>(detail::get_scalar<std::uint32_t>(is, "width"));
  const int freqs = static_cast<int>(detail::get_scalar<std::uint32_t>(is, "enc_freqs"));
  if (depth < 1 || depth > 64 || width < 1 || width > 16384 || freqs < 0 ||
      freqs > 64)
    throw FormatError("implausible architecture in " + path.string());
  train_iter = detail::get_scalar<std::int64_t>(is, "train iter");
  p.depth = depth;
  p.width = width;
  p.enc_freqs = freqs;
  p.w.assign(depth + 1, {});
  p.b.assign(depth + 1, {});
  for (int l = 0; l <= depth; ++l) {
    const int rows = l == depth ? 1 : width;
    const int cols = l == 0 ? p.in_dim() : width;
    p.w[l].resize(rows, cols);
    p.b[l].resize(rows);
  }
  opt = AdamState<T>::zeros_like(p);
  opt.step = detail::get_scalar<std::int64_t>(is, "adam step");
  for (int l = 0; l <= depth; ++l) {
    detail::get_matrix<T>(is, p.w[l], "weights");
    detail::get_matrix<T>(is, p.b[l], "biases");
  }
  p.log_s = detail::get_scalar<T>(is, "sharpness");
  for (int l = 0; l <= depth; ++l) {
    detail::get_matrix<T>(is, opt.mw[l], "adam m");
    detail::get_matrix<T>(is, opt.vw[l], "adam v");
    detail::get_matrix<T>(is, opt.mb[l], "adam m bias");
    detail::get_matrix<T>(is, opt.vb[l], "adam v bias");
  }
  opt.m_logs = detail::get_scalar<T>(is, "adam m log_s");
  opt.v_logs = detail::get_scalar<T>(is, "adam v log_s");
  is.peek();
  if (!is.eof())
    throw FormatError("trailing bytes in " + path.string());
}

}  // namespace neto
