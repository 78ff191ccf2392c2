#include "neto/checkpoint.hpp"

#include <cmath>

namespace neto {

void save_checkpoint(const std::filesystem::path& path,
                     const MlpParams<double>& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write("NETO", 4);
  detail::put_scalar<std::uint32_t>(os, 1);
  detail::put_scalar<std::uint32_t>(os, static_cast<std::uint32_t>(params.depth));
  detail::put_scalar<std::uint32_t>(os, static_cast<std::uint32_t>(params.width));
  detail::put_scalar<std::uint32_t>(os,
                                    static_cast<std::uint32_t>(params.enc_freqs));
  for (int l = 0; l <= params.depth; ++l) {
    detail::put_matrix<double>(os, params.w[l]);
    detail::put_matrix<double>(os, params.b[l]);
  }
  detail::put_scalar<double>(os, params.sharpness());
  if (!os) throw FormatError("write failed for " + path.string());
}

MlpParams<double> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "NETO")
    throw FormatError("bad magic in " + path.string());
  const auto version = detail::get_scalar<std::uint32_t>(is, "version");
  if (version != 1)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version) + " in " + path.string());
  MlpParams<double> p;
  p.depth = static_cast<int>(detail::get_scalar<std::uint32_t>(is, "depth"));
  p.width = static_cast<int>(detail::get_scalar<std::uint32_t>(is, "width"));
  p.enc_freqs =
      static_cast<int>(detail::get_scalar<std::uint32_t>(is, "enc_freqs"));
  if (p.depth < 1 || p.depth > 64 || p.width < 1 || p.width > 16384 ||
      p.enc_freqs < 0 || p.enc_freqs > 64)
    throw FormatError("implausible architecture in " + path.string());
  p.w.resize(p.depth + 1);
  p.b.resize(p.depth + 1);
  for (int l = 0; l <= p.depth; ++l) {
    const int rows = l == p.depth ? 1 : p.width;
    const int cols = l == 0 ? p.in_dim() : p.width;
    p.w[l].resize(rows, cols);
    p.b[l].resize(rows);
    detail::get_matrix<double>(is, p.w[l], "weights");
    detail::get_matrix<double>(is, p.b[l], "biases");
  }
  const double s = detail::get_scalar<double>(is, "sharpness");
  if (!(s > 0.0) || !std::isfinite(s))
    throw FormatError("non-positive sharpness in " + path.string());
  p.log_s = std::log(s);
  is.peek();
  if (!is.eof()) throw FormatError("trailing bytes in " + path.string());
  return p;
}

}  // namespace neto
