#include "predec/encode.hpp"

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace predec {

void put_channel(TensorVolume& t, int c, const BitVolume& vol) {
  if (vol.D != t.D || vol.T > t.T) throw std::invalid_argument("channel dimension mismatch");
  for (int r = 0; r < t.D; ++r)
    for (int col = 0; col < t.D; ++col)
      for (int k = 0; k < vol.T; ++k) t.at(c, r, col, k) = vol.at(r, col, k);
}

TensorVolume build_input(const ShotRecord& rec, const LatticeGeometry& geom) {
  if (rec.D != geom.grid_dim() || rec.detectors_x.D != rec.D || rec.detectors_x.T != rec.d_m ||
      rec.detectors_z.T != rec.d_m)
    throw std::invalid_argument("shot does not match geometry");
  TensorVolume t(4, rec.D, rec.d_m);
  put_channel(t, 0, rec.detectors_x);
  put_channel(t, 1, rec.detectors_z);
  const auto pc = present_channels(geom, rec.basis, rec.d_m);
  const std::size_t n = t.channel_size();
  std::copy(pc.x.begin(), pc.x.end(), t.v.begin() + 2 * n);
  std::copy(pc.z.begin(), pc.z.end(), t.v.begin() + 3 * n);
  return t;
}

TensorVolume labels_tensor(const LabelVolume& vol) {
  TensorVolume t(4, vol.z.D, vol.z.T);
  put_channel(t, 0, vol.z);
  put_channel(t, 1, vol.x);
  put_channel(t, 2, vol.time_x);
  put_channel(t, 3, vol.time_z);
  return t;
}

TensorVolume build_labels(const ShotRecord& rec, const LatticeGeometry& geom, bool canonical,
                          const CanonOptions& opt) {
  if (rec.D != geom.grid_dim() || rec.labels_space_z.T != rec.d_m || rec.labels_time_x.T != rec.d_m - 1)
    throw std::invalid_argument("shot does not match geometry");
  LabelVolume vol = label_volume_from(rec);
  if (canonical) canonicalize(vol, geom, opt);
  return labels_tensor(vol);
}

void write_tensor_binary(std::ostream& os, const TensorVolume& t) {
  os.write("PDTV", 4);
  const std::uint32_t hdr[4] = {1, static_cast<std::uint32_t>(t.C), static_cast<std::uint32_t>(t.D),
                                static_cast<std::uint32_t>(t.T)};
  os.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  os.write(reinterpret_cast<const char*>(t.v.data()), static_cast<std::streamsize>(t.v.size() * sizeof(double)));
}

TensorVolume read_tensor_binary(std::istream& is) {
  char magic[4];
  std::uint32_t hdr[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "PDTV") throw std::runtime_error("not a tensor file");
  if (!is.read(reinterpret_cast<char*>(hdr), sizeof hdr) || hdr[0] != 1)
    throw std::runtime_error("unsupported tensor file");
  TensorVolume t(static_cast<int>(hdr[1]), static_cast<int>(hdr[2]), static_cast<int>(hdr[3]));
  if (!is.read(reinterpret_cast<char*>(t.v.data()), static_cast<std::streamsize>(t.v.size() * sizeof(double))))
    throw std::runtime_error("truncated tensor file");
  return t;
}

}  // namespace predec
