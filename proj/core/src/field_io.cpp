#include "spde/field_io.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace spde {

namespace {

constexpr char kFieldMagic[8] = {'S', 'P', 'D', 'E', 'F', 'L', 'D', '1'};

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("field read: truncated stream");
  return value;
}

}  // namespace

std::string field_to_json(const SpectralField& field) {
  nlohmann::json doc;
  doc["cutoff"] = field.space()->cutoff();
  auto& modes = doc["modes"];
  modes = nlohmann::json::array();
  const GalerkinSpace& space = *field.space();
  for (std::size_t m = 0; m < space.mode_count(); ++m) {
    const WaveVector k = space.modes()[m];
    const Vec3c u = field.coeff(m);
    modes.push_back({{"k", {k.x, k.y, k.z}},
                     {"re", {u[0].real(), u[1].real(), u[2].real()}},
                     {"im", {u[0].imag(), u[1].imag(), u[2].imag()}}});
  }
  return doc.dump();
}

SpectralField field_from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  SpectralField field(build_space(doc.at("cutoff").get<int>()));
  for (const auto& rec : doc.at("modes")) {
    const WaveVector k{rec.at("k")[0].get<int>(), rec.at("k")[1].get<int>(),
                       rec.at("k")[2].get<int>()};
    const std::size_t i = field.space()->index_of(k);
    if (i == GalerkinSpace::npos) {
      throw std::invalid_argument("field_from_json: mode outside declared cutoff");
    }
    Vec3c u;
    for (int c = 0; c < 3; ++c) {
      u[c] = Complex(rec.at("re")[c].get<double>(), rec.at("im")[c].get<double>());
    }
    field.set_coeff(i, u);
  }
  return field;
}

void write_field_binary(std::ostream& out, const SpectralField& field) {
  out.write(kFieldMagic, sizeof(kFieldMagic));
  write_raw<std::int32_t>(out, field.space()->cutoff());
  const GalerkinSpace& space = *field.space();
  write_raw<std::uint64_t>(out, space.mode_count());
  for (std::size_t m = 0; m < space.mode_count(); ++m) {
    const WaveVector k = space.modes()[m];
    write_raw<std::int32_t>(out, k.x);
    write_raw<std::int32_t>(out, k.y);
    write_raw<std::int32_t>(out, k.z);
    for (int c = 0; c < 3; ++c) write_raw<double>(out, field.at(m, c).real());
    for (int c = 0; c < 3; ++c) write_raw<double>(out, field.at(m, c).imag());
  }
}

SpectralField read_field_binary(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kFieldMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("field read: bad magic");
  }
  const auto cutoff = read_raw<std::int32_t>(in);
  SpectralField field(build_space(cutoff));
  const auto count = read_raw<std::uint64_t>(in);
  for (std::uint64_t rec = 0; rec < count; ++rec) {
    WaveVector k;
    k.x = read_raw<std::int32_t>(in);
    k.y = read_raw<std::int32_t>(in);
    k.z = read_raw<std::int32_t>(in);
    double re[3], im[3];
    for (double& v : re) v = read_raw<double>(in);
    for (double& v : im) v = read_raw<double>(in);
    const std::size_t i = field.space()->index_of(k);
    if (i == GalerkinSpace::npos) {
      throw std::runtime_error("field read: mode outside declared cutoff");
    }
    field.set_coeff(i, {Complex(re[0], im[0]), Complex(re[1], im[1]),
                        Complex(re[2], im[2])});
  }
  return field;
}

void save_field(const std::string& path, const SpectralField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_field: cannot open " + path);
  write_field_binary(out, field);
}

SpectralField load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_field: cannot open " + path);
  return read_field_binary(in);
}

}  // namespace spde
