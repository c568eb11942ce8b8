#include <bit>
#include <cstring>
#include <sstream>

#include "jjphoton/correlator.hpp"
#include "jjphoton/error.hpp"
#include "jjphoton/io.hpp"

namespace jjphoton::correlator {

namespace {

constexpr char magic[12] = {'J', 'J', 'P', 'H', 'O', 'T', 'O', 'N', 'R', 'E', 'C', '\0'};
constexpr std::uint32_t version = 1;

static_assert(std::endian::native == std::endian::little, "record I/O assumes a little-endian host");

void put_f32(std::string& out, double v) {
  const auto f = static_cast<float>(v);
  char b[4];
  std::memcpy(b, &f, 4);
  out.append(b, 4);
}

float get_f32(const std::string& in, std::size_t pos) {
  float f;
  std::memcpy(&f, in.data() + pos, 4);
  return f;
}

std::string header(const io::json& meta) {
  std::string out(magic, sizeof magic);
  char v[4];
  std::memcpy(v, &version, 4);
  out.append(v, 4);
  out += meta.dump();
  out += '\n';
  return out;
}

// Returns metadata and the offset of the first sample.
std::pair<io::json, std::size_t> parse_header(const std::string& bytes, const char* kind) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), magic, sizeof magic) != 0)
    throw IoError("not a record file (bad magic)");
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + 12, 4);
  if (v != version) throw IoError("unsupported record version " + std::to_string(v));
  const auto nl = bytes.find('\n', 16);
  if (nl == std::string::npos) throw IoError("record metadata line is not terminated");
  io::json meta;
  try {
    meta = io::json::parse(bytes.substr(16, nl - 16));
    if (meta.at("kind").get<std::string>() != kind)
      throw IoError(std::string("record is not of kind ") + kind);
    if (meta.at("channels").get<int>() != 2) throw IoError("record must have two channels");
  } catch (const io::json::exception& e) {
    throw IoError(std::string("bad record metadata: ") + e.what());
  }
  return {meta, nl + 1};
}

}  // namespace

std::string write_adc_record(const AdcRecord& rec, std::size_t block_size) {
  if (rec.ch[0].size() != rec.ch[1].size()) throw InvalidModel("ADC channels differ in length");
  io::json meta = {{"kind", "adc"},
                   {"sample_interval_s", rec.dt},
                   {"channels", 2},
                   {"block_size", block_size},
                   {"samples", rec.ch[0].size()}};
  auto out = header(meta);
  out.reserve(out.size() + 8 * rec.ch[0].size());
  for (std::size_t n = 0; n < rec.ch[0].size(); ++n) {
    put_f32(out, rec.ch[0][n]);
    put_f32(out, rec.ch[1][n]);
  }
  return out;
}

AdcRecord read_adc_record(const std::string& bytes) {
  const auto [meta, pos] = parse_header(bytes, "adc");
  const auto n = meta.value("samples", std::size_t{0});
  if (bytes.size() != pos + 8 * n) throw IoError("ADC record size does not match its metadata");
  AdcRecord rec;
  rec.dt = meta.value("sample_interval_s", 0.0);
  rec.ch[0].resize(n);
  rec.ch[1].resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rec.ch[0][i] = get_f32(bytes, pos + 8 * i);
    rec.ch[1][i] = get_f32(bytes, pos + 8 * i + 4);
  }
  return rec;
}

std::string write_envelope_record(const EnvelopeRecord& rec) {
  if (rec.ch[0].size() != rec.ch[1].size()) throw InvalidModel("envelope channels differ in length");
  io::json meta = {{"kind", "envelope"},
                   {"sample_interval_s", rec.dt},
                   {"channels", 2},
                   {"block_size", rec.block_size},
                   {"samples", rec.ch[0].size()},
                   {"on", rec.on}};
  auto out = header(meta);
  out.reserve(out.size() + 16 * rec.ch[0].size());
  for (std::size_t n = 0; n < rec.ch[0].size(); ++n) {
    for (int c = 0; c < 2; ++c) {
      put_f32(out, rec.ch[c][n].real());
      put_f32(out, rec.ch[c][n].imag());
    }
  }
  return out;
}

EnvelopeRecord read_envelope_record(const std::string& bytes) {
  const auto [meta, pos] = parse_header(bytes, "envelope");
  const auto n = meta.value("samples", std::size_t{0});
  if (bytes.size() != pos + 16 * n) throw IoError("envelope record size does not match its metadata");
  EnvelopeRecord rec;
  rec.dt = meta.value("sample_interval_s", 0.0);
  rec.block_size = meta.value("block_size", std::size_t{0});
  rec.on = meta.value("on", std::vector<bool>{});
  for (int c = 0; c < 2; ++c) rec.ch[c].resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = pos + 16 * i;
    rec.ch[0][i] = {get_f32(bytes, p), get_f32(bytes, p + 4)};
    rec.ch[1][i] = {get_f32(bytes, p + 8), get_f32(bytes, p + 12)};
  }
  return rec;
}

std::string correlation_to_csv(const CorrelationResult& r) {
  std::ostringstream os;
  os << "tau_s,g2,sigma,g1_re,g1_im,gamma2_raw_re,gamma2_raw_im\n";
  for (std::size_t i = 0; i < r.tau.size(); ++i) {
    const double sigma = i < r.sigma_g2.size() ? r.sigma_g2[i] : 0.0;
    os << io::fmt(r.tau[i]) << ',' << io::fmt(r.g2[i]) << ',' << io::fmt(sigma) << ','
       << io::fmt(r.g1[i].real()) << ',' << io::fmt(r.g1[i].imag()) << ','
       << io::fmt(r.gamma2_cross[i].real()) << ',' << io::fmt(r.gamma2_cross[i].imag()) << '\n';
  }
  return os.str();
}

}  // namespace jjphoton::correlator
