#include "simr/data.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "simr/fft.hpp"
#include "simr/spectral.hpp"

namespace simr {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'O', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated file while reading ") + what, pos_);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t v = u32("field data");
    return std::bit_cast<float>(v);
  }
  std::string raw(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor<float> SnapshotDataset::snapshot(std::size_t i) const {
  if (i >= n) throw DimensionError("snapshot index " + std::to_string(i) + " out of range (N = " + std::to_string(n) + ")");
  const auto* begin = fields.data() + i * plane();
  return Tensor<float>({h, w}, std::vector<float>(begin, begin + plane()));
}

void SnapshotDataset::validate() const {
  if (n == 0) throw ConfigError("dataset must hold at least one snapshot");
  if (h != w || !fft::is_power_of_two(h)) {
    throw ConfigError("dataset fields must be square with power-of-two size, got " + std::to_string(h) + "x" +
                      std::to_string(w));
  }
  if (fields.size() != n * h * w) throw DimensionError("dataset payload does not match N*H*W");
}

template <typename T>
Tensor<T> restrict_field(const Tensor<T>& field, std::size_t r_c) {
  if (field.rank() != 2) throw DimensionError("restrict: field must be rank 2, got " + shape_str(field.shape()));
  const std::size_t h = field.dim(0), w = field.dim(1);
  if (r_c == 0 || h % r_c != 0 || w % r_c != 0) {
    throw ConfigError("restrict: " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by r_c = " +
                      std::to_string(r_c));
  }
  const std::size_t sh = h / r_c, sw = w / r_c;
  Tensor<T> out({r_c, r_c});
  for (std::size_t i = 0; i < r_c; ++i) {
    for (std::size_t j = 0; j < r_c; ++j) out[i * r_c + j] = field[(i * sh) * w + j * sw];
  }
  return out;
}

template Tensor<float> restrict_field<float>(const Tensor<float>&, std::size_t);
template Tensor<double> restrict_field<double>(const Tensor<double>&, std::size_t);

Tensor<float> make_pseudo_hr(const Tensor<float>& coarse, std::size_t n, GridMapping mapping) {
  if (coarse.rank() != 2) throw DimensionError("make_pseudo_hr: coarse field must be rank 2");
  Tape<float> tape(Tape<float>::Mode::inference);
  auto x = Var<float>::constant(coarse.reshaped({1, coarse.dim(0), coarse.dim(1)}));
  auto up = resize(tape, x, n, n, InterpKind::bicubic, mapping);
  return up.value().reshaped({n, n});
}

std::vector<SamplePair> build_pairs(const SnapshotDataset& dataset, std::size_t r_c) {
  dataset.validate();
  if (dataset.h % r_c != 0) {
    throw ConfigError("build_pairs: field size " + std::to_string(dataset.h) + " not divisible by r_c = " +
                      std::to_string(r_c));
  }
  std::vector<SamplePair> pairs(dataset.n);
  const auto n = static_cast<long>(dataset.n);
#pragma omp parallel for schedule(static)
  for (long il = 0; il < n; ++il) {
    const auto i = static_cast<std::size_t>(il);
    SamplePair p;
    p.index = i;
    p.truth = dataset.snapshot(i);
    p.coarse = restrict_field(p.truth, r_c);
    p.pseudo_hr = make_pseudo_hr(p.coarse, dataset.h);
    pairs[i] = std::move(p);
  }
  return pairs;
}

Split split(std::size_t n, const SplitSpec& spec) {
  if (spec.n_train + spec.n_test != n) {
    throw ConfigError("split: n_train + n_test = " + std::to_string(spec.n_train + spec.n_test) +
                      " does not equal N = " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (spec.ordering == SplitOrdering::seeded_shuffle) {
    // Fisher-Yates driven by the project-wide uniform stream
    UniformStream rng(spec.seed);
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.next(0.0, static_cast<double>(i)));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
  }
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<long>(spec.n_train));
  s.test.assign(order.begin() + static_cast<long>(spec.n_train), order.end());
  return s;
}

void save_dataset(const SnapshotDataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::vector<std::uint8_t> out;
  out.reserve(20 + dataset.fields.size() * 4 + 256);
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(dataset.n));
  put_u32(out, static_cast<std::uint32_t>(dataset.h));
  put_u32(out, static_cast<std::uint32_t>(dataset.w));
  for (float f : dataset.fields) put_f32(out, f);
  const std::string meta = dataset.metadata.dump();
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write to " + path.string() + " failed");
}

SnapshotDataset parse_dataset(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const std::string magic = r.raw(4, "magic");
  if (magic != std::string(kMagic, 4)) throw FormatError("bad magic, expected SNO1", 0);
  const std::size_t version_at = r.offset();
  if (r.u32("version") != kVersion) throw FormatError("unsupported version", version_at);
  SnapshotDataset d;
  d.n = r.u32("N");
  d.h = r.u32("H");
  d.w = r.u32("W");
  if (d.n == 0) throw FormatError("N must be at least 1", 8);
  if (d.h != d.w || !fft::is_power_of_two(d.h)) throw FormatError("fields must be square powers of two", 12);
  const std::size_t count = d.n * d.h * d.w;
  r.need(count * 4, "field data");
  d.fields.resize(count);
  for (auto& v : d.fields) v = r.f32();
  const std::uint32_t len = r.u32("metadata length");
  const std::size_t meta_at = r.offset();
  const std::string meta = r.raw(len, "metadata");
  try {
    d.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metadata is not valid JSON: ") + e.what(), meta_at);
  }
  if (r.offset() != bytes.size()) throw FormatError("trailing bytes after metadata", r.offset());
  return d;
}

SnapshotDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_dataset(bytes);
}

std::string bytes_digest(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes_digest(bytes);
}

}  // namespace simr
