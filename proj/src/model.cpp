#include "simr/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace simr {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
Tensor<T> uniform(Shape shape, double bound, UniformStream& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.next(-bound, bound));
  return t;
}

template <typename T>
Linear<T> make_linear(std::size_t in, std::size_t out, UniformStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return {Var<T>::parameter(uniform<T>({out, in}, bound, rng)), Var<T>::parameter(Tensor<T>({out}))};
}

template <typename T>
Conv3<T> make_conv(std::size_t in, std::size_t out, UniformStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * 9));
  return {Var<T>::parameter(uniform<T>({out, in, 3, 3}, bound, rng)), Var<T>::parameter(Tensor<T>({out}))};
}

template <typename T>
FnoBlock<T> make_block(std::size_t d, std::size_t k_max, bool gated, UniformStream& rng) {
  FnoBlock<T> b;
  b.spectral = make_spectral_weights<T>(d, d, k_max, rng);
  b.gated = gated;
  if (gated) b.gate = make_gate<T>(rng);
  b.bypass = make_linear<T>(d, d, rng);
  return b;
}

template <typename T>
Var<T> apply(Tape<T>& tape, const Linear<T>& l, const Var<T>& x) {
  return pointwise_linear(tape, x, l.w, l.b);
}

template <typename T>
Var<T> apply(Tape<T>& tape, const Conv3<T>& c, const Var<T>& x) {
  return conv2d_periodic(tape, x, c.k, c.b);
}

template <typename T>
Var<T> apply(Tape<T>& tape, const FnoBlock<T>& b, const Var<T>& v, const WavenumberGrid& grid) {
  auto k = gated_spectral_conv(tape, v, b.spectral, b.gated ? &b.gate : nullptr, grid);
  return gelu(tape, add(tape, k, apply(tape, b.bypass, v)));
}

template <typename T>
void push(NamedParams<T>& out, const std::string& name, const Var<T>& v) {
  out.emplace_back(name, v);
}

template <typename T>
void collect_linear(const std::string& p, const Linear<T>& l, NamedParams<T>& out) {
  push(out, p + ".weight", l.w);
  push(out, p + ".bias", l.b);
}

template <typename T>
void collect_conv(const std::string& p, const Conv3<T>& c, NamedParams<T>& out) {
  push(out, p + ".weight", c.k);
  push(out, p + ".bias", c.b);
}

template <typename T>
void collect_block(const std::string& p, const FnoBlock<T>& b, NamedParams<T>& out) {
  push(out, p + ".spectral", b.spectral.w);
  if (b.gated) {
    push(out, p + ".gate.a1", b.gate.a1);
    push(out, p + ".gate.b1", b.gate.b1);
    push(out, p + ".gate.a2", b.gate.a2);
    push(out, p + ".gate.b2", b.gate.b2);
  }
  collect_linear(p + ".bypass", b.bypass, out);
}

template <typename T>
void zero(Var<T>& v) {
  v.mutable_value().fill(T{0});
}

void check_input(const Shape& s, std::size_t res, const char* who) {
  if (s.size() != 3 || s[0] != 1 || s[1] != res || s[2] != res) {
    throw DimensionError(std::string(who) + ": expected input [1," + std::to_string(res) + "," + std::to_string(res) +
                         "], got " + shape_str(s));
  }
}

std::size_t get_size(const nlohmann::json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(std::string(key) + " must be a non-negative integer");
  return j.at(key).get<std::size_t>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ConfigError(where + it.key() + ": unknown key");
  }
}

StageConfig stage_from_json(const nlohmann::json& j, const StageConfig& d, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  reject_unknown(j, {"in_res", "out_res", "d", "n_fno", "n_local", "k_max"}, where + ".");
  StageConfig s;
  s.in_res = get_size(j, "in_res", d.in_res);
  s.out_res = get_size(j, "out_res", d.out_res);
  s.d = get_size(j, "d", d.d);
  s.n_fno = get_size(j, "n_fno", d.n_fno);
  s.n_local = get_size(j, "n_local", d.n_local);
  s.k_max = get_size(j, "k_max", d.k_max);
  return s;
}

std::string hex64(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

}  // namespace

void StageConfig::validate() const {
  if (in_res == 0 || out_res != 2 * in_res) throw ConfigError("stage out_res must equal 2 * in_res");
  if (d == 0) throw ConfigError("stage width d must be positive");
  if (k_max == 0 || k_max > out_res / 2) throw ConfigError("stage k_max must lie in [1, out_res/2]");
}

nlohmann::json StageConfig::to_json() const {
  return {{"in_res", in_res}, {"out_res", out_res}, {"d", d},
          {"n_fno", n_fno},   {"n_local", n_local}, {"k_max", k_max}};
}

SimrConfig SimrConfig::desk(std::size_t resolution) {
  SimrConfig c;
  c.resolution = resolution;
  c.stage1 = {resolution / 4, resolution / 2, 32, 3, 2, resolution / 8};
  c.stage2 = {resolution / 2, resolution, 40, 5, 4, resolution / 4};
  return c;
}

void SimrConfig::validate() const {
  stage1.validate();
  stage2.validate();
  if (stage1.in_res * 4 != resolution || stage2.in_res != stage1.out_res || stage2.out_res != resolution) {
    throw ConfigError("stages must chain resolution/4 -> resolution/2 -> resolution");
  }
  if (head_width == 0 || proj_width == 0) throw ConfigError("head_width and proj_width must be positive");
}

nlohmann::json SimrConfig::to_json() const {
  return {{"resolution", resolution},         {"stage1", stage1.to_json()}, {"stage2", stage2.to_json()},
          {"head_width", head_width},         {"proj_width", proj_width},   {"n_freq", n_freq}};
}

FnoConfig FnoConfig::desk(std::size_t resolution) {
  FnoConfig c;
  c.resolution = resolution;
  c.k_max = resolution / 8;
  return c;
}

void FnoConfig::validate() const {
  if (width == 0 || n_layers == 0 || proj_width == 0) throw ConfigError("fno width, n_layers, proj_width must be positive");
  check_k_max(k_max, resolution, resolution);
}

nlohmann::json FnoConfig::to_json() const {
  return {{"resolution", resolution}, {"width", width},           {"n_layers", n_layers},
          {"k_max", k_max},           {"proj_width", proj_width}, {"n_freq", n_freq}};
}

SimrConfig simr_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("simrno: expected an object");
  reject_unknown(j, {"resolution", "stage1", "stage2", "head_width", "proj_width", "n_freq"}, "simrno.");
  const SimrConfig d;
  SimrConfig c;
  c.resolution = get_size(j, "resolution", d.resolution);
  c.stage1 = j.contains("stage1") ? stage_from_json(j.at("stage1"), d.stage1, "simrno.stage1") : d.stage1;
  c.stage2 = j.contains("stage2") ? stage_from_json(j.at("stage2"), d.stage2, "simrno.stage2") : d.stage2;
  c.head_width = get_size(j, "head_width", d.head_width);
  c.proj_width = get_size(j, "proj_width", d.proj_width);
  c.n_freq = get_size(j, "n_freq", d.n_freq);
  return c;
}

FnoConfig fno_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("fno: expected an object");
  reject_unknown(j, {"resolution", "width", "n_layers", "k_max", "proj_width", "n_freq"}, "fno.");
  const FnoConfig d;
  FnoConfig c;
  c.resolution = get_size(j, "resolution", d.resolution);
  c.width = get_size(j, "width", d.width);
  c.n_layers = get_size(j, "n_layers", d.n_layers);
  c.k_max = get_size(j, "k_max", d.k_max);
  c.proj_width = get_size(j, "proj_width", d.proj_width);
  c.n_freq = get_size(j, "n_freq", d.n_freq);
  return c;
}

template <typename T>
Tensor<T> positional_features(std::size_t res, std::size_t n_freq) {
  const std::size_t channels = 2 + 4 * n_freq;
  Tensor<T> out({channels, res, res});
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < res; ++i) {
    const double y = static_cast<double>(i) / static_cast<double>(res);
    for (std::size_t j = 0; j < res; ++j) {
      const double x = static_cast<double>(j) / static_cast<double>(res);
      out.at(0, i, j) = static_cast<T>(x);
      out.at(1, i, j) = static_cast<T>(y);
      for (std::size_t f = 1; f <= n_freq; ++f) {
        const double a = pi * static_cast<double>(f);
        const std::size_t c = 2 + 4 * (f - 1);
        out.at(c, i, j) = static_cast<T>(std::sin(a * x));
        out.at(c + 1, i, j) = static_cast<T>(std::cos(a * x));
        out.at(c + 2, i, j) = static_cast<T>(std::sin(a * y));
        out.at(c + 3, i, j) = static_cast<T>(std::cos(a * y));
      }
    }
  }
  return out;
}

template <typename T>
SIMRStage<T>::SIMRStage(const StageConfig& cfg, std::size_t proj_width, std::size_t n_freq, UniformStream& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const std::size_t c_pos = 2 + 4 * n_freq;
  lift_ = make_linear<T>(1 + c_pos, cfg.d, rng);
  for (std::size_t l = 0; l < cfg.n_fno; ++l) fno_.push_back(make_block<T>(cfg.d, cfg.k_max, true, rng));
  for (std::size_t l = 0; l < cfg.n_local; ++l) {
    LocalBlock<T> b;
    b.c1 = make_conv<T>(cfg.d, cfg.d, rng);
    b.c2 = make_conv<T>(cfg.d, cfg.d, rng);
    b.c3 = make_conv<T>(cfg.d, cfg.d, rng);
    local_.push_back(std::move(b));
  }
  q1_ = make_linear<T>(cfg.d, proj_width, rng);
  q2_ = make_linear<T>(proj_width, 1, rng);
  grid_ = build_wavenumber_grid(cfg.out_res, cfg.out_res);
  pos_ = Var<T>::constant(positional_features<T>(cfg.out_res, n_freq));
}

template <typename T>
Var<T> SIMRStage<T>::residual(Tape<T>& tape, const Var<T>& base) const {
  auto v = apply(tape, lift_, concat_channels(tape, base, pos_));
  for (const auto& b : fno_) v = apply(tape, b, v, grid_);
  for (const auto& b : local_) {
    auto r = apply(tape, b.c3, gelu(tape, apply(tape, b.c2, gelu(tape, apply(tape, b.c1, v)))));
    v = add(tape, v, r);
  }
  return apply(tape, q2_, gelu(tape, apply(tape, q1_, v)));
}

template <typename T>
Var<T> SIMRStage<T>::forward(Tape<T>& tape, const Var<T>& a, const Var<T>& alpha) const {
  check_input(a.shape(), cfg_.in_res, "stage");
  auto base = resize(tape, a, cfg_.out_res, cfg_.out_res, InterpKind::bicubic);
  return add(tape, base, scalar_mul(tape, alpha, residual(tape, base)));
}

template <typename T>
void SIMRStage<T>::collect(const std::string& p, NamedParams<T>& out) const {
  collect_linear(p + ".lift", lift_, out);
  for (std::size_t l = 0; l < fno_.size(); ++l) collect_block(p + ".fno" + std::to_string(l), fno_[l], out);
  for (std::size_t l = 0; l < local_.size(); ++l) {
    const std::string q = p + ".local" + std::to_string(l);
    collect_conv(q + ".conv1", local_[l].c1, out);
    collect_conv(q + ".conv2", local_[l].c2, out);
    collect_conv(q + ".conv3", local_[l].c3, out);
  }
  collect_linear(p + ".q1", q1_, out);
  collect_linear(p + ".q2", q2_, out);
}

template <typename T>
void SIMRStage<T>::zero_output() {
  zero(q2_.w);
  zero(q2_.b);
}

template <typename T>
std::size_t Reconstructor<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : parameters()) n += v.size();
  return n;
}

template <typename T>
SIMRNOModel<T>::SIMRNOModel(const SimrConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  UniformStream rng(seed);
  stage1_ = SIMRStage<T>(cfg.stage1, cfg.proj_width, cfg.n_freq, rng);
  stage2_ = SIMRStage<T>(cfg.stage2, cfg.proj_width, cfg.n_freq, rng);
  h1_ = make_conv<T>(1, cfg.head_width, rng);
  h2_ = make_conv<T>(cfg.head_width, cfg.head_width, rng);
  h3_ = make_conv<T>(cfg.head_width, 1, rng);
  alpha1_ = Var<T>::parameter(Tensor<T>({1}, T{1}));
  alpha2_ = Var<T>::parameter(Tensor<T>({1}, T{1}));
}

template <typename T>
Var<T> SIMRNOModel<T>::forward(Tape<T>& tape, const Var<T>& pseudo_hr) const {
  check_input(pseudo_hr.shape(), cfg_.resolution, "simrno");
  auto a = resize(tape, pseudo_hr, cfg_.stage1.in_res, cfg_.stage1.in_res, InterpKind::bilinear);
  auto w1 = stage1_.forward(tape, a, alpha1_);
  auto w2 = stage2_.forward(tape, w1, alpha2_);
  auto h = apply(tape, h3_, gelu(tape, apply(tape, h2_, gelu(tape, apply(tape, h1_, w2)))));
  return add(tape, w2, h);
}

template <typename T>
NamedParams<T> SIMRNOModel<T>::parameters() const {
  NamedParams<T> out;
  stage1_.collect("stage1", out);
  stage2_.collect("stage2", out);
  collect_conv("head.conv1", h1_, out);
  collect_conv("head.conv2", h2_, out);
  collect_conv("head.conv3", h3_, out);
  push(out, "alpha1", alpha1_);
  push(out, "alpha2", alpha2_);
  return out;
}

template <typename T>
nlohmann::json SIMRNOModel<T>::config_json() const {
  return cfg_.to_json();
}

template <typename T>
void SIMRNOModel<T>::zero_residual_outputs() {
  stage1_.zero_output();
  stage2_.zero_output();
  zero(h3_.k);
  zero(h3_.b);
}

template <typename T>
FNOBaseline<T>::FNOBaseline(const FnoConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  UniformStream rng(seed);
  lift_ = make_linear<T>(1 + 2 + 4 * cfg.n_freq, cfg.width, rng);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) blocks_.push_back(make_block<T>(cfg.width, cfg.k_max, false, rng));
  q1_ = make_linear<T>(cfg.width, cfg.proj_width, rng);
  q2_ = make_linear<T>(cfg.proj_width, 1, rng);
  grid_ = build_wavenumber_grid(cfg.resolution, cfg.resolution);
  pos_ = Var<T>::constant(positional_features<T>(cfg.resolution, cfg.n_freq));
}

template <typename T>
Var<T> FNOBaseline<T>::lift(Tape<T>& tape, const Var<T>& pseudo_hr) const {
  check_input(pseudo_hr.shape(), cfg_.resolution, "fno");
  return apply(tape, lift_, concat_channels(tape, pseudo_hr, pos_));
}

template <typename T>
Var<T> FNOBaseline<T>::spectral_block(Tape<T>& tape, std::size_t layer, const Var<T>& v) const {
  const auto& b = blocks_.at(layer);
  return gated_spectral_conv(tape, v, b.spectral, static_cast<const GateMLP<T>*>(nullptr), grid_);
}

template <typename T>
Var<T> FNOBaseline<T>::forward(Tape<T>& tape, const Var<T>& pseudo_hr) const {
  auto v = lift(tape, pseudo_hr);
  for (const auto& b : blocks_) v = apply(tape, b, v, grid_);
  return apply(tape, q2_, gelu(tape, apply(tape, q1_, v)));
}

template <typename T>
NamedParams<T> FNOBaseline<T>::parameters() const {
  NamedParams<T> out;
  collect_linear("lift", lift_, out);
  for (std::size_t l = 0; l < blocks_.size(); ++l) collect_block("block" + std::to_string(l), blocks_[l], out);
  collect_linear("q1", q1_, out);
  collect_linear("q2", q2_, out);
  return out;
}

template <typename T>
nlohmann::json FNOBaseline<T>::config_json() const {
  return cfg_.to_json();
}

template <typename T>
void FNOBaseline<T>::zero_residual_outputs() {
  zero(q2_.w);
  zero(q2_.b);
}

template <typename T>
Var<T> BicubicPassthrough<T>::forward(Tape<T>&, const Var<T>& pseudo_hr) const {
  check_input(pseudo_hr.shape(), res_, "bicubic");
  return Var<T>::constant(pseudo_hr.value());
}

template <typename T>
std::unique_ptr<Reconstructor<T>> make_model(const nlohmann::json& spec, std::uint64_t seed) {
  const std::string kind = spec.value("kind", "");
  const nlohmann::json cfg = spec.value("config", nlohmann::json::object());
  if (kind == "simrno") return std::make_unique<SIMRNOModel<T>>(simr_config_from_json(cfg), seed);
  if (kind == "fno") return std::make_unique<FNOBaseline<T>>(fno_config_from_json(cfg), seed);
  if (kind == "bicubic") return std::make_unique<BicubicPassthrough<T>>(get_size(cfg, "resolution", 128));
  throw ConfigError("unknown model kind '" + kind + "' (expected simrno, fno or bicubic)");
}

template <typename T>
Tensor<T> interpolation_cascade(const Tensor<T>& pseudo_hr, const SimrConfig& cfg) {
  Tape<T> tape(Tape<T>::Mode::inference);
  auto x = Var<T>::constant(pseudo_hr);
  x = resize(tape, x, cfg.stage1.in_res, cfg.stage1.in_res, InterpKind::bilinear);
  x = resize(tape, x, cfg.stage1.out_res, cfg.stage1.out_res, InterpKind::bicubic);
  x = resize(tape, x, cfg.stage2.out_res, cfg.stage2.out_res, InterpKind::bicubic);
  return x.value();
}

template <typename T>
Checkpoint snapshot_parameters(const Reconstructor<T>& model) {
  Checkpoint c;
  c.spec = {{"kind", model.kind()}, {"config", model.config_json()}};
  for (const auto& [name, v] : model.parameters()) c.tensors.emplace_back(name, v.value().template cast<float>());
  return c;
}

template <typename T>
void apply_checkpoint(Reconstructor<T>& model, const Checkpoint& ckpt) {
  auto params = model.parameters();
  std::vector<std::string> problems;
  std::vector<bool> used(ckpt.tensors.size(), false);
  for (auto& [name, v] : params) {
    bool found = false;
    for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
      if (ckpt.tensors[i].first != name) continue;
      found = true;
      used[i] = true;
      if (ckpt.tensors[i].second.shape() != v.shape()) {
        problems.push_back(name + " (shape " + shape_str(ckpt.tensors[i].second.shape()) + ", expected " +
                           shape_str(v.shape()) + ")");
      }
      break;
    }
    if (!found) problems.push_back(name + " (missing)");
  }
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    if (!used[i]) problems.push_back(ckpt.tensors[i].first + " (unexpected)");
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match model:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw CheckpointIncompatible(msg);
  }
  for (auto& [name, v] : params) {
    for (const auto& [cname, t] : ckpt.tensors) {
      if (cname == name) v.mutable_value() = t.template cast<T>();
    }
  }
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  const auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  u32(kVersion);
  u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.size() > 0xffff) throw FormatError("tensor name too long", out.size());
    out.push_back(static_cast<std::uint8_t>(name.size() & 0xff));
    out.push_back(static_cast<std::uint8_t>(name.size() >> 8));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) u32(static_cast<std::uint32_t>(d));
    for (float f : t.values()) u32(std::bit_cast<std::uint32_t>(f));
  }
  const std::string meta = ckpt.spec.dump();
  u32(static_cast<std::uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());
  return out;
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  const auto need = [&](std::size_t n, const char* what) {
    if (bytes.size() - pos < n) throw FormatError(std::string("truncated checkpoint while reading ") + what, pos);
  };
  const auto u32 = [&](const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  };
  need(4, "magic");
  if (!std::equal(kMagic, kMagic + 4, bytes.begin())) throw FormatError("bad magic, expected SNC1", 0);
  pos = 4;
  if (u32("version") != kVersion) throw FormatError("unsupported checkpoint version", 4);
  const std::uint32_t count = u32("tensor count");
  Checkpoint c;
  for (std::uint32_t t = 0; t < count; ++t) {
    need(2, "name length");
    const std::size_t len = bytes[pos] | (static_cast<std::size_t>(bytes[pos + 1]) << 8);
    pos += 2;
    need(len, "name");
    std::string name(reinterpret_cast<const char*>(bytes.data() + pos), len);
    pos += len;
    need(1, "rank");
    const std::size_t rank = bytes[pos++];
    Shape shape;
    for (std::size_t r = 0; r < rank; ++r) shape.push_back(u32("dims"));
    Tensor<float> tensor(shape);
    need(tensor.size() * 4, "tensor data");
    for (auto& v : tensor.values()) v = std::bit_cast<float>(u32("tensor data"));
    c.tensors.emplace_back(std::move(name), std::move(tensor));
  }
  const std::uint32_t len = u32("config length");
  need(len, "config");
  const std::size_t at = pos;
  try {
    c.spec = nlohmann::json::parse(bytes.begin() + static_cast<long>(pos), bytes.begin() + static_cast<long>(pos + len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint config is not valid JSON: ") + e.what(), at);
  }
  pos += len;
  if (pos != bytes.size()) throw FormatError("trailing bytes after checkpoint config", pos);
  return c;
}

template <typename T>
void save_checkpoint(const Reconstructor<T>& model, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(snapshot_parameters(model));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write to " + path.string() + " failed");
}

template <typename T>
std::unique_ptr<Reconstructor<T>> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const Checkpoint c = parse_checkpoint(bytes);
  auto model = make_model<T>(c.spec, 0);
  apply_checkpoint(*model, c);
  return model;
}

template <typename T>
std::string parameter_digest(const Reconstructor<T>& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, v] : model.parameters()) {
    mix(name.data(), name.size());
    mix(v.value().data(), v.size() * sizeof(T));
  }
  return hex64(h);
}

#define SIMR_INSTANTIATE_MODEL(T)                                                                      \
  template Tensor<T> positional_features<T>(std::size_t, std::size_t);                                 \
  template class SIMRStage<T>;                                                                         \
  template class Reconstructor<T>;                                                                     \
  template class SIMRNOModel<T>;                                                                       \
  template class FNOBaseline<T>;                                                                       \
  template class BicubicPassthrough<T>;                                                                \
  template std::unique_ptr<Reconstructor<T>> make_model<T>(const nlohmann::json&, std::uint64_t);      \
  template Tensor<T> interpolation_cascade<T>(const Tensor<T>&, const SimrConfig&);                    \
  template Checkpoint snapshot_parameters<T>(const Reconstructor<T>&);                                 \
  template void apply_checkpoint<T>(Reconstructor<T>&, const Checkpoint&);                             \
  template void save_checkpoint<T>(const Reconstructor<T>&, const std::filesystem::path&);             \
  template std::unique_ptr<Reconstructor<T>> load_checkpoint<T>(const std::filesystem::path&);         \
  template std::string parameter_digest<T>(const Reconstructor<T>&);

SIMR_INSTANTIATE_MODEL(float)
SIMR_INSTANTIATE_MODEL(double)

}  // namespace simr
