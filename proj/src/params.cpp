#include "lmseg/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "lmseg/errors.hpp"

namespace lmseg {

ParamId ParamStore::add(std::string name, Tensor value) {
  if (index_.contains(name))
    throw ContractError("duplicate parameter name '" + name + "'");
  const ParamId id = params_.size();
  index_.emplace(name, id);
  Tensor m = Tensor::zeros_like(value);
  Tensor v = Tensor::zeros_like(value);
  params_.push_back({std::move(name), std::move(value), std::move(m), std::move(v)});
  return id;
}

ParamId ParamStore::id(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

bool ParamStore::contains(std::string_view name) const {
  return index_.find(name) != index_.end();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.step != b.step || a.seed != b.seed || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.params_[i];
    const auto& y = b.params_[i];
    if (x.name != y.name || x.value.shape() != y.value.shape()) return false;
    // Bitwise comparison: -0.0 vs 0.0 and NaN payloads count as different.
    auto same = [](const Tensor& s, const Tensor& t) {
      return std::memcmp(s.data(), t.data(), s.size() * sizeof(double)) == 0;
    };
    if (!same(x.value, y.value) || !same(x.m, y.m) || !same(x.v, y.v))
      return false;
  }
  return true;
}

Gradients::Gradients(const ParamStore& store) {
  grads_.reserve(store.size());
  for (const auto& p : store) grads_.push_back(Tensor::zeros_like(p.value));
}

void Gradients::add(const Gradients& other) {
  if (other.size() != size())
    throw AccountingError("gradient sets cover different parameter counts");
  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i].add(other.grads_[i]);
}

void Gradients::scale(double factor) {
  for (auto& g : grads_)
    for (double& x : g.values()) x *= factor;
}

double Gradients::global_norm() const {
  double sq = 0.0;
  for (const auto& g : grads_)
    for (double x : g.values()) sq += x * x;
  return std::sqrt(sq);
}

void adam_step(ParamStore& store, const Gradients& grads,
               const AdamOptions& o) {
  if (grads.size() != store.size())
    throw AccountingError("adam_step: " + std::to_string(store.size()) +
                          " parameters but " + std::to_string(grads.size()) +
                          " gradients");
  for (ParamId id = 0; id < store.size(); ++id) {
    const auto& p = store[id];
    if (grads[id].shape() != p.value.shape())
      throw AccountingError("adam_step: gradient for '" + p.name + "' has shape " +
                            shape_string(grads[id].shape()) + ", parameter has " +
                            shape_string(p.value.shape()));
  }
  store.step += 1;
  const double t = static_cast<double>(store.step);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);
  for (ParamId id = 0; id < store.size(); ++id) {
    auto& p = store[id];
    const auto& g = grads[id];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double gk = g[k] + o.l2 * p.value[k];
      p.m[k] = o.beta1 * p.m[k] + (1.0 - o.beta1) * gk;
      p.v[k] = o.beta2 * p.v[k] + (1.0 - o.beta2) * gk * gk;
      const double mhat = p.m[k] / bc1;
      const double vhat = p.v[k] / bc2;
      p.value[k] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
    }
  }
}

double clip_global_norm(Gradients& grads, double max_norm) {
  const double norm = grads.global_norm();
  if (max_norm > 0.0 && norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("checkpoint truncated");
  return value;
}

void put_string(std::ostream& out, std::string_view s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1ull << 32)) throw IoError("checkpoint string length is implausible");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError("checkpoint truncated");
  return s;
}

void put_values(std::ostream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
}

void get_values(std::istream& in, Tensor& t) {
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!in) throw IoError("checkpoint truncated");
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParamStore& store,
                      std::string_view config) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, config);
  put<std::uint64_t>(out, store.step);
  put<std::uint64_t>(out, store.seed);
  put<std::uint64_t>(out, store.size());
  for (const auto& p : store) {
    put_string(out, p.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto e : p.value.shape()) put<std::uint64_t>(out, e);
    put_values(out, p.value);
    put_values(out, p.m);
    put_values(out, p.v);
  }
  if (!out) throw IoError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw IoError("not a checkpoint file (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.config = get_string(in);
  ck.params.step = get<std::uint64_t>(in);
  ck.params.seed = get<std::uint64_t>(in);
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = get_string(in);
    const auto rank = get<std::uint32_t>(in);
    if (rank == 0 || rank > 8) throw IoError("bad rank for parameter '" + name + "'");
    Shape shape(rank);
    for (auto& e : shape) e = get<std::uint64_t>(in);
    Tensor value(shape);
    get_values(in, value);
    const ParamId id = ck.params.add(std::move(name), std::move(value));
    get_values(in, ck.params[id].m);
    get_values(in, ck.params[id].v);
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     std::string_view config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_checkpoint(out, store, config);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return read_checkpoint(in);
}

}  // namespace lmseg
