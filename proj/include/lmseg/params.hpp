#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lmseg/tensor.hpp"

namespace lmseg {

using ParamId = std::size_t;

struct Parameter {
  std::string name;
  Tensor value;
  // Adam first and second moments; always shaped like value.
  Tensor m;
  Tensor v;
};

class ParamStore {
 public:
  ParamId add(std::string name, Tensor value);
  ParamId id(std::string_view name) const;
  bool contains(std::string_view name) const;

  Parameter& operator[](ParamId id) { return params_.at(id); }
  const Parameter& operator[](ParamId id) const { return params_.at(id); }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::uint64_t step = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, ParamId, std::less<>> index_;
};

// One gradient tensor per parameter, aligned with ParamStore ids.
class Gradients {
 public:
  Gradients() = default;
  // Zero gradient for every parameter of the store.
  explicit Gradients(const ParamStore& store);

  Tensor& operator[](ParamId id) { return grads_.at(id); }
  const Tensor& operator[](ParamId id) const { return grads_.at(id); }
  std::size_t size() const { return grads_.size(); }

  void add(const Gradients& other);
  void scale(double factor);
  double global_norm() const;

 private:
  std::vector<Tensor> grads_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 0.0;
};

// One bias-corrected Adam update. The L2 term l2 * p is added to each
// gradient before the moment update. Increments store.step.
void adam_step(ParamStore& store, const Gradients& grads,
               const AdamOptions& options);

// Rescales grads so their joint L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

// Checkpoint container: magic + version, free-form configuration text,
// step counter, seed, then per parameter its name, shape and the raw
// little-endian doubles of value, m and v.
struct Checkpoint {
  ParamStore params;
  std::string config;
};

inline constexpr char kCheckpointMagic[8] = {'L', 'M', 'S', 'E',
                                             'G', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const ParamStore& store,
                      std::string_view config);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path,
                     const ParamStore& store, std::string_view config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lmseg
