/* Copyright 2026 The lshtrain Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "lshtrain/lsh.hpp"

#include <algorithm>
#include <bit>
#include <exception>
#include <limits>
#include <numeric>
#include <string>

#include "lshtrain/error.hpp"
#include "lshtrain/rng.hpp"

namespace lshtrain {

namespace {

constexpr std::uint32_t kNoHash = std::numeric_limits<std::uint32_t>::max();
constexpr std::uint64_t kDwtaStream = 0xD7A0;
constexpr std::uint64_t kSimHashStream = 0x5124;

// SimHash membership of coordinate i in projection j, with sign.
// Roughly one coordinate in three participates.
inline bool simhash_entry(std::uint64_t bit_seed, std::uint32_t coord, float& sign) {
  const std::uint64_t h = mix64(bit_seed + coord);
  if (h % 3 != 0) return false;
  sign = ((h >> 40) & 1u) ? -1.0f : 1.0f;
  return true;
}

}  // namespace

HashFamily parse_hash_family(std::string_view s) {
  if (s == "dwta") return HashFamily::Dwta;
  if (s == "simhash") return HashFamily::SimHash;
  throw ConfigError("hash_family must be dwta|simhash, got '" + std::string(s) + "'");
}

std::string_view to_string(HashFamily f) noexcept { return f == HashFamily::Dwta ? "dwta" : "simhash"; }

void HashFamilyParams::validate() const {
  if (k == 0 || l == 0) throw ConfigError("hash k and l must be positive");
  if (input_dim == 0) throw ConfigError("hash input_dim must be positive");
  if (family == HashFamily::Dwta) {
    if (bin_size < 2 || !std::has_single_bit(bin_size)) throw ConfigError("DWTA bin_size must be a power of two >= 2");
    if (densify_cap == 0) throw ConfigError("DWTA densify_cap must be positive");
    if (static_cast<std::uint64_t>(k) * std::countr_zero(bin_size) > 30) {
      throw ConfigError("DWTA code exceeds 30 bits (k * log2(bin_size))");
    }
  } else if (k > 30) {
    throw ConfigError("SimHash k must be <= 30");
  }
}

std::uint32_t HashFamilyParams::code_bits() const {
  return family == HashFamily::Dwta ? k * static_cast<std::uint32_t>(std::countr_zero(bin_size)) : k;
}

// ---------------------------------------------------------------- DWTA

DwtaHash::DwtaHash(const HashFamilyParams& p) : params_(p) {
  params_.validate();
  const std::size_t dim = p.input_dim;
  const std::size_t num_hashes = static_cast<std::size_t>(p.k) * p.l;
  const std::size_t positions = num_hashes * p.bin_size;
  num_perm_ = static_cast<std::uint32_t>((positions + dim - 1) / dim);
  slot_bits_ = static_cast<std::uint32_t>(std::countr_zero(p.bin_size));

  hash_of_.assign(static_cast<std::size_t>(num_perm_) * dim, kNoHash);
  slot_of_.assign(static_cast<std::size_t>(num_perm_) * dim, 0);
  feature_at_.assign(positions, -1);

  SplitMix64 rng(derive_seed(p.seed, kDwtaStream));
  std::vector<std::uint32_t> perm(dim);
  std::iota(perm.begin(), perm.end(), 0u);
  for (std::uint32_t q = 0; q < num_perm_; ++q) {
    for (std::size_t i = dim - 1; i > 0; --i) {
      std::swap(perm[i], perm[uniform_below(rng, i + 1)]);
    }
    for (std::size_t pos = 0; pos < dim; ++pos) {
      const std::size_t g = static_cast<std::size_t>(q) * dim + pos;
      const std::size_t h = g / p.bin_size;
      if (h >= num_hashes) break;
      const std::uint32_t f = perm[pos];
      hash_of_[static_cast<std::size_t>(q) * dim + f] = static_cast<std::uint32_t>(h);
      slot_of_[static_cast<std::size_t>(q) * dim + f] = static_cast<std::uint32_t>(g % p.bin_size);
      feature_at_[g] = static_cast<std::int32_t>(f);
    }
  }
}

std::vector<DwtaHash::Placement> DwtaHash::placements(std::uint32_t feature) const {
  if (feature >= params_.input_dim) throw DimensionError("DWTA feature out of range");
  std::vector<Placement> out;
  for (std::uint32_t q = 0; q < num_perm_; ++q) {
    const std::size_t at = static_cast<std::size_t>(q) * params_.input_dim + feature;
    if (hash_of_[at] != kNoHash) out.push_back({hash_of_[at], slot_of_[at]});
  }
  return out;
}

std::uint32_t DwtaHash::densify_probe(std::uint32_t bin, std::uint32_t attempt) const noexcept {
  return static_cast<std::uint32_t>((bin + static_cast<std::uint64_t>(attempt) * kDensifyStride) % params_.k);
}

std::uint32_t DwtaHash::densify_and_compose(std::span<const std::int32_t> winners) const noexcept {
  std::uint32_t code = 0;
  for (std::uint32_t b = 0; b < params_.k; ++b) {
    std::int32_t w = winners[b];
    for (std::uint32_t a = 1; w == kEmpty && a <= params_.densify_cap; ++a) {
      w = winners[densify_probe(b, a)];
    }
    if (w == kEmpty) w = 0;
    code |= static_cast<std::uint32_t>(w) << (b * slot_bits_);
  }
  return code;
}

void DwtaHash::finish(std::span<const std::int32_t> slots, std::span<std::uint32_t> out) const {
  for (std::uint32_t t = 0; t < params_.l; ++t) {
    out[t] = densify_and_compose(slots.subspan(static_cast<std::size_t>(t) * params_.k, params_.k));
  }
}

void DwtaHash::codes(SparseVectorRef x, std::span<std::uint32_t> out) const {
  if (out.size() != params_.l) throw DimensionError("DWTA: output must hold one code per table");
  if (x.indices.size() != x.values.size()) throw DimensionError("DWTA: indices/values length mismatch");
  const std::size_t num_hashes = static_cast<std::size_t>(params_.k) * params_.l;
  thread_local std::vector<float> best_val;
  thread_local std::vector<std::int32_t> best_slot;
  best_val.assign(num_hashes, 0.0f);
  best_slot.assign(num_hashes, kEmpty);
  const std::size_t dim = params_.input_dim;
  for (std::size_t k = 0; k < x.indices.size(); ++k) {
    const std::uint32_t f = x.indices[k];
    const float v = x.values[k];
    if (f >= dim) throw DimensionError("DWTA: feature index out of range");
    if (v == 0.0f) continue;
    for (std::uint32_t q = 0; q < num_perm_; ++q) {
      const std::size_t at = static_cast<std::size_t>(q) * dim + f;
      const std::uint32_t h = hash_of_[at];
      if (h == kNoHash) continue;
      const auto s = static_cast<std::int32_t>(slot_of_[at]);
      if (best_slot[h] == kEmpty || v > best_val[h] || (v == best_val[h] && s < best_slot[h])) {
        best_val[h] = v;
        best_slot[h] = s;
      }
    }
  }
  finish(best_slot, out);
}

void DwtaHash::codes(std::span<const float> x, std::span<std::uint32_t> out, LaneConfig lanes) const {
  if (x.size() != params_.input_dim) throw DimensionError("DWTA: input length != input_dim");
  if (out.size() != params_.l) throw DimensionError("DWTA: output must hold one code per table");
  const std::size_t num_hashes = static_cast<std::size_t>(params_.k) * params_.l;
  const std::size_t s = params_.bin_size;
  thread_local std::vector<std::int32_t> best_slot;
  best_slot.assign(num_hashes, kEmpty);
  if (!lanes.enabled) {
    thread_local std::vector<float> best_val;
    best_val.assign(num_hashes, 0.0f);
    const std::size_t dim = params_.input_dim;
    for (std::size_t f = 0; f < dim; ++f) {
      const float v = x[f];
      if (v == 0.0f) continue;
      for (std::uint32_t q = 0; q < num_perm_; ++q) {
        const std::size_t at = static_cast<std::size_t>(q) * dim + f;
        const std::uint32_t h = hash_of_[at];
        if (h == kNoHash) continue;
        const auto sl = static_cast<std::int32_t>(slot_of_[at]);
        if (best_slot[h] == kEmpty || v > best_val[h] || (v == best_val[h] && sl < best_slot[h])) {
          best_val[h] = v;
          best_slot[h] = sl;
        }
      }
    }
  } else {
    // Gather slot-major (absent -> -inf) so each lane reduces one bin.
    thread_local std::vector<float> gathered;
    gathered.resize(num_hashes * s);
    constexpr float kAbsent = -std::numeric_limits<float>::infinity();
    for (std::size_t h = 0; h < num_hashes; ++h) {
      for (std::size_t sl = 0; sl < s; ++sl) {
        const std::int32_t f = feature_at_[h * s + sl];
        const float v = f >= 0 ? x[static_cast<std::size_t>(f)] : 0.0f;
        gathered[sl * num_hashes + h] = v != 0.0f ? v : kAbsent;
      }
    }
    bins_argmax(gathered, num_hashes, best_slot, lanes);
  }
  finish(best_slot, out);
}

// ---------------------------------------------------------------- SimHash

SimHash::SimHash(const HashFamilyParams& p) : params_(p) {
  params_.validate();
  const std::size_t dim = p.input_dim;
  const std::uint32_t num_bits = p.k * p.l;
  std::vector<std::uint64_t> bit_seed(num_bits);
  for (std::uint32_t j = 0; j < num_bits; ++j) bit_seed[j] = derive_seed(p.seed, kSimHashStream, j);
  coord_offsets_.assign(dim + 1, 0);
  coord_bits_.reserve(static_cast<std::size_t>(num_bits) * dim / 3 + 16);
  coord_signs_.reserve(coord_bits_.capacity());
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::uint32_t j = 0; j < num_bits; ++j) {
      float sign;
      if (simhash_entry(bit_seed[j], static_cast<std::uint32_t>(i), sign)) {
        coord_bits_.push_back(j);
        coord_signs_.push_back(sign);
      }
    }
    coord_offsets_[i + 1] = coord_bits_.size();
  }
}

std::vector<std::pair<std::uint32_t, float>> SimHash::projection(std::uint32_t bit) const {
  if (bit >= params_.k * params_.l) throw DimensionError("SimHash bit out of range");
  const std::uint64_t seed = derive_seed(params_.seed, kSimHashStream, bit);
  std::vector<std::pair<std::uint32_t, float>> out;
  for (std::uint32_t i = 0; i < params_.input_dim; ++i) {
    float sign;
    if (simhash_entry(seed, i, sign)) out.emplace_back(i, sign);
  }
  return out;
}

void SimHash::finish(std::span<const float> proj, std::span<std::uint32_t> out) const {
  for (std::uint32_t t = 0; t < params_.l; ++t) {
    std::uint32_t code = 0;
    for (std::uint32_t b = 0; b < params_.k; ++b) {
      if (proj[static_cast<std::size_t>(t) * params_.k + b] >= 0.0f) code |= 1u << b;
    }
    out[t] = code;
  }
}

void SimHash::codes(SparseVectorRef x, std::span<std::uint32_t> out) const {
  if (out.size() != params_.l) throw DimensionError("SimHash: output must hold one code per table");
  if (x.indices.size() != x.values.size()) throw DimensionError("SimHash: indices/values length mismatch");
  thread_local std::vector<float> proj;
  proj.assign(static_cast<std::size_t>(params_.k) * params_.l, 0.0f);
  for (std::size_t k = 0; k < x.indices.size(); ++k) {
    const std::uint32_t i = x.indices[k];
    if (i >= params_.input_dim) throw DimensionError("SimHash: index out of range");
    const float v = x.values[k];
    if (v == 0.0f) continue;
    for (std::size_t e = coord_offsets_[i]; e < coord_offsets_[i + 1]; ++e) {
      proj[coord_bits_[e]] += coord_signs_[e] * v;
    }
  }
  finish(proj, out);
}

void SimHash::codes(std::span<const float> x, std::span<std::uint32_t> out) const {
  if (x.size() != params_.input_dim) throw DimensionError("SimHash: input length != input_dim");
  if (out.size() != params_.l) throw DimensionError("SimHash: output must hold one code per table");
  thread_local std::vector<float> proj;
  proj.assign(static_cast<std::size_t>(params_.k) * params_.l, 0.0f);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float v = x[i];
    if (v == 0.0f) continue;
    for (std::size_t e = coord_offsets_[i]; e < coord_offsets_[i + 1]; ++e) {
      proj[coord_bits_[e]] += coord_signs_[e] * v;
    }
  }
  finish(proj, out);
}

// ---------------------------------------------------------------- LshHash

namespace {
std::variant<DwtaHash, SimHash> make_impl(const HashFamilyParams& p) {
  if (p.family == HashFamily::Dwta) return DwtaHash(p);
  return SimHash(p);
}
}  // namespace

LshHash::LshHash(const HashFamilyParams& p) : impl_(make_impl(p)), code_bits_(p.code_bits()) {}

const HashFamilyParams& LshHash::params() const noexcept {
  return std::visit([](const auto& h) -> const HashFamilyParams& { return h.params(); }, impl_);
}

void LshHash::codes(SparseVectorRef x, std::span<std::uint32_t> out, LaneConfig) const {
  std::visit([&](const auto& h) { h.codes(x, out); }, impl_);
}

void LshHash::codes(std::span<const float> x, std::span<std::uint32_t> out, LaneConfig lanes) const {
  if (const auto* d = std::get_if<DwtaHash>(&impl_)) {
    d->codes(x, out, lanes);
  } else {
    std::get<SimHash>(impl_).codes(x, out);
  }
}

std::vector<std::uint32_t> LshHash::codes(SparseVectorRef x, LaneConfig lanes) const {
  std::vector<std::uint32_t> out(params().l);
  codes(x, std::span<std::uint32_t>(out), lanes);
  return out;
}

std::vector<std::uint32_t> LshHash::codes(std::span<const float> x, LaneConfig lanes) const {
  std::vector<std::uint32_t> out(params().l);
  codes(x, std::span<std::uint32_t>(out), lanes);
  return out;
}

// ---------------------------------------------------------------- tables

LshTables::LshTables(const HashFamilyParams& p, std::size_t capacity, LaneConfig lanes)
    : hash_(std::make_shared<const LshHash>(p)), lanes_(lanes) {
  lanes_.validate();
  const std::uint32_t bits = hash_->code_bits();
  flat_ = bits <= 16;
  if (flat_) {
    flat_buckets_.resize(static_cast<std::size_t>(p.l) << bits);
  } else {
    map_buckets_.resize(p.l);
  }
  codes_.assign(capacity * p.l, 0);
  present_.assign(capacity, 0);
}

void LshTables::check_id(std::uint32_t id) const {
  if (id >= present_.size()) {
    throw BoundsError("neuron id " + std::to_string(id) + " >= table capacity " + std::to_string(present_.size()));
  }
}

std::vector<std::uint32_t>* LshTables::find_bucket(std::size_t table, std::uint32_t code) {
  if (flat_) return &flat_buckets_[(table << hash_->code_bits()) | code];
  auto it = map_buckets_[table].find(code);
  return it == map_buckets_[table].end() ? nullptr : &it->second;
}

const std::vector<std::uint32_t>* LshTables::find_bucket(std::size_t table, std::uint32_t code) const {
  if (flat_) return &flat_buckets_[(table << hash_->code_bits()) | code];
  auto it = map_buckets_[table].find(code);
  return it == map_buckets_[table].end() ? nullptr : &it->second;
}

std::vector<std::uint32_t>& LshTables::bucket_for_insert(std::size_t table, std::uint32_t code) {
  if (flat_) return flat_buckets_[(table << hash_->code_bits()) | code];
  return map_buckets_[table][code];
}

void LshTables::insert(std::uint32_t id, std::span<const float> w) {
  check_id(id);
  std::vector<std::uint32_t> codes(num_tables());
  hash_->codes(w, std::span<std::uint32_t>(codes), lanes_);
  insert_codes(id, codes);
}

void LshTables::insert_codes(std::uint32_t id, std::span<const std::uint32_t> codes) {
  check_id(id);
  if (codes.size() != num_tables()) throw DimensionError("insert_codes: one code per table required");
  if (present_[id]) throw ConsistencyError("neuron " + std::to_string(id) + " inserted twice without erase");
  const std::uint32_t limit = hash_->code_bits() >= 32 ? 0xFFFFFFFFu : (1u << hash_->code_bits()) - 1u;
  for (std::size_t t = 0; t < codes.size(); ++t) {
    if (codes[t] > limit) throw DimensionError("insert_codes: code wider than the table");
  }
  for (std::size_t t = 0; t < codes.size(); ++t) {
    bucket_for_insert(t, codes[t]).push_back(id);
    codes_[static_cast<std::size_t>(id) * num_tables() + t] = codes[t];
  }
  present_[id] = 1;
  ++count_;
}

void LshTables::remove_with_codes(std::uint32_t id, std::span<const std::uint32_t> codes) {
  // Verify first so a failed erase leaves the tables untouched.
  for (std::size_t t = 0; t < codes.size(); ++t) {
    const auto* b = find_bucket(t, codes[t]);
    if (b == nullptr || std::find(b->begin(), b->end(), id) == b->end()) {
      throw ConsistencyError("neuron " + std::to_string(id) + " not found in table " + std::to_string(t) +
                             " bucket " + std::to_string(codes[t]));
    }
  }
  for (std::size_t t = 0; t < codes.size(); ++t) {
    auto* b = find_bucket(t, codes[t]);
    b->erase(std::find(b->begin(), b->end(), id));
    if (!flat_ && b->empty()) map_buckets_[t].erase(codes[t]);
  }
  present_[id] = 0;
  --count_;
}

void LshTables::erase(std::uint32_t id, std::span<const float> old_w) {
  check_id(id);
  if (!present_[id]) throw ConsistencyError("erase of neuron " + std::to_string(id) + " which is not present");
  std::vector<std::uint32_t> codes(num_tables());
  hash_->codes(old_w, std::span<std::uint32_t>(codes), lanes_);
  remove_with_codes(id, codes);
}

void LshTables::erase(std::uint32_t id) {
  check_id(id);
  if (!present_[id]) throw ConsistencyError("erase of neuron " + std::to_string(id) + " which is not present");
  std::vector<std::uint32_t> codes(stored_codes(id).begin(), stored_codes(id).end());
  remove_with_codes(id, codes);
}

bool LshTables::contains(std::uint32_t id) const { return id < present_.size() && present_[id] != 0; }

std::span<const std::uint32_t> LshTables::stored_codes(std::uint32_t id) const {
  check_id(id);
  return std::span<const std::uint32_t>(codes_).subspan(static_cast<std::size_t>(id) * num_tables(), num_tables());
}

void LshTables::query_codes(std::span<const std::uint32_t> codes, std::vector<std::uint32_t>& out,
                            QueryScratch& scratch) const {
  if (scratch.stamp.size() != capacity()) {
    scratch.stamp.assign(capacity(), 0);
    scratch.epoch = 0;
  }
  if (++scratch.epoch == 0) {
    std::fill(scratch.stamp.begin(), scratch.stamp.end(), 0);
    scratch.epoch = 1;
  }
  for (std::size_t t = 0; t < codes.size(); ++t) {
    const auto* b = find_bucket(t, codes[t]);
    if (b == nullptr) continue;
    for (std::uint32_t id : *b) {
      if (scratch.stamp[id] != scratch.epoch) {
        scratch.stamp[id] = scratch.epoch;
        out.push_back(id);
      }
    }
  }
}

void LshTables::query(std::span<const float> x, std::vector<std::uint32_t>& out, QueryScratch& scratch) const {
  scratch.codes.resize(num_tables());
  hash_->codes(x, std::span<std::uint32_t>(scratch.codes), lanes_);
  query_codes(scratch.codes, out, scratch);
}

void LshTables::query(SparseVectorRef x, std::vector<std::uint32_t>& out, QueryScratch& scratch) const {
  scratch.codes.resize(num_tables());
  hash_->codes(x, std::span<std::uint32_t>(scratch.codes), lanes_);
  query_codes(scratch.codes, out, scratch);
}

std::vector<std::uint32_t> LshTables::query(std::span<const float> x) const {
  QueryScratch scratch;
  std::vector<std::uint32_t> out;
  query(x, out, scratch);
  return out;
}

std::vector<std::uint32_t> LshTables::query(SparseVectorRef x) const {
  QueryScratch scratch;
  std::vector<std::uint32_t> out;
  query(x, out, scratch);
  return out;
}

void LshTables::clear() {
  for (auto& b : flat_buckets_) b.clear();
  for (auto& m : map_buckets_) m.clear();
  std::fill(present_.begin(), present_.end(), 0);
  count_ = 0;
}

void LshTables::rebuild(std::size_t n, const RowFn& row, int threads) {
  if (n > capacity()) throw BoundsError("rebuild: more neurons than table capacity");
  const std::size_t l = num_tables();
  std::vector<std::uint32_t> all(n * l);
  std::exception_ptr failure;
#pragma omp parallel num_threads(std::max(threads, 1))
  {
    std::vector<float> scratch;
#pragma omp for schedule(static)
    for (std::size_t id = 0; id < n; ++id) {
      try {
        hash_->codes(row(static_cast<std::uint32_t>(id), scratch), std::span<std::uint32_t>(all).subspan(id * l, l),
                     lanes_);
      } catch (...) {
#pragma omp critical(lshtrain_rebuild_error)
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  clear();
  for (std::size_t id = 0; id < n; ++id) {
    insert_codes(static_cast<std::uint32_t>(id), std::span<const std::uint32_t>(all).subspan(id * l, l));
  }
}

std::span<const std::uint32_t> LshTables::bucket(std::size_t table, std::uint32_t code) const {
  if (table >= num_tables()) throw BoundsError("table index out of range");
  const auto* b = find_bucket(table, code);
  if (b == nullptr) return {};
  return *b;
}

std::size_t LshTables::table_population(std::size_t table) const {
  if (table >= num_tables()) throw BoundsError("table index out of range");
  std::size_t total = 0;
  if (flat_) {
    const std::size_t width = std::size_t{1} << hash_->code_bits();
    for (std::size_t c = 0; c < width; ++c) total += flat_buckets_[(table << hash_->code_bits()) | c].size();
  } else {
    for (const auto& [code, b] : map_buckets_[table]) total += b.size();
  }
  return total;
}

bool LshTables::same_contents(const LshTables& other) const {
  if (num_tables() != other.num_tables() || hash_->code_bits() != other.hash_->code_bits() ||
      present_ != other.present_) {
    return false;
  }
  const auto sorted = [](std::span<const std::uint32_t> b) {
    std::vector<std::uint32_t> v(b.begin(), b.end());
    std::sort(v.begin(), v.end());
    return v;
  };
  for (std::size_t t = 0; t < num_tables(); ++t) {
    // Every id is in exactly one bucket per table, so comparing each id's
    // bucket content from one side covers both.
    for (std::size_t id = 0; id < present_.size(); ++id) {
      if (!present_[id]) continue;
      const std::uint32_t code = codes_[id * num_tables() + t];
      if (code != other.codes_[id * num_tables() + t]) return false;
      if (sorted(bucket(t, code)) != sorted(other.bucket(t, code))) return false;
    }
  }
  return true;
}

}  // namespace lshtrain
