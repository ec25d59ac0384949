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

#pragma once

// Locality-sensitive hash families and the bucketized tables used to pick
// each input's active neurons.
//
// DWTA (densified winner-takes-all) maps every feature index to a
// (bin, slot) pair through precomputed random permutations; the code of a
// table is the concatenation of the winning slot of each of its K bins.
// Empty bins borrow a neighbouring bin's winner. SimHash takes the sign of
// K sparse +/-1 projections per table.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "lshtrain/kernels.hpp"

namespace lshtrain {

enum class HashFamily : std::uint8_t { Dwta, SimHash };

HashFamily parse_hash_family(std::string_view s);
std::string_view to_string(HashFamily f) noexcept;

struct HashFamilyParams {
  HashFamily family = HashFamily::Dwta;
  std::uint32_t k = 6;   // bins (DWTA) or bits (SimHash) per table
  std::uint32_t l = 400;  // tables
  std::size_t input_dim = 0;
  std::uint64_t seed = 0;
  std::uint32_t bin_size = 8;       // DWTA slots per bin, power of two
  std::uint32_t densify_cap = 100;  // DWTA probe attempts before falling back to slot 0

  // Throws ConfigError on out-of-range parameters.
  void validate() const;
  // Width of one table's code: k for SimHash, k * log2(bin_size) for DWTA.
  std::uint32_t code_bits() const;

  friend bool operator==(const HashFamilyParams&, const HashFamilyParams&) = default;
};

class DwtaHash {
 public:
  static constexpr std::uint32_t kDensifyStride = 2654435761u;  // prime
  static constexpr std::int32_t kEmpty = -1;

  explicit DwtaHash(const HashFamilyParams& p);

  const HashFamilyParams& params() const noexcept { return params_; }
  std::uint32_t num_permutations() const noexcept { return num_perm_; }

  // Scatter route: walk the non-zeros and update each bin they land in.
  void codes(SparseVectorRef x, std::span<std::uint32_t> out) const;
  // Dense input. With lanes enabled every bin's slots are gathered and
  // reduced with bins_argmax; otherwise the non-zeros are scattered. Both
  // routes agree.
  void codes(std::span<const float> x, std::span<std::uint32_t> out, LaneConfig lanes) const;

  struct Placement {
    std::uint32_t hash;  // elementary hash id = table * k + bin
    std::uint32_t slot;
  };
  // Every (elementary hash, slot) the feature is mapped to.
  std::vector<Placement> placements(std::uint32_t feature) const;

  // Bin probed on the given attempt (>= 1) when `bin` is empty.
  std::uint32_t densify_probe(std::uint32_t bin, std::uint32_t attempt) const noexcept;

  // Winner slots of one table (k entries, kEmpty for empty bins) -> code.
  std::uint32_t densify_and_compose(std::span<const std::int32_t> winners) const noexcept;

 private:
  void finish(std::span<const std::int32_t> slots, std::span<std::uint32_t> out) const;

  HashFamilyParams params_;
  std::uint32_t num_perm_ = 0;
  std::uint32_t slot_bits_ = 0;
  std::vector<std::uint32_t> hash_of_;   // [perm * dim + feature] -> elementary hash, or kNoHash
  std::vector<std::uint32_t> slot_of_;   // [perm * dim + feature] -> slot
  std::vector<std::int32_t> feature_at_;  // [hash * bin_size + slot] -> feature, or -1
};

class SimHash {
 public:
  explicit SimHash(const HashFamilyParams& p);

  const HashFamilyParams& params() const noexcept { return params_; }

  // Bit j is 1 iff projection j of x is >= 0. Projections accumulate in
  // increasing coordinate order for both input forms, so a vector and its
  // sparse encoding hash identically.
  void codes(SparseVectorRef x, std::span<std::uint32_t> out) const;
  void codes(std::span<const float> x, std::span<std::uint32_t> out) const;

  // Coordinates (ascending) and signs of projection `bit`; a pure function of (seed, bit).
  std::vector<std::pair<std::uint32_t, float>> projection(std::uint32_t bit) const;

 private:
  void finish(std::span<const float> proj, std::span<std::uint32_t> out) const;

  HashFamilyParams params_;
  std::vector<std::size_t> coord_offsets_;  // CSR over coordinates
  std::vector<std::uint32_t> coord_bits_;
  std::vector<float> coord_signs_;
};

class LshHash {
 public:
  explicit LshHash(const HashFamilyParams& p);

  const HashFamilyParams& params() const noexcept;
  std::uint32_t code_bits() const noexcept { return code_bits_; }

  void codes(SparseVectorRef x, std::span<std::uint32_t> out, LaneConfig lanes = {}) const;
  void codes(std::span<const float> x, std::span<std::uint32_t> out, LaneConfig lanes = {}) const;
  std::vector<std::uint32_t> codes(SparseVectorRef x, LaneConfig lanes = {}) const;
  std::vector<std::uint32_t> codes(std::span<const float> x, LaneConfig lanes = {}) const;

  const DwtaHash* dwta() const noexcept { return std::get_if<DwtaHash>(&impl_); }
  const SimHash* simhash() const noexcept { return std::get_if<SimHash>(&impl_); }

 private:
  std::variant<DwtaHash, SimHash> impl_;
  std::uint32_t code_bits_;
};

// Per-thread scratch for duplicate-free queries.
struct QueryScratch {
  std::vector<std::uint32_t> stamp;
  std::uint32_t epoch = 0;
  std::vector<std::uint32_t> codes;
};

class LshTables {
 public:
  // Neuron ids must be below `capacity`.
  LshTables(const HashFamilyParams& p, std::size_t capacity, LaneConfig lanes = {});

  const LshHash& hash() const noexcept { return *hash_; }
  std::size_t num_tables() const noexcept { return params().l; }
  const HashFamilyParams& params() const noexcept { return hash_->params(); }
  std::size_t capacity() const noexcept { return present_.size(); }
  std::size_t size() const noexcept { return count_; }
  LaneConfig lanes() const noexcept { return lanes_; }
  // Both DWTA routes give identical codes, so switching never invalidates buckets.
  void set_lanes(LaneConfig lanes) {
    lanes.validate();
    lanes_ = lanes;
  }

  // Throws ConsistencyError if the id is already present.
  void insert(std::uint32_t id, std::span<const float> w);
  void insert_codes(std::uint32_t id, std::span<const std::uint32_t> codes);

  // Removes the id from the buckets `old_w` hashes to. Throws
  // ConsistencyError if it is not found there (stale bookkeeping).
  void erase(std::uint32_t id, std::span<const float> old_w);
  // Removes the id using the codes recorded at insertion.
  void erase(std::uint32_t id);

  bool contains(std::uint32_t id) const;
  std::span<const std::uint32_t> stored_codes(std::uint32_t id) const;

  // Union over tables of the bucket x falls in, without duplicates. Ids are
  // appended to `out` in table order, then bucket order.
  void query(std::span<const float> x, std::vector<std::uint32_t>& out, QueryScratch& scratch) const;
  void query(SparseVectorRef x, std::vector<std::uint32_t>& out, QueryScratch& scratch) const;
  void query_codes(std::span<const std::uint32_t> codes, std::vector<std::uint32_t>& out,
                   QueryScratch& scratch) const;
  std::vector<std::uint32_t> query(std::span<const float> x) const;
  std::vector<std::uint32_t> query(SparseVectorRef x) const;

  // Fills `scratch` with neuron id's weight vector and returns a view of it
  // (or of the caller's own storage).
  using RowFn = std::function<std::span<const float>(std::uint32_t id, std::vector<float>& scratch)>;

  // Clears and reinserts ids [0, n) in order. Codes are computed on
  // `threads` threads; insertion is sequential.
  void rebuild(std::size_t n, const RowFn& row, int threads = 1);
  void clear();

  std::span<const std::uint32_t> bucket(std::size_t table, std::uint32_t code) const;
  std::size_t table_population(std::size_t table) const;

  // Same bucket membership, ignoring order within buckets.
  bool same_contents(const LshTables& other) const;

 private:
  std::vector<std::uint32_t>* find_bucket(std::size_t table, std::uint32_t code);
  const std::vector<std::uint32_t>* find_bucket(std::size_t table, std::uint32_t code) const;
  std::vector<std::uint32_t>& bucket_for_insert(std::size_t table, std::uint32_t code);
  void remove_with_codes(std::uint32_t id, std::span<const std::uint32_t> codes);
  void check_id(std::uint32_t id) const;

  std::shared_ptr<const LshHash> hash_;  // immutable, shared by copies
  LaneConfig lanes_;
  bool flat_ = true;
  std::vector<std::vector<std::uint32_t>> flat_buckets_;  // [table << bits | code]
  std::vector<std::unordered_map<std::uint32_t, std::vector<std::uint32_t>>> map_buckets_;
  std::vector<std::uint32_t> codes_;  // [id * L + table], valid while present
  std::vector<std::uint8_t> present_;
  std::size_t count_ = 0;
};

}  // namespace lshtrain
