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
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "lshtrain/error.hpp"
#include "random_inputs.hpp"

namespace lshtrain {
namespace {

using testing::distinct_indices;
using testing::normal_vector;
using testing::uniform_size;

constexpr LaneConfig kScalar{16, false};

HashFamilyParams dwta(std::uint32_t k, std::uint32_t l, std::size_t dim, std::uint64_t seed = 7,
                      std::uint32_t bin = 8) {
  HashFamilyParams p;
  p.family = HashFamily::Dwta;
  p.k = k;
  p.l = l;
  p.input_dim = dim;
  p.seed = seed;
  p.bin_size = bin;
  return p;
}

HashFamilyParams simhash(std::uint32_t k, std::uint32_t l, std::size_t dim, std::uint64_t seed = 7) {
  HashFamilyParams p;
  p.family = HashFamily::SimHash;
  p.k = k;
  p.l = l;
  p.input_dim = dim;
  p.seed = seed;
  return p;
}

struct Sparse {
  std::vector<std::uint32_t> idx;
  std::vector<float> val;
  SparseVectorRef ref() const { return {idx, val}; }
  std::vector<float> dense(std::size_t dim) const {
    std::vector<float> d(dim, 0.0f);
    for (std::size_t k = 0; k < idx.size(); ++k) d[idx[k]] = val[k];
    return d;
  }
};

Sparse random_sparse(std::mt19937_64& gen, std::size_t dim, std::size_t nnz) {
  Sparse s;
  s.idx = distinct_indices(gen, dim, nnz);
  s.val = normal_vector(gen, s.idx.size());
  return s;
}

// Materializes every (elementary hash, slot, value) triple of x, takes the
// per-bin argmax and densifies with the documented probe sequence.
std::vector<std::uint32_t> dwta_oracle(const DwtaHash& h, const Sparse& x) {
  const HashFamilyParams& p = h.params();
  struct Triple {
    std::uint32_t hash, slot;
    float value;
  };
  std::vector<Triple> triples;
  for (std::size_t k = 0; k < x.idx.size(); ++k) {
    if (x.val[k] == 0.0f) continue;
    for (const auto& pl : h.placements(x.idx[k])) triples.push_back({pl.hash, pl.slot, x.val[k]});
  }
  const std::uint32_t bits = static_cast<std::uint32_t>(std::log2(p.bin_size));
  std::vector<std::uint32_t> codes(p.l);
  for (std::uint32_t t = 0; t < p.l; ++t) {
    std::vector<long> winner(p.k, -1);
    for (std::uint32_t b = 0; b < p.k; ++b) {
      float best = 0.0f;
      for (const Triple& tr : triples) {
        if (tr.hash != t * p.k + b) continue;
        if (winner[b] < 0 || tr.value > best || (tr.value == best && tr.slot < winner[b])) {
          best = tr.value;
          winner[b] = tr.slot;
        }
      }
    }
    std::uint32_t code = 0;
    for (std::uint32_t b = 0; b < p.k; ++b) {
      long w = winner[b];
      for (std::uint64_t a = 1; w < 0 && a <= p.densify_cap; ++a) w = winner[(b + a * 2654435761ull) % p.k];
      if (w < 0) w = 0;
      code |= static_cast<std::uint32_t>(w) << (b * bits);
    }
    codes[t] = code;
  }
  return codes;
}

TEST(HashParamsTest, Validation) {
  EXPECT_THROW(dwta(6, 4, 10, 1, 6).validate(), ConfigError);   // bin size not a power of two
  EXPECT_THROW(dwta(11, 4, 10, 1, 8).validate(), ConfigError);  // 33 bits
  EXPECT_THROW(simhash(31, 2, 10).validate(), ConfigError);
  EXPECT_THROW(dwta(0, 4, 10).validate(), ConfigError);
  EXPECT_THROW(dwta(2, 4, 0).validate(), ConfigError);
  EXPECT_EQ(dwta(6, 4, 10).code_bits(), 18u);
  EXPECT_EQ(simhash(9, 4, 10).code_bits(), 9u);
  EXPECT_EQ(parse_hash_family("simhash"), HashFamily::SimHash);
  EXPECT_THROW(parse_hash_family("minhash"), ConfigError);
}

TEST(DwtaTest, PlacementMapIsAPureInjectiveMap) {
  const HashFamilyParams p = dwta(4, 10, 30, 99);
  const DwtaHash a(p), b(p);
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (std::uint32_t f = 0; f < 30; ++f) {
    const auto pa = a.placements(f);
    const auto pb = b.placements(f);
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) {
      EXPECT_EQ(pa[k].hash, pb[k].hash);
      EXPECT_EQ(pa[k].slot, pb[k].slot);
      EXPECT_LT(pa[k].slot, 8u);
      EXPECT_LT(pa[k].hash, 40u);
      EXPECT_TRUE(seen.insert({pa[k].hash, pa[k].slot}).second);
    }
  }
  // Every slot of every bin is owned by some feature.
  EXPECT_EQ(seen.size(), 40u * 8u);
}

TEST(DwtaTest, MatchesMaterializedBinsOracle) {
  std::mt19937_64 gen(1);
  // Two bins of four slots; few non-zeros so densification is exercised.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const DwtaHash h(dwta(2, 5, 12, seed, 4));
    for (int rep = 0; rep < 20; ++rep) {
      const Sparse x = random_sparse(gen, 12, 3);
      std::vector<std::uint32_t> got(5);
      h.codes(x.ref(), got);
      EXPECT_EQ(got, dwta_oracle(h, x));
    }
  }
  for (int rep = 0; rep < 200; ++rep) {
    const DwtaHash h(dwta(static_cast<std::uint32_t>(uniform_size(gen, 1, 6)), 7, 300, rep, 8));
    const Sparse x = random_sparse(gen, 300, uniform_size(gen, 0, 40));
    std::vector<std::uint32_t> got(7);
    h.codes(x.ref(), got);
    EXPECT_EQ(got, dwta_oracle(h, x));
  }
}

TEST(DwtaTest, AllRoutesAgree) {
  std::mt19937_64 gen(2);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t dim = uniform_size(gen, 5, 400);
    const LshHash h(dwta(static_cast<std::uint32_t>(uniform_size(gen, 1, 8)), 9, dim, rep, 8));
    Sparse x = random_sparse(gen, dim, uniform_size(gen, 0, dim));
    if (rep % 3 == 0) {
      for (float& v : x.val) v = std::round(v);  // ties and explicit zeros
    }
    const auto sparse = h.codes(x.ref());
    const auto dense = x.dense(dim);
    EXPECT_EQ(h.codes(dense, kScalar), sparse);
    for (std::size_t w : {4, 16, 64}) EXPECT_EQ(h.codes(dense, LaneConfig{w, true}), sparse);
  }
}

TEST(DwtaTest, AllZeroInputGivesFallbackCode) {
  const LshHash h(dwta(4, 6, 50));
  const std::vector<float> zero(50, 0.0f);
  EXPECT_EQ(h.codes(zero), std::vector<std::uint32_t>(6, 0u));
  EXPECT_EQ(h.codes(SparseVectorRef{}), std::vector<std::uint32_t>(6, 0u));
}

TEST(DwtaTest, DimensionErrors) {
  const LshHash h(dwta(4, 6, 50));
  const std::vector<float> wrong(49, 1.0f);
  EXPECT_THROW(h.codes(wrong), DimensionError);
  const std::uint32_t idx[] = {50};
  const float val[] = {1.0f};
  EXPECT_THROW(h.codes(SparseVectorRef{idx, val}), DimensionError);
}

TEST(HashInvarianceTest, PositiveScaling) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  const std::size_t dim = 200;
  const LshHash d(dwta(6, 8, dim, 11));
  const LshHash s(simhash(9, 8, dim, 11));
  for (int rep = 0; rep < 10000; ++rep) {
    const Sparse x = random_sparse(gen, dim, uniform_size(gen, 1, 60));
    const float c = scale(gen);
    Sparse y = x;
    for (float& v : y.val) v *= c;
    ASSERT_EQ(d.codes(x.ref()), d.codes(y.ref()));
    ASSERT_EQ(s.codes(x.ref()), s.codes(y.ref()));
  }
}

TEST(SimHashTest, AntipodalComplement) {
  std::mt19937_64 gen(4);
  const std::size_t dim = 150;
  const HashFamilyParams p = simhash(10, 6, dim, 5);
  const SimHash h(p);
  std::vector<std::vector<std::pair<std::uint32_t, float>>> proj;
  for (std::uint32_t j = 0; j < p.k * p.l; ++j) proj.push_back(h.projection(j));
  int checked = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    const Sparse x = random_sparse(gen, dim, uniform_size(gen, 1, 150));
    const std::vector<float> xd = x.dense(dim);
    bool any_zero = false;
    for (const auto& pr : proj) {
      double s = 0.0;
      for (auto [i, sign] : pr) s += sign * xd[i];
      any_zero |= s == 0.0;
    }
    if (any_zero) continue;
    Sparse neg = x;
    for (float& v : neg.val) v = -v;
    std::vector<std::uint32_t> a(p.l), b(p.l);
    h.codes(x.ref(), a);
    h.codes(neg.ref(), b);
    for (std::uint32_t t = 0; t < p.l; ++t) ASSERT_EQ(a[t] ^ b[t], (1u << p.k) - 1u);
    ++checked;
  }
  EXPECT_GT(checked, 5000);
}

TEST(SimHashTest, ProjectionsAreSparseSignVectors) {
  const HashFamilyParams p = simhash(4, 4, 3000, 9);
  const SimHash h(p);
  const SimHash again(p);
  std::size_t total = 0;
  for (std::uint32_t j = 0; j < 16; ++j) {
    const auto pr = h.projection(j);
    EXPECT_EQ(pr, again.projection(j));
    total += pr.size();
    for (auto [i, s] : pr) EXPECT_TRUE(s == 1.0f || s == -1.0f);
  }
  // About a third of the coordinates per projection.
  EXPECT_NEAR(static_cast<double>(total) / (16.0 * 3000.0), 1.0 / 3.0, 0.02);
}

TEST(SimHashTest, CodesMatchProjectionSigns) {
  std::mt19937_64 gen(5);
  const HashFamilyParams p = simhash(7, 5, 90, 3);
  const SimHash h(p);
  for (int rep = 0; rep < 200; ++rep) {
    const Sparse x = random_sparse(gen, 90, uniform_size(gen, 0, 90));
    const std::vector<float> xd = x.dense(90);
    std::vector<std::uint32_t> got(p.l), dense(p.l);
    h.codes(x.ref(), got);
    h.codes(xd, dense);
    EXPECT_EQ(got, dense);
    for (std::uint32_t t = 0; t < p.l; ++t) {
      for (std::uint32_t b = 0; b < p.k; ++b) {
        double s = 0.0;
        for (auto [i, sign] : h.projection(t * p.k + b)) s += sign * xd[i];
        if (std::abs(s) < 1e-5) continue;  // float accumulation may land either side
        EXPECT_EQ((got[t] >> b) & 1u, s >= 0.0 ? 1u : 0u);
      }
    }
  }
}

TEST(SimHashTest, CollisionRateFollowsAngle) {
  std::mt19937_64 gen(6);
  const std::size_t dim = 1000;
  const HashFamilyParams p = simhash(8, 16, dim, 21);
  const SimHash h(p);
  for (double theta : {std::numbers::pi / 6, std::numbers::pi / 3, std::numbers::pi / 2}) {
    std::uint64_t same = 0, total = 0;
    for (int pair = 0; pair < 2000; ++pair) {
      std::vector<double> u(dim), w(dim);
      std::normal_distribution<double> nd;
      double nu = 0.0;
      for (double& v : u) {
        v = nd(gen);
        nu += v * v;
      }
      nu = std::sqrt(nu);
      for (double& v : u) v /= nu;
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        w[i] = nd(gen);
        dot += w[i] * u[i];
      }
      double nw = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        w[i] -= dot * u[i];
        nw += w[i] * w[i];
      }
      nw = std::sqrt(nw);
      std::vector<float> a(dim), b(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        a[i] = static_cast<float>(u[i]);
        b[i] = static_cast<float>(std::cos(theta) * u[i] + std::sin(theta) * w[i] / nw);
      }
      std::vector<std::uint32_t> ca(p.l), cb(p.l);
      h.codes(a, ca);
      h.codes(b, cb);
      for (std::uint32_t t = 0; t < p.l; ++t) {
        same += p.k - static_cast<std::uint32_t>(std::popcount(ca[t] ^ cb[t]));
        total += p.k;
      }
    }
    EXPECT_NEAR(static_cast<double>(same) / static_cast<double>(total), 1.0 - theta / std::numbers::pi, 0.02);
  }
}

TEST(TablesTest, EmptyTablesReturnNothing) {
  const LshTables t(dwta(3, 4, 20), 10);
  const std::vector<float> x(20, 1.0f);
  EXPECT_TRUE(t.query(x).empty());
  EXPECT_EQ(t.size(), 0u);
}

TEST(TablesTest, SingleTableSelfQuery) {
  std::mt19937_64 gen(7);
  LshTables t(dwta(3, 1, 20), 10);
  const std::vector<float> w = normal_vector(gen, 20);
  t.insert(4, w);
  EXPECT_EQ(t.query(w), std::vector<std::uint32_t>{4});
}

TEST(TablesTest, InsertConservesAndMatchesRecomputedCodes) {
  std::mt19937_64 gen(8);
  for (const HashFamilyParams& p : {dwta(3, 6, 40), dwta(6, 5, 40, 3, 16), simhash(5, 6, 40)}) {
    LshTables t(p, 100);
    std::vector<std::vector<float>> w;
    for (std::uint32_t id = 0; id < 100; ++id) {
      w.push_back(normal_vector(gen, 40));
      t.insert(id, w.back());
    }
    EXPECT_EQ(t.size(), 100u);
    for (std::size_t tb = 0; tb < p.l; ++tb) EXPECT_EQ(t.table_population(tb), 100u);
    const LshHash oracle(p);
    for (std::uint32_t id = 0; id < 100; ++id) {
      const auto codes = oracle.codes(w[id], kScalar);
      EXPECT_TRUE(std::equal(codes.begin(), codes.end(), t.stored_codes(id).begin()));
      for (std::size_t tb = 0; tb < p.l; ++tb) {
        const auto b = t.bucket(tb, codes[tb]);
        EXPECT_EQ(std::count(b.begin(), b.end(), id), 1);
      }
      const auto q = t.query(w[id]);
      EXPECT_NE(std::find(q.begin(), q.end(), id), q.end());
    }
  }
}

TEST(TablesTest, InsertThenEraseRestoresState) {
  std::mt19937_64 gen(9);
  LshTables t(dwta(4, 5, 30), 20);
  const LshTables empty(dwta(4, 5, 30), 20);
  for (std::uint32_t id = 0; id < 10; ++id) t.insert(id, normal_vector(gen, 30));
  LshTables before = t;
  const std::vector<float> w = normal_vector(gen, 30);
  t.insert(15, w);
  t.erase(15, w);
  EXPECT_TRUE(t.same_contents(before));
  EXPECT_FALSE(t.contains(15));
  for (std::uint32_t id = 0; id < 10; ++id) t.erase(id);
  EXPECT_TRUE(t.same_contents(empty));
}

TEST(TablesTest, ConsistencyErrors) {
  std::mt19937_64 gen(10);
  LshTables t(dwta(4, 5, 30), 20);
  const std::vector<float> w = normal_vector(gen, 30);
  EXPECT_THROW(t.erase(3, w), ConsistencyError);
  EXPECT_THROW(t.erase(3), ConsistencyError);
  t.insert(3, w);
  EXPECT_THROW(t.insert(3, w), ConsistencyError);
  // A vector that hashes elsewhere in at least one table.
  std::vector<float> other = normal_vector(gen, 30);
  while (LshHash(t.params()).codes(other) == LshHash(t.params()).codes(w)) other = normal_vector(gen, 30);
  EXPECT_THROW(t.erase(3, other), ConsistencyError);
  EXPECT_TRUE(t.contains(3));  // a failed erase removes nothing
  EXPECT_THROW(t.insert(20, w), BoundsError);
}

TEST(TablesTest, RandomScriptsMatchMembershipOracle) {
  std::mt19937_64 gen(11);
  for (int script = 0; script < 1000; ++script) {
    const std::size_t dim = uniform_size(gen, 4, 24);
    const std::size_t cap = uniform_size(gen, 1, 30);
    const HashFamilyParams p = script % 2 == 0 ? dwta(static_cast<std::uint32_t>(uniform_size(gen, 1, 3)),
                                                      static_cast<std::uint32_t>(uniform_size(gen, 1, 4)), dim,
                                                      script, 4)
                                               : simhash(static_cast<std::uint32_t>(uniform_size(gen, 1, 4)),
                                                         static_cast<std::uint32_t>(uniform_size(gen, 1, 4)), dim, script);
    LshTables t(p, cap);
    const LshHash oracle(p);
    std::vector<std::vector<float>> current(cap);
    std::set<std::uint32_t> present;
    for (int op = 0; op < 40; ++op) {
      const int kind = static_cast<int>(uniform_size(gen, 0, 2));
      const auto id = static_cast<std::uint32_t>(uniform_size(gen, 0, cap - 1));
      if (kind == 0) {
        if (present.count(id)) {
          EXPECT_THROW(t.insert(id, current[id]), ConsistencyError);
        } else {
          current[id] = normal_vector(gen, dim);
          t.insert(id, current[id]);
          present.insert(id);
        }
      } else if (kind == 1) {
        if (present.count(id)) {
          t.erase(id, current[id]);
          present.erase(id);
        } else {
          EXPECT_THROW(t.erase(id), ConsistencyError);
        }
      } else {
        const std::vector<float> x = normal_vector(gen, dim);
        const auto qc = oracle.codes(x, kScalar);
        std::set<std::uint32_t> expect;
        for (std::uint32_t n : present) {
          const auto nc = oracle.codes(current[n], kScalar);
          for (std::size_t tb = 0; tb < p.l; ++tb) {
            if (nc[tb] == qc[tb]) expect.insert(n);
          }
        }
        const auto got = t.query(x);
        EXPECT_EQ(got.size(), std::set<std::uint32_t>(got.begin(), got.end()).size());
        ASSERT_EQ(std::set<std::uint32_t>(got.begin(), got.end()), expect) << "script " << script;
      }
    }
    EXPECT_EQ(t.size(), present.size());
  }
}

TEST(TablesTest, RebuildIsIdempotentAndEqualsReinsertion) {
  std::mt19937_64 gen(12);
  const std::size_t n = 200, dim = 64;
  std::vector<std::vector<float>> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back(normal_vector(gen, dim));
  const LshTables::RowFn row = [&](std::uint32_t id, std::vector<float>&) { return std::span<const float>(rows[id]); };
  for (const HashFamilyParams& p : {dwta(4, 10, dim), simhash(6, 10, dim)}) {
    LshTables a(p, n), b(p, n), c(p, n);
    a.rebuild(n, row, 1);
    b.rebuild(n, row, 4);
    EXPECT_TRUE(a.same_contents(b));
    b.rebuild(n, row, 2);
    EXPECT_TRUE(a.same_contents(b));
    // Stale contents, then delete everything and insert everything.
    for (std::uint32_t i = 0; i < n; i += 3) c.insert(i, normal_vector(gen, dim));
    for (std::uint32_t i = 0; i < n; i += 3) c.erase(i);
    for (std::uint32_t i = 0; i < n; ++i) c.insert(i, rows[i]);
    EXPECT_TRUE(a.same_contents(c));
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto q = a.query(rows[i]);
      EXPECT_NE(std::find(q.begin(), q.end(), i), q.end());
    }
  }
}

TEST(TablesTest, SameSeedSameTables) {
  std::mt19937_64 gen(13);
  const std::size_t n = 50, dim = 30;
  std::vector<std::vector<float>> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back(normal_vector(gen, dim));
  const LshTables::RowFn row = [&](std::uint32_t id, std::vector<float>&) { return std::span<const float>(rows[id]); };
  LshTables a(dwta(5, 7, dim, 77), n), b(dwta(5, 7, dim, 77), n), c(dwta(5, 7, dim, 78), n);
  a.rebuild(n, row);
  b.rebuild(n, row);
  c.rebuild(n, row);
  EXPECT_TRUE(a.same_contents(b));
  EXPECT_FALSE(a.same_contents(c));
}

TEST(TablesTest, QueryDeduplicatesWithScratch) {
  std::mt19937_64 gen(14);
  LshTables t(dwta(2, 12, 10, 5, 2), 30);
  for (std::uint32_t i = 0; i < 30; ++i) t.insert(i, normal_vector(gen, 10));
  QueryScratch scratch;
  std::vector<std::uint32_t> out;
  for (int rep = 0; rep < 50; ++rep) {
    const std::vector<float> x = normal_vector(gen, 10);
    out.clear();
    t.query(x, out, scratch);
    EXPECT_EQ(out.size(), std::set<std::uint32_t>(out.begin(), out.end()).size());
    EXPECT_EQ(out, t.query(x));
  }
}

}  // namespace
}  // namespace lshtrain
