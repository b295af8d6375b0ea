#pragma once

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "multical/dataset.hpp"
#include "multical/rng.hpp"

namespace multical {

struct TrainSizeWindow {
  std::size_t min = 0;
  std::size_t max = std::numeric_limits<std::size_t>::max();

  void validate() const {
    require(min <= max, "train size window: min (" + std::to_string(min) +
                            ") exceeds max (" + std::to_string(max) + ")");
  }
  bool contains(std::size_t n) const noexcept { return min <= n && n <= max; }
};

struct SplitPlan {
  std::vector<std::size_t> v1;  // per-split train counts drawn from g1
  std::vector<std::size_t> v2;  // per-split train counts drawn from g2
  std::size_t reps = 25;
  std::uint64_t seed = 0;
  bool augment_with_others = false;
  std::optional<TrainSizeWindow> train_size_window;
};

struct Split {
  std::vector<std::size_t> train_indices;  // sorted
  std::vector<std::size_t> test_indices;   // sorted complement
  std::size_t z1 = 0;
  std::size_t z2 = 0;
  std::size_t rep = 0;
  std::uint64_t split_seed = 0;
};

inline std::uint64_t split_seed_for(std::uint64_t plan_seed, std::size_t z1, std::size_t z2,
                                    std::size_t rep) noexcept {
  return derive_seed(plan_seed, {z1, z2, rep});
}

/// One cell of the (z1, z2) grid; sizes are known without drawing.
struct GridCell {
  std::size_t z1 = 0;
  std::size_t z2 = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

/// Demographic-controlled splits for the ordered group pair (g1, g2).
///
/// Split k is plan cell (v1[k / (|v2|·reps)], v2[(k / reps) % |v2|], k % reps).
/// Examples in both g1 and g2 are neither drawn nor counted; together with the
/// examples in neither group they form "others", which join train when
/// augment_with_others is set and test otherwise. Every split is a pure
/// function of (dataset, plan, k), so splits can be produced in any order or
/// in parallel.
class SplitEnumerator {
 public:
  SplitEnumerator(const LabeledDataset& ds, const GroupId& g1, const GroupId& g2,
                  SplitPlan plan)
      : n_(ds.size()), plan_(std::move(plan)) {
    require(g1 != g2, "splitter: g1 and g2 must differ");
    require(plan_.reps >= 1, "splitter: reps must be >= 1");
    require(!plan_.v1.empty() && !plan_.v2.empty(), "splitter: v1 and v2 must be non-empty");
    if (plan_.train_size_window) plan_.train_size_window->validate();
    const std::size_t a = ds.group_index(g1);
    const std::size_t b = ds.group_index(g2);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const bool in_a = ds.examples[i].in_group(a);
      const bool in_b = ds.examples[i].in_group(b);
      if (in_a && !in_b) {
        pool1_.push_back(i);
      } else if (in_b && !in_a) {
        pool2_.push_back(i);
      } else {
        others_.push_back(i);
      }
    }
    check_counts(plan_.v1, pool1_.size(), g1);
    check_counts(plan_.v2, pool2_.size(), g2);
  }

  std::size_t size() const noexcept { return plan_.v1.size() * plan_.v2.size() * plan_.reps; }
  const SplitPlan& plan() const noexcept { return plan_; }
  std::size_t pool1_size() const noexcept { return pool1_.size(); }
  std::size_t pool2_size() const noexcept { return pool2_.size(); }
  std::size_t others_size() const noexcept { return others_.size(); }

  std::size_t train_size_for(std::size_t z1, std::size_t z2) const noexcept {
    return z1 + z2 + (plan_.augment_with_others ? others_.size() : 0);
  }

  std::vector<GridCell> grid() const {
    std::vector<GridCell> cells;
    for (std::size_t z1 : plan_.v1)
      for (std::size_t z2 : plan_.v2) {
        const std::size_t train = train_size_for(z1, z2);
        cells.push_back({z1, z2, train, n_ - train});
      }
    return cells;
  }

  Split at(std::size_t k) const {
    require(k < size(), "splitter: split index out of range");
    const std::size_t per_z1 = plan_.v2.size() * plan_.reps;
    Split s;
    s.z1 = plan_.v1[k / per_z1];
    s.z2 = plan_.v2[(k / plan_.reps) % plan_.v2.size()];
    s.rep = k % plan_.reps;
    s.split_seed = split_seed_for(plan_.seed, s.z1, s.z2, s.rep);

    SplitMix64 rng1(derive_seed(s.split_seed, {seed_tag::kPoolDraw1}));
    SplitMix64 rng2(derive_seed(s.split_seed, {seed_tag::kPoolDraw2}));
    std::vector<char> in_train(n_, 0);
    for (std::size_t j : sample_without_replacement(pool1_.size(), s.z1, rng1))
      in_train[pool1_[j]] = 1;
    for (std::size_t j : sample_without_replacement(pool2_.size(), s.z2, rng2))
      in_train[pool2_[j]] = 1;
    if (plan_.augment_with_others)
      for (std::size_t i : others_) in_train[i] = 1;

    for (std::size_t i = 0; i < n_; ++i)
      (in_train[i] ? s.train_indices : s.test_indices).push_back(i);
    return s;
  }

  /// Indices k whose train size falls inside the plan's window (all if none).
  std::vector<std::size_t> selected_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < size(); ++k) {
      const std::size_t per_z1 = plan_.v2.size() * plan_.reps;
      const std::size_t z1 = plan_.v1[k / per_z1];
      const std::size_t z2 = plan_.v2[(k / plan_.reps) % plan_.v2.size()];
      if (!plan_.train_size_window || plan_.train_size_window->contains(train_size_for(z1, z2)))
        out.push_back(k);
    }
    return out;
  }

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Split;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(const SplitEnumerator* owner, std::size_t k) : owner_(owner), k_(k) {}

    Split operator*() const { return owner_->at(k_); }
    iterator& operator++() {
      ++k_;
      return *this;
    }
    iterator operator++(int) {
      auto copy = *this;
      ++k_;
      return copy;
    }
    bool operator==(const iterator& o) const noexcept { return k_ == o.k_; }

   private:
    const SplitEnumerator* owner_ = nullptr;
    std::size_t k_ = 0;
  };

  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, size()}; }

 private:
  static void check_counts(const std::vector<std::size_t>& counts, std::size_t available,
                           const GroupId& g) {
    for (std::size_t z : counts) {
      require(z >= 1, "splitter: group counts must be positive");
      if (z > available)
        fail(ErrorCode::PoolTooSmall, "pool too small for group '" + g + "': requested " +
                                          std::to_string(z) + ", available " +
                                          std::to_string(available));
    }
  }

  std::size_t n_;
  SplitPlan plan_;
  std::vector<std::size_t> pool1_, pool2_, others_;
};

inline SplitEnumerator enumerate_splits(const LabeledDataset& ds, const GroupId& g1,
                                        const GroupId& g2, SplitPlan plan) {
  return SplitEnumerator(ds, g1, g2, std::move(plan));
}

template <typename Range>
std::vector<Split> filter_by_train_size(const Range& splits, TrainSizeWindow window) {
  window.validate();
  std::vector<Split> kept;
  for (Split s : splits)
    if (window.contains(s.train_indices.size())) kept.push_back(std::move(s));
  return kept;
}

}  // namespace multical
