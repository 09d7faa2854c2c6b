#pragma once

#include <cstddef>
#include <algorithm>
#include <functional>
#include <memory>

#include "hallci/torus_field.hpp"

namespace hallci {

// A space-time field delivered one time slice at a time. Slices are either
// held in memory or produced on demand and kept in a small LRU cache, which
// lets large grids stream through the pipeline without holding every slice.
class FieldSeries {
 public:
  using Slice = std::shared_ptr<const TorusField>;
  using Producer = std::function<TorusField(int j)>;

  FieldSeries() = default;
  FieldSeries(const GridSpec& grid, Rank rank, Symmetry sym, Producer producer,
              std::size_t cache_slices = 8);

  static FieldSeries wrap(const TorusField& full);
  static FieldSeries zero(const GridSpec& grid, Rank rank, Symmetry sym = Symmetry::none);

  bool valid() const { return static_cast<bool>(node_); }
  const GridSpec& grid() const;
  Rank rank() const;
  Symmetry symmetry() const;
  int n_t() const { return grid().n_t; }

  // Stationary field at time index j; indices are clamped to [0, n_t).
  Slice at(int j) const;
  TorusField materialize() const;

 private:
  struct Node;
  std::shared_ptr<Node> node_;
};

}  // namespace hallci

#include <list>
#include <mutex>
#include <utility>

namespace hallci {

// Per-time-slice values of any type, produced on demand and kept in an LRU
// cache. Used for bundles of fields that are built together.
template <class T>
class LazySlices {
 public:
  using Value = std::shared_ptr<const T>;
  using Producer = std::function<T(int j)>;

  LazySlices() = default;
  LazySlices(int n_t, Producer producer, std::size_t cache_slices = 6)
      : node_(std::make_shared<Node>()) {
    node_->n_t = n_t;
    node_->producer = std::move(producer);
    node_->capacity = std::max<std::size_t>(cache_slices, 1);
  }

  int n_t() const { return node_->n_t; }

  // Indices are clamped to [0, n_t).
  Value at(int j) const {
    j = std::clamp(j, 0, node_->n_t - 1);
    {
      std::lock_guard<std::mutex> lock(node_->mutex);
      for (auto it = node_->lru.begin(); it != node_->lru.end(); ++it)
        if (it->first == j) {
          node_->lru.splice(node_->lru.begin(), node_->lru, it);
          return node_->lru.front().second;
        }
    }
    auto made = std::make_shared<const T>(node_->producer(j));
    std::lock_guard<std::mutex> lock(node_->mutex);
    for (auto& e : node_->lru)
      if (e.first == j) return e.second;
    node_->lru.emplace_front(j, made);
    while (node_->lru.size() > node_->capacity) node_->lru.pop_back();
    return made;
  }

 private:
  struct Node {
    int n_t = 0;
    Producer producer;
    std::size_t capacity = 6;
    std::mutex mutex;
    std::list<std::pair<int, Value>> lru;
  };
  std::shared_ptr<Node> node_;
};

}  // namespace hallci
