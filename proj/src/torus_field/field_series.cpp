#include "hallci/field_series.hpp"

#include <algorithm>
#include <list>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace hallci {

struct FieldSeries::Node {
  GridSpec grid;
  Rank rank;
  Symmetry sym;
  Producer producer;
  std::size_t capacity;
  std::mutex mutex;
  std::list<std::pair<int, Slice>> lru;  // most recent first
};

FieldSeries::FieldSeries(const GridSpec& grid, Rank rank, Symmetry sym, Producer producer,
                         std::size_t cache_slices)
    : node_(std::make_shared<Node>()) {
  node_->grid = grid;
  node_->rank = rank;
  node_->sym = sym;
  node_->producer = std::move(producer);
  node_->capacity = std::max<std::size_t>(cache_slices, 1);
}

FieldSeries FieldSeries::wrap(const TorusField& full) {
  auto data = std::make_shared<TorusField>(full);
  FieldSeries s(full.grid(), full.rank(), full.symmetry(), [data](int j) { return data->slice(j); },
                static_cast<std::size_t>(full.grid().n_t));
  return s;
}

FieldSeries FieldSeries::zero(const GridSpec& grid, Rank rank, Symmetry sym) {
  GridSpec spatial = grid.spatial();
  return FieldSeries(grid, rank, sym, [spatial, rank, sym](int) { return TorusField(spatial, rank, sym); }, 1);
}

const GridSpec& FieldSeries::grid() const { return node_->grid; }
Rank FieldSeries::rank() const { return node_->rank; }
Symmetry FieldSeries::symmetry() const { return node_->sym; }

FieldSeries::Slice FieldSeries::at(int j) const {
  if (!node_) throw std::logic_error("FieldSeries: empty series");
  j = std::clamp(j, 0, node_->grid.n_t - 1);
  {
    std::lock_guard<std::mutex> lock(node_->mutex);
    for (auto it = node_->lru.begin(); it != node_->lru.end(); ++it) {
      if (it->first == j) {
        node_->lru.splice(node_->lru.begin(), node_->lru, it);
        return node_->lru.front().second;
      }
    }
  }
  // Produced outside the lock so producers may pull other series.
  auto made = std::make_shared<const TorusField>(node_->producer(j));
  std::lock_guard<std::mutex> lock(node_->mutex);
  for (auto& e : node_->lru)
    if (e.first == j) return e.second;
  node_->lru.emplace_front(j, made);
  while (node_->lru.size() > node_->capacity) node_->lru.pop_back();
  return made;
}

TorusField FieldSeries::materialize() const {
  TorusField out(grid(), rank(), symmetry());
  for (int j = 0; j < grid().n_t; ++j) out.assign_slice(j, *at(j));
  return out;
}

}  // namespace hallci
