#ifndef NOISYLAB_SELECTION_HPP
#define NOISYLAB_SELECTION_HPP

#include <span>
#include <vector>

#include "noisylab/autodiff.hpp"
#include "noisylab/losses.hpp"

namespace noisylab {

/// Keep-ratio schedule: R(t) = 1 - min(t / warmup * tau, tau).
struct SelectionSchedule {
  Scalar noise_rate = 0.0;
  int warmup_epochs = 10;
  int total_epochs = 1;

  void validate() const;
};

struct SelectedSet {
  int epoch = 0;
  Scalar keep_ratio = 1.0;
  std::vector<std::size_t> indexes;  // ascending, unique
};

Scalar keep_ratio(const SelectionSchedule& schedule, int epoch);

/// Number of samples kept out of n at ratio R: floor(R * n).
std::size_t kept_count(Scalar ratio, std::size_t n);

/// Indexes of the floor(R*N) smallest losses, ties broken by the smaller
/// index, returned in ascending index order.
SelectedSet select_small_loss(const PerSampleLosses& losses, Scalar ratio, int epoch = 0);

/// Positions (into `losses`) of the `count` smallest values under the same
/// (loss, index) ordering, in rank order.
std::vector<std::size_t> smallest(std::span<const Scalar> losses, std::size_t count);

/// mask[j] = 1 iff batch_indexes[j] is in the selected set.
Mask batch_selected(const SelectedSet& selected, std::span<const std::size_t> batch_indexes);

}  // namespace noisylab

#endif  // NOISYLAB_SELECTION_HPP
