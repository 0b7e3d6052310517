#include "noisylab/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace noisylab {

void SelectionSchedule::validate() const {
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw std::invalid_argument("selection schedule: noise rate outside [0, 1)");
  if (warmup_epochs < 1 || warmup_epochs > total_epochs) {
    throw std::invalid_argument("selection schedule: need 1 <= warm-up epochs <= total epochs");
  }
}

Scalar keep_ratio(const SelectionSchedule& schedule, int epoch) {
  if (epoch < 0 || epoch > schedule.total_epochs) {
    throw std::out_of_range("keep_ratio: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(schedule.total_epochs) + "]");
  }
  const Scalar tau = schedule.noise_rate;
  return 1.0 - std::min(static_cast<Scalar>(epoch) / static_cast<Scalar>(schedule.warmup_epochs) * tau, tau);
}

std::size_t kept_count(Scalar ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<Scalar>(n)));
}

std::vector<std::size_t> smallest(std::span<const Scalar> losses, std::size_t count) {
  std::vector<std::size_t> order(losses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  count = std::min(count, order.size());
  const auto by_loss = [&](std::size_t a, std::size_t b) {
    return losses[a] < losses[b] || (losses[a] == losses[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(), by_loss);
  order.resize(count);
  return order;
}

SelectedSet select_small_loss(const PerSampleLosses& losses, Scalar ratio, int epoch) {
  if (losses.size() == 0) throw std::invalid_argument("select_small_loss: empty loss vector");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("select_small_loss: ratio outside (0, 1]");
  if (!losses.allFinite()) throw std::invalid_argument("select_small_loss: non-finite loss");

  const auto n = static_cast<std::size_t>(losses.size());
  SelectedSet out{epoch, ratio, smallest(std::span<const Scalar>(losses.data(), n), kept_count(ratio, n))};
  std::sort(out.indexes.begin(), out.indexes.end());
  return out;
}

Mask batch_selected(const SelectedSet& selected, std::span<const std::size_t> batch_indexes) {
  Mask mask(batch_indexes.size(), 0);
  for (std::size_t j = 0; j < batch_indexes.size(); ++j) {
    mask[j] = std::binary_search(selected.indexes.begin(), selected.indexes.end(), batch_indexes[j]) ? 1 : 0;
  }
  return mask;
}

}  // namespace noisylab
