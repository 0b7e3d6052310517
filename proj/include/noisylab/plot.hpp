#ifndef NOISYLAB_PLOT_HPP
#define NOISYLAB_PLOT_HPP

#include <filesystem>
#include <string>
#include <vector>

namespace noisylab {

/// SVG line chart (viewBox 800x500) of history columns against epoch, one
/// polyline per (file, column). Throws std::invalid_argument naming an
/// unknown column.
std::string render_plot(const std::vector<std::filesystem::path>& histories, const std::vector<std::string>& columns);

void emit_plot(const std::vector<std::filesystem::path>& histories, const std::filesystem::path& svg,
               const std::vector<std::string>& columns);

}  // namespace noisylab

#endif  // NOISYLAB_PLOT_HPP
