#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tsr::cli {

struct PlotOptions {
  std::string x_column = "epoch";
  std::string y_column = "full_train_loss";
  bool log_y = false;
  std::string title;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

/// Skips '#' lines; the first remaining line is the header.
CsvTable read_csv(const std::filesystem::path& path);

/// Line chart, one polyline per CSV, legend from file stems. Rows whose x or
/// y cell is empty are skipped. Throws FormatError when headers differ or a
/// column is missing.
std::string render_svg(const std::vector<std::filesystem::path>& csv_paths, const PlotOptions& opts);

void emit_plot(const std::vector<std::filesystem::path>& csv_paths,
               const std::filesystem::path& out_svg, const PlotOptions& opts = {});

}  // namespace tsr::cli
