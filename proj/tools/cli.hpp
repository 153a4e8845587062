#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace promptdt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kConfigSchemaVersion = 1;

/// Bad flags, missing inputs or an output directory that would be clobbered.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int run(int argc, char** argv);

/// Root for default output directories: $PROMPTDT_RUNS_DIR, else ./runs.
std::filesystem::path runs_root();

/// Creates `dir`, refusing a non-empty existing directory unless `force`.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

// plot.cpp

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Bar {
  std::string label;
  double value = 0.0;
};

/// Line chart; `data_comment` is embedded verbatim as an XML comment.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series, const std::string& data_comment);
std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars,
                          const std::string& data_comment);

}  // namespace promptdt::cli
