#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "messy/bench.hpp"
#include "messy/density.hpp"
#include "messy/sample_set.hpp"
#include "messy/search.hpp"

namespace messy {

/// One sample per row, comma separated, optional non-numeric header line.
/// Throws ParseError (with 1-based line) on ragged rows, non-numeric or
/// non-finite cells, or an empty input.
SampleSet parse_csv(std::string_view text, std::string source = {});
/// Throws IoError when the file cannot be read.
SampleSet read_csv(const std::string& path);

std::string format_csv(const Eigen::MatrixXd& x);
void write_csv(const std::string& path, const Eigen::MatrixXd& x);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

/// Pretty-printed JSON: dim, mode, kl_score, expression and one entry per
/// level (exponent, basis, lambda, logZ, support, mass, reference). Infinite
/// support edges are written as null.
std::string density_to_json(const MessyDensity& d);
/// Accepts the output of density_to_json or of estimate_to_json. Throws
/// ParseError on malformed input.
MessyDensity density_from_json(std::string_view text);

/// Density plus the per-iteration search log.
std::string estimate_to_json(const MessyFit& fit, const SearchConfig& cfg, std::size_t n,
                             bool timing = true);

std::string report_to_json(const BenchmarkReport& r, bool timing = true);
std::string scaling_to_json(const ScalingReport& r, bool timing = true);

}  // namespace messy
