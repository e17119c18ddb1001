#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "biogan/eval/coco.hpp"
#include "biogan/training.hpp"

namespace biogan {

/// Parses a newline-delimited loss log. Blank lines are skipped. Malformed
/// lines raise ParseError with their 1-based line number; a log without
/// records raises ParseError too.
std::vector<IterationRecord> parse_loss_log(const std::string& text,
                                            const std::string& source = "<loss log>");

/// loss_curves.png (one panel per series: adversarial, style, content, total,
/// discriminator) and loss_curves.csv. Returns the written files.
std::vector<std::filesystem::path> write_loss_report(const std::vector<IterationRecord>& records,
                                                     const std::filesystem::path& out_dir);

/// pr_curve.png and pr_curve.csv holding the plotted (recall, precision)
/// envelope steps. Returns the written files.
std::vector<std::filesystem::path> write_pr_report(const eval::MetricReport& report,
                                                   const std::filesystem::path& out_dir);

}  // namespace biogan
