#pragma once

#include <string>
#include <vector>

#include "roughflow/experiment.hpp"

namespace roughflow {

// report.json content: name, spec_hash, seed, tol_scale, summary, spec and per-operation checks,
// values and table file names. Contains no timestamps or host data.
Json report_json(const ExperimentResult& result);

// Writes report.json and, per table, <id>_<table>.csv, <id>_<table>.plot.dat and <id>_<table>.json
// (column list, row count and spec hash). Returns the written file names in write order.
std::vector<std::string> emit_report(const ExperimentResult& result, const std::string& directory);

// CSV text of one table: a header row, then one row per record. Strings are quoted when needed.
std::string table_csv(const Table& table);

// Whitespace-separated numeric columns with a "# col ..." header; non-numeric cells become NaN.
std::string table_plot_dat(const Table& table);

}  // namespace roughflow
