#pragma once

#include <string>
#include <vector>

#include "glaves/data.hpp"

namespace glaves {

// Expects a header row `y,a,x1,..,xp` in exactly that order; `a` entries must
// be exactly 0 or 1. Unknown columns are rejected unless allow_extra is set,
// in which case they are ignored.
ExperimentalSample ingest_experimental_csv(const std::string& path,
                                           bool allow_extra = false);

// Expects a header row `x1,..,xp` with an optional trailing `weight` column
// of strictly positive values.
TargetSample ingest_target_csv(const std::string& path, bool allow_extra = false);

// Full round-trip decimal formatting ("%.17g"); non-finite values print "NA".
std::string format_number(double value);

// One output table cell: either a finite number or NA.
struct Cell {
    bool is_number = false;
    double number = 0.0;
    std::string text;

    static Cell num(double v);
    static Cell na();
    static Cell str(std::string s);
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

std::string to_csv(const Table& table);
std::string to_json(const Table& table);
// Human-oriented rendering, numbers rounded to 3 decimals.
std::string to_display(const Table& table);

}  // namespace glaves
