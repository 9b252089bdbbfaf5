#pragma once

#include "findtrack/core.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace findtrack {

// Region similarity: |pred & gt| / |pred | gt|, 1 when both are empty.
double region_j(const BinaryMask& pred, const BinaryMask& gt);

// Foreground pixels with a background 4-neighbour or on the image border.
MaskArray boundary(const BinaryMask& mask);

// max(1, round(0.008 * diagonal))
int boundary_tolerance(int width, int height);

// Boundary F-measure: a boundary pixel counts as matched when some boundary pixel of
// the other mask lies within Euclidean distance r (see boundary_tolerance).
double contour_f(const BinaryMask& pred, const BinaryMask& gt);

struct SequenceScore {
    double j = 0.0;
    double f = 0.0;
    double jf = 0.0;
};

SequenceScore evaluate_sequence(const MaskSequence& pred, const MaskSequence& gt);

struct EvalReport {
    struct Entry {
        std::string name;
        SequenceScore score;
    };
    std::vector<Entry> sequences;
    SequenceScore mean;

    void add(std::string name, SequenceScore score);
};

// {"sequences":[{"name","J","F","JF"}...],"mean":{"J","F","JF"}}
nlohmann::ordered_json report_json(const EvalReport& report);

}  // namespace findtrack
