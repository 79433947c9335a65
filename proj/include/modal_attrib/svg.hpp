#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "modal_attrib/attribution.hpp"
#include "modal_attrib/interactions.hpp"

namespace modal_attrib::svg {

// Static vector charts rendered from the exported plot data. Output is a
// deterministic function of the input records.

// Point estimate with interval whiskers per feature, zero reference line.
std::string forest(const std::vector<FeatureBeta>& betas, std::string_view title);

// One row per feature; points at phi, colored low (blue) to high (red) by
// feature value, stacked vertically where they collide.
std::string beeswarm(const std::vector<BeeswarmRecord>& records, std::string_view title);

// Interaction scatter of phi_xy against x, colored by quadrant, with the
// thresholds and per-quadrant slopes annotated.
std::string quadrant(const std::vector<ScatterPoint>& points, const QuadrantReport& report);

}  // namespace modal_attrib::svg
