#pragma once

#include <string>
#include <vector>

#include "riskbench/roc.hpp"
#include "riskbench/shap.hpp"

namespace riskbench {

// Every renderer is a pure string builder: same inputs, same bytes. No
// timestamps, coordinates fixed at 4 decimals. `comment` lands in an XML
// comment right after the opening tag; the pipeline puts the tool version
// and config hash there.

struct RocSeries {
  std::string name;
  RocCurve curve;
};

// One panel, each series a colored curve over the chance diagonal, legend
// lists "name: AUC=...".
std::string roc_svg(const std::vector<RocSeries>& series, const std::string& title = {},
                    const std::string& comment = {});

// Beeswarm per marker, rows in the given order (summary_data already sorts
// by importance). Point color encodes the normalized raw value, green low
// to red high.
std::string summary_svg(const std::vector<SummaryFeature>& features,
                        const std::string& title = {}, const std::string& comment = {});

// Raw marker value against its contribution, colored by the partner marker.
std::string dependence_svg(const DependenceData& data, const std::string& title = {},
                           const std::string& comment = {});

// Additive chain from base to output: positive contributions push right in
// red, negative push left in blue. The caption keeps the
// "base value=3.75 and output value=4.13" wording at 2 decimals.
std::string force_svg(const Explanation& explanation, const std::string& title = {},
                      const std::string& comment = {});

}  // namespace riskbench
