#pragma once

// Published pooled conditional-logit estimates for three buyer models.
// Coefficient order follows kCovariateNames.

#include <array>
#include <string_view>

#include "agentmart/choice_model.hpp"

namespace agentmart {

struct ReferenceEstimates {
  std::string_view model;
  CovariateVector beta;
  CovariateVector std_error;
};

inline constexpr ReferenceEstimates kClaudeSonnet4{
    "claude-sonnet-4",
    {1.224, -0.297, 0.557, 0.416, -0.135, 1.060, -0.076, -1.623, 4.913, 0.415},
    {0.046, 0.065, 0.058, 0.059, 0.068, 0.077, 0.094, 0.079, 0.218, 0.023}};

inline constexpr ReferenceEstimates kGpt41{
    "gpt-4.1",
    {1.045, 1.122, 0.019, -0.013, -0.248, 0.802, -0.105, -1.612, 8.300, 0.739},
    {0.046, 0.061, 0.065, 0.066, 0.072, 0.083, 0.099, 0.083, 0.269, 0.026}};

inline constexpr ReferenceEstimates kGemini25Flash{
    "gemini-2.5-flash",
    {0.344, -0.264, -0.742, 0.162, -0.263, 1.897, -0.342, -2.190, 5.388, 0.501},
    {0.041, 0.057, 0.061, 0.054, 0.067, 0.072, 0.098, 0.080, 0.218, 0.023}};

inline constexpr std::array<const ReferenceEstimates*, 3> kReferenceModels = {
    &kClaudeSonnet4, &kGpt41, &kGemini25Flash};

}  // namespace agentmart
