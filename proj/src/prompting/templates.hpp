#pragma once

#include <vector>

#include "clinqa/prompting.hpp"

namespace clinqa::prompting::detail {

const std::vector<PromptTemplate>& builtin_templates();

}  // namespace clinqa::prompting::detail
