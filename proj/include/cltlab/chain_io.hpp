#pragma once

#include <string>

#include "cltlab/types.hpp"

namespace cltlab {

// Plain-text chain format:
//   - comments start with '#', blank lines are ignored
//   - first token: n (number of states)
//   - then n rows of n transition probabilities
//   - optional block "labels:" followed by n reals (state values)
//   - optional block "V:" followed by n reals >= 1 (weight function)
FiniteChain parse_chain_text(const std::string& text);
FiniteChain read_chain_file(const std::string& path);
std::string format_chain_text(const FiniteChain& chain);

}  // namespace cltlab
