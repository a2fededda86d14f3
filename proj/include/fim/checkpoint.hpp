#pragma once

#include <string>
#include <vector>

#include "fim/model.hpp"

namespace fim {

// Textual checkpoint: a header pinning the variant and shapes, then one
// `tensor <name> <rows> <cols>` block per parameter with %.17g values (one
// row per line), terminated by `end`. Stable across runs; %.17g round-trips
// doubles exactly.
void save_checkpoint(const std::string& path, const ModelSpec& spec,
                     const std::vector<std::size_t>& vocab_sizes,
                     const ModelParams& params);

// Loads a checkpoint, validating it against the expected spec and vocab
// sizes; any disagreement raises SchemaError.
ModelParams load_checkpoint(const std::string& path, const ModelSpec& spec,
                            const std::vector<std::size_t>& vocab_sizes);

}  // namespace fim
