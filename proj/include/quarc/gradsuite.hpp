#pragma once

#include <cstdint>

#include "quarc/gradcheck.hpp"
#include "quarc/model.hpp"

namespace quarc {

// Finite-difference checks of every layer kind, the split activations,
// pooling, dropout, attention, batch norm, the fusion blocks and the head,
// each in isolation at small sizes. Block names are "<case>/<parameter>".
GradCheckReport layer_grad_checks(Algebra algebra, std::uint64_t seed);

// Full model loss (cross-entropy summed over a few synthetic samples, train
// mode with fixed dropout keys) checked for every parameter block. Blocks
// larger than `max_scalars` are checked on a seeded subset of that size;
// 0 checks everything.
GradCheckReport model_grad_check(const ModelConfig& cfg, std::uint64_t seed, std::size_t max_scalars = 0);

}  // namespace quarc
