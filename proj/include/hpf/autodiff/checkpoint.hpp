#pragma once

#include <filesystem>
#include <span>

#include "hpf/autodiff/tensor.hpp"

namespace hpf::ad {

// A checkpoint is a directory holding one raw little-endian float32 file per
// parameter and a `manifest.txt` of `key = value` lines:
//
//   format = hpf-checkpoint
//   version = 1
//   count = <N>
//   param.<i>.name = <parameter name>
//   param.<i>.shape = <d0>x<d1>x...
//   param.<i>.file = <file name relative to the directory>
//
// Blank lines and lines starting with '#' are ignored.

void save_checkpoint(const std::filesystem::path& dir, std::span<const Parameter* const> params);

/// Loads values into `params`, matched by name. Every parameter must be
/// present in the manifest with an identical shape.
void load_checkpoint(const std::filesystem::path& dir, std::span<Parameter* const> params);

}  // namespace hpf::ad
