#pragma once

#include <iosfwd>
#include <string>

#include "trustnet/model.hpp"

namespace trustnet {

/// Binary model layout, all integers and floats little-endian:
///
///   "TRUSTNET1"                       9 bytes
///   n, d, n_h                         u32 each
///   embeddings[n x d]                 f32, row-major
///   W_star[n_h x d], W_plus[n_h x d]  f32, row-major
///   b1[n_h], U[2 x n_h], b2[2]        f32
///   (raw_id, dense_id) x n            u64 pairs, raw ids two's complement
///
/// n_h == 0 marks the dot-product baseline, whose classifier arrays are empty except b2.
inline constexpr char kModelMagic[] = "TRUSTNET1";

std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(const std::string& bytes);

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace trustnet
