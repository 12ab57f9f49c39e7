#pragma once

#include <string>

#include "gpdtsm/ibis.hpp"
#include "gpdtsm/theta.hpp"

// Binary snapshot of a particle system so a sequential run can stop after
// any observation and resume bit-for-bit, including every generator state.
// Little-endian lane layout, guarded by a magic tag, a format version and a
// caller-supplied data fingerprint.
namespace gpdtsm::io {

inline constexpr char kCheckpointMagic[8] = {'M', 'G', 'P', 'D',
                                             'T', 'S', 'M', '1'};

void save_checkpoint(const std::string& path,
                     const inference::ParticleSystem& ps,
                     const inference::Model& m,
                     const std::string& data_fingerprint);

// Restores ps; throws ValidationError when the file does not match the
// model (id, dimension, kernel scales) or the fingerprint.
inference::ParticleSystem load_checkpoint(const std::string& path,
                                          const inference::Model& m,
                                          const std::string& data_fingerprint);

}  // namespace gpdtsm::io
