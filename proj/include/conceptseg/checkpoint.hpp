#ifndef CONCEPTSEG_CHECKPOINT_HPP
#define CONCEPTSEG_CHECKPOINT_HPP

#include <string>

#include "conceptseg/params.hpp"

namespace conceptseg {

// Binary named-tensor container, version-headed, little-endian 64-bit
// values. The header reserves a backbone layer index for future use; it is
// always -1 here.
void save_checkpoint(const ParamStore& store, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

// Verifies the checkpoint shapes against a freshly initialized store; throws
// ConfigError naming the first offending tensor.
void check_compatible(const ParamStore& loaded, const ParamStore& expected);

}  // namespace conceptseg

#endif
