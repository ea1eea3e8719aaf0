#pragma once

#include "van/model.hpp"

namespace van::testing {

/// Small enough for finite-difference checks; minimum input 64x32.
inline ModelConfig tiny_model_config() {
  ModelConfig c;
  c.preset = "tiny";
  c.encoder.cb_channels = {2, 4, 4, 6, 6, 6};
  c.encoder.dscb_channels = 6;
  c.encoder.n_dscb = 1;
  c.encoder.c_f = 6;
  c.encoder.dropout.p_std = 0.0;
  c.encoder.dropout.p_spatial = 0.0;
  c.attention.c_f = 6;
  c.attention.c_h = 6;
  c.attention.c_u = 4;
  c.attention.c_j = 3;
  c.attention.context_kernel = 3;
  c.attention.stop_kernel = 3;
  c.attention.collapse_pool_target = 4;
  c.attention.stop_pool_target = 2;
  return c;
}

}  // namespace van::testing
