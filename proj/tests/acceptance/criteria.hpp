#pragma once

#include <string>

namespace van::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome ctc_oracle_equivalence();
Outcome gradient_suites();
Outcome shape_contracts();
Outcome attention_invariants();
Outcome synthetic_overfit();
Outcome stopping_agreement();
Outcome reading_order();
Outcome pretraining_speed();
Outcome metrics_cases();
Outcome dropout_statistics();
Outcome persistence();

}  // namespace van::acceptance
