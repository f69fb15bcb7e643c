#pragma once

#include <functional>
#include <ostream>

#include "ddfm/em.hpp"

namespace ddfm {

// Operations exercised by the oracle suite. Defaults are the library
// implementations; tests substitute broken variants to prove the suite
// notices.
struct SelftestOps {
  std::function<em::Expectations(const ImageTensor&, const ImageTensor&, double, double,
                                 const em::EmParams&)>
      e_step = em::e_step;
  std::function<ImageTensor(const ImageTensor&, const GradientField&)> update_k = em::update_k;
  std::function<GradientField(const ImageTensor&, const em::EmParams&)> update_u = em::update_u;
  std::function<ImageTensor(const ImageTensor&, const ImageTensor&, const ImageTensor&,
                            const ImageTensor&, const em::EmParams&)>
      update_x = em::update_x;
};

struct SelftestOptions {
  bool quick = false;
};

// Prints one PASS/FAIL line per oracle; true iff all pass.
bool run_selftest(const SelftestOptions& options, const SelftestOps& ops, std::ostream& out);

}  // namespace ddfm
