#pragma once

// Independent long-double evaluation of the sequence log-likelihood, used as
// the finite-difference oracle in gradient checks. Parameters come from a
// model and may be overridden coordinate by coordinate.

#include <map>
#include <string>
#include <vector>

#include "opinsum/attnseq2seq.hpp"

namespace opinsum {

struct ExtendedTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<long double> values;

  long double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

using ExtendedParameters = std::map<std::string, ExtendedTensor>;

ExtendedParameters extend_parameters(const Parameters& params);

long double extended_log_prob(const Seq2SeqModel& model, const ExtendedParameters& params,
                              const ConcatenatedInput& z, const std::vector<WordId>& target);

}  // namespace opinsum
