#pragma once

#include "gpdtsm/likelihood.hpp"
#include "gpdtsm/types.hpp"

// Forward-mode automatic differentiation of the log posterior.  The value is
// computed by a scalar-templated mirror of the production likelihood that
// only uses coefficient-level arithmetic (hand-rolled Cholesky and LU), so
// the same code instantiates for double and for the AD scalar.
namespace gpdtsm::gradient {

// Log posterior through the mirror; equals inference::log_posterior up to
// floating-point roundoff at valid parameter points (consistency-tested).
double mirror_log_posterior(const inference::Model& m,
                            const inference::DataWindow& d, const Vec& x);

// d log posterior / dx in the transformed coordinates.
Vec log_posterior_gradient(const inference::Model& m,
                           const inference::DataWindow& d, const Vec& x);

}  // namespace gpdtsm::gradient
