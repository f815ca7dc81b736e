#pragma once

#include "redspace/core.hpp"
#include "redspace/domain.hpp"

namespace redspace {

/// Latin hypercube: one sample per stratum [k/n, (k+1)/n) in every column,
/// scaled into the domain.
Matrix latin_hypercube(Index n, const DesignDomain& domain, uint64_t seed);

/// Smallest multiple of 4 strictly greater than d.
Index plackett_burman_runs(Index d);

/// Two-level Plackett-Burman screening design at the domain's lower/upper
/// levels. Generator rows are hard-coded for run counts {8, 12, 16, 20, 24};
/// surplus design columns are dropped when d_s < n_pb - 1.
Matrix plackett_burman(const DesignDomain& domain);

}  // namespace redspace
