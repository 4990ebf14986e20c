#pragma once

namespace metabandit::metarl {

/// Timestamp scaled to [-1, 1]: 2t/(T-1) - 1, and -1 when T == 1.
/// Throws ContractError unless 0 <= t < T.
double normalized_time(int t, int lifetime);

}  // namespace metabandit::metarl
