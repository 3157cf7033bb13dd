#include "cslr/wer.hpp"

#include <algorithm>

namespace cslr {

WerResult wer(const GlossSequence& ref, const GlossSequence& hyp) {
  const std::size_t n = ref.ids.size(), m = hyp.ids.size();
  if (n == 0) throw DataError("wer: empty reference");

  // cost[i][j] = min edits to turn hyp[0..j) into ref[0..i)
  std::vector<std::vector<std::size_t>> cost(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) cost[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) cost[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = cost[i - 1][j - 1] + (ref.ids[i - 1] == hyp.ids[j - 1] ? 0 : 1);
      const std::size_t del = cost[i - 1][j] + 1;  // ref gloss missing from hyp
      const std::size_t ins = cost[i][j - 1] + 1;  // extra gloss in hyp
      cost[i][j] = std::min({sub, del, ins});
    }

  // Backtrace; on ties prefer the diagonal (match/substitution), then
  // deletion, then insertion.
  EditOps ops;
  ops.reference_len = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool match = ref.ids[i - 1] == hyp.ids[j - 1];
      if (cost[i][j] == cost[i - 1][j - 1] + (match ? 0 : 1)) {
        if (!match) ++ops.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && cost[i][j] == cost[i - 1][j] + 1) {
      ++ops.deletions;
      --i;
      continue;
    }
    ++ops.insertions;
    --j;
  }

  WerResult res;
  res.ops = ops;
  res.rate = static_cast<double>(ops.total()) / static_cast<double>(n);
  return res;
}

double pooled_wer(const EditOps& totals) {
  if (totals.reference_len == 0) throw DataError("pooled_wer: empty reference corpus");
  return static_cast<double>(totals.total()) / static_cast<double>(totals.reference_len);
}

}  // namespace cslr
