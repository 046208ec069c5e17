#include "mtkit/metrics/ter.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "mtkit/common/errors.hpp"

namespace mtkit::metrics {
namespace {

using Words = std::vector<std::int32_t>;

enum class Op : char { kMatch, kSub, kIns, kDel };

struct Alignment {
  std::size_t cost = 0;
  std::vector<Op> ops;  // forward order
};

std::size_t distance_only(const Words& hyp, const Words& ref) {
  std::vector<std::size_t> prev(ref.size() + 1), cur(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const std::size_t diag = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({diag, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[ref.size()];
}

// Full table with backtrace. Ties prefer the diagonal, then a hypothesis
// insertion, then a deletion.
Alignment align(const Words& hyp, const Words& ref) {
  const std::size_t n = hyp.size();
  const std::size_t m = ref.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& {
    return d[i * (m + 1) + j];
  };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (hyp[i - 1] == ref[j - 1] ? 0 : 1),
                           at(i - 1, j) + 1, at(i, j - 1) + 1});

  Alignment a;
  a.cost = at(n, m);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = hyp[i - 1] == ref[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        a.ops.push_back(same ? Op::kMatch : Op::kSub);
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      a.ops.push_back(Op::kIns);
      --i;
    } else {
      a.ops.push_back(Op::kDel);
      --j;
    }
  }
  std::reverse(a.ops.begin(), a.ops.end());
  return a;
}

struct ErrorMarks {
  std::vector<bool> hyp_err;
  std::vector<bool> ref_err;
  // Hypothesis position each reference word is aligned to; for a missing
  // reference word, the last hypothesis position consumed (may be -1).
  std::vector<long> ref_align;
};

ErrorMarks mark_errors(const Alignment& a, std::size_t n, std::size_t m) {
  ErrorMarks e;
  e.hyp_err.assign(n, false);
  e.ref_err.assign(m, false);
  e.ref_align.assign(m, -1);
  long h = -1;
  long r = -1;
  for (const Op op : a.ops) {
    switch (op) {
      case Op::kMatch:
      case Op::kSub:
        ++h;
        ++r;
        e.hyp_err[static_cast<std::size_t>(h)] = op == Op::kSub;
        e.ref_err[static_cast<std::size_t>(r)] = op == Op::kSub;
        e.ref_align[static_cast<std::size_t>(r)] = h;
        break;
      case Op::kIns:
        ++h;
        e.hyp_err[static_cast<std::size_t>(h)] = true;
        break;
      case Op::kDel:
        ++r;
        e.ref_err[static_cast<std::size_t>(r)] = true;
        e.ref_align[static_cast<std::size_t>(r)] = h;
        break;
    }
  }
  return e;
}

struct Shift {
  std::size_t start;  // first word of the block
  std::size_t end;    // last word of the block (inclusive)
  long dest;          // block is placed after this word; -1 means front
};

Words apply_shift(const Words& hyp, const Shift& s) {
  const auto b = hyp.begin();
  Words out;
  out.reserve(hyp.size());
  const auto block_begin = b + static_cast<long>(s.start);
  const auto block_end = b + static_cast<long>(s.end) + 1;
  if (s.dest < static_cast<long>(s.start)) {
    const auto split = b + (s.dest + 1);
    out.insert(out.end(), b, split);
    out.insert(out.end(), block_begin, block_end);
    out.insert(out.end(), split, block_begin);
    out.insert(out.end(), block_end, hyp.end());
  } else {
    const auto split = b + (s.dest + 1);
    out.insert(out.end(), b, block_begin);
    out.insert(out.end(), block_end, split);
    out.insert(out.end(), block_begin, block_end);
    out.insert(out.end(), split, hyp.end());
  }
  return out;
}

bool equal_span(const Words& a, std::size_t ai, const Words& b, std::size_t bi,
                std::size_t len) {
  if (ai + len > a.size() || bi + len > b.size()) return false;
  return std::equal(a.begin() + static_cast<long>(ai),
                    a.begin() + static_cast<long>(ai + len),
                    b.begin() + static_cast<long>(bi));
}

// Candidate shifts grouped by block length, longest group first; inside a
// group they are ordered by block start.
std::vector<Shift> candidate_shifts(const Words& hyp, const Words& ref,
                                    const ErrorMarks& e,
                                    const TerOptions& opt) {
  const std::size_t n = hyp.size();
  const std::size_t m = ref.size();
  const auto max_dist = static_cast<long>(opt.max_shift_distance);
  std::vector<std::vector<Shift>> by_len(opt.max_shift_size + 1);

  for (std::size_t start = 0; start < n; ++start) {
    for (std::size_t len = 1; len <= opt.max_shift_size && start + len <= n;
         ++len) {
      const std::size_t end = start + len - 1;
      bool found_in_ref = false;
      const bool any_hyp_err =
          std::any_of(e.hyp_err.begin() + static_cast<long>(start),
                      e.hyp_err.begin() + static_cast<long>(end) + 1,
                      [](bool x) { return x; });
      for (std::size_t moveto = 0; moveto + len <= m; ++moveto) {
        if (!equal_span(hyp, start, ref, moveto, len)) continue;
        found_in_ref = true;
        if (!any_hyp_err) continue;
        const long target = e.ref_align[moveto];
        const auto s = static_cast<long>(start);
        const auto en = static_cast<long>(end);
        if (target == s || (target >= s && target <= en)) continue;
        if (target - s > max_dist || s - target > max_dist) continue;
        const bool any_ref_err =
            std::any_of(e.ref_err.begin() + static_cast<long>(moveto),
                        e.ref_err.begin() + static_cast<long>(moveto + len),
                        [](bool x) { return x; });
        if (!any_ref_err) continue;
        for (long roff = -1; roff < static_cast<long>(len); ++roff) {
          long dest;
          if (roff == -1 && moveto == 0) {
            dest = -1;
          } else {
            const long rpos = static_cast<long>(moveto) + roff;
            if (rpos < 0 || rpos >= static_cast<long>(m)) continue;
            dest = e.ref_align[static_cast<std::size_t>(rpos)];
            if (dest == s) continue;
            if (roff != 0 && dest == target) continue;
          }
          // placing the block right where it already is, or inside itself
          if (dest >= s - 1 && dest <= en) continue;
          by_len[len].push_back({start, end, dest});
        }
      }
      if (!found_in_ref) break;
    }
  }

  std::vector<Shift> out;
  for (std::size_t len = opt.max_shift_size; len >= 1; --len) {
    auto& group = by_len[len];
    std::stable_sort(group.begin(), group.end(),
                     [](const Shift& a, const Shift& b) { return a.start < b.start; });
    out.insert(out.end(), group.begin(), group.end());
  }
  return out;
}

}  // namespace

std::size_t word_edit_distance(std::span<const std::string> a,
                               std::span<const std::string> b) {
  std::unordered_map<std::string_view, std::int32_t> ids;
  auto encode = [&](std::span<const std::string> words) {
    Words out;
    out.reserve(words.size());
    for (const auto& w : words)
      out.push_back(ids.try_emplace(w, static_cast<std::int32_t>(ids.size()))
                        .first->second);
    return out;
  };
  const Words wa = encode(a);
  const Words wb = encode(b);
  return distance_only(wa, wb);
}

TerResult ter(const TokenSequence& candidate, const TokenSequence& reference,
              const TerOptions& options) {
  if (reference.empty()) throw InvalidInput("ter: reference must not be empty");

  std::unordered_map<std::string_view, std::int32_t> ids;
  auto encode = [&](const TokenSequence& seq) {
    Words out;
    out.reserve(seq.size());
    for (const auto& w : seq.tokens)
      out.push_back(ids.try_emplace(w, static_cast<std::int32_t>(ids.size()))
                        .first->second);
    return out;
  };
  Words hyp = encode(candidate);
  const Words ref = encode(reference);

  TerResult result;
  auto& b = result.breakdown;
  b.reference_length = ref.size();

  Alignment current = align(hyp, ref);
  for (std::size_t iter = 0; iter < options.max_iterations && current.cost > 0;
       ++iter) {
    const ErrorMarks marks = mark_errors(current, hyp.size(), ref.size());
    std::size_t best_gain = 0;
    Words best_hyp;
    for (const Shift& s : candidate_shifts(hyp, ref, marks, options)) {
      Words shifted = apply_shift(hyp, s);
      const std::size_t dist = distance_only(shifted, ref);
      if (dist + 1 >= current.cost) continue;
      const std::size_t gain = current.cost - (dist + 1);
      if (gain > best_gain) {
        best_gain = gain;
        best_hyp = std::move(shifted);
      }
    }
    if (best_gain == 0) break;
    hyp = std::move(best_hyp);
    current = align(hyp, ref);
    ++b.shifts;
  }

  for (const Op op : current.ops) {
    if (op == Op::kSub) ++b.substitutions;
    if (op == Op::kIns) ++b.insertions;
    if (op == Op::kDel) ++b.deletions;
  }
  result.score = 100.0 * static_cast<double>(b.edits()) /
                 static_cast<double>(b.reference_length);
  return result;
}

}  // namespace mtkit::metrics
