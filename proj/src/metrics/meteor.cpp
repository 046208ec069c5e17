#include "mtkit/metrics/meteor.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "mtkit/metrics/porter.hpp"

namespace mtkit::metrics {
namespace {

constexpr long kUnmatched = -1;

std::size_t count_chunks(const std::vector<long>& alignment) {
  std::size_t chunks = 0;
  for (std::size_t i = 0; i < alignment.size(); ++i) {
    if (alignment[i] == kUnmatched) continue;
    const bool continues = i > 0 && alignment[i - 1] != kUnmatched &&
                           alignment[i - 1] + 1 == alignment[i];
    if (!continues) ++chunks;
  }
  return chunks;
}

// Adds as many matches as possible between still-unmatched tokens with equal
// keys, choosing among maximal matchings the one with the fewest chunks over
// the whole alignment (earlier stages included). Keys equal to -1 never
// match. Branch and bound over candidate positions in order.
class StageSearch {
 public:
  StageSearch(const std::vector<int>& cand_keys, const std::vector<int>& ref_keys,
              std::vector<long>& alignment, std::vector<bool>& ref_used,
              std::size_t budget)
      : cand_keys_(cand_keys),
        ref_keys_(ref_keys),
        alignment_(alignment),
        ref_used_(ref_used),
        budget_(budget) {}

  // Returns false when the budget ran out before the search finished.
  bool run() {
    std::unordered_map<int, std::size_t> cand_count, ref_count;
    for (std::size_t i = 0; i < cand_keys_.size(); ++i)
      if (alignment_[i] == kUnmatched && cand_keys_[i] >= 0)
        ++cand_count[cand_keys_[i]];
    for (std::size_t j = 0; j < ref_keys_.size(); ++j)
      if (!ref_used_[j] && ref_keys_[j] >= 0) {
        ++ref_count[ref_keys_[j]];
        refs_by_key_[ref_keys_[j]].push_back(j);
      }
    for (const auto& [key, c] : cand_count) {
      const auto it = ref_count.find(key);
      if (it == ref_count.end()) continue;
      quota_[key] = std::min(c, it->second);
    }
    if (quota_.empty()) return true;

    // remaining_[i] = unmatched candidates with the same key at positions > i
    remaining_after_.assign(cand_keys_.size(), 0);
    std::unordered_map<int, std::size_t> seen;
    for (std::size_t i = cand_keys_.size(); i-- > 0;) {
      if (alignment_[i] != kUnmatched || cand_keys_[i] < 0) continue;
      remaining_after_[i] = seen[cand_keys_[i]]++;
    }
    fixed_.assign(cand_keys_.size(), false);
    for (std::size_t i = 0; i < alignment_.size(); ++i)
      fixed_[i] = alignment_[i] != kUnmatched;

    work_ = alignment_;
    best_chunks_ = std::numeric_limits<std::size_t>::max();
    visit(0, 0);
    alignment_ = best_;
    for (const long j : alignment_)
      if (j != kUnmatched) ref_used_[static_cast<std::size_t>(j)] = true;
    return !exhausted_;
  }

 private:
  void visit(std::size_t i, std::size_t chunks) {
    if (chunks >= best_chunks_) return;
    if (++nodes_ > budget_ && !best_.empty()) {
      exhausted_ = true;
      return;
    }
    if (i == cand_keys_.size()) {
      best_chunks_ = chunks;
      best_ = work_;
      return;
    }
    auto step_cost = [&](long j) -> std::size_t {
      const bool continues = i > 0 && work_[i - 1] != kUnmatched &&
                             work_[i - 1] + 1 == j;
      return continues ? 0 : 1;
    };

    if (fixed_[i]) {
      visit(i + 1, chunks + step_cost(work_[i]));
      return;
    }
    const int key = cand_keys_[i];
    const auto q = key >= 0 ? quota_.find(key) : quota_.end();
    if (q == quota_.end() || q->second == 0) {
      visit(i + 1, chunks);
      return;
    }

    // Try the reference slot that extends the current chunk first.
    const auto& refs = refs_by_key_[key];
    const long preferred = i > 0 && work_[i - 1] != kUnmatched
                               ? work_[i - 1] + 1
                               : std::numeric_limits<long>::min();
    auto try_ref = [&](std::size_t j) {
      ref_used_[j] = true;
      work_[i] = static_cast<long>(j);
      --q->second;
      visit(i + 1, chunks + step_cost(static_cast<long>(j)));
      ++q->second;
      work_[i] = kUnmatched;
      ref_used_[j] = false;
    };
    for (const std::size_t j : refs)
      if (static_cast<long>(j) == preferred && !ref_used_[j]) try_ref(j);
    for (const std::size_t j : refs) {
      if (exhausted_) return;
      if (static_cast<long>(j) == preferred || ref_used_[j]) continue;
      try_ref(j);
    }
    if (!exhausted_ && remaining_after_[i] >= q->second) visit(i + 1, chunks);
  }

  const std::vector<int>& cand_keys_;
  const std::vector<int>& ref_keys_;
  std::vector<long>& alignment_;
  std::vector<bool>& ref_used_;
  std::size_t budget_;

  std::unordered_map<int, std::size_t> quota_;
  std::unordered_map<int, std::vector<std::size_t>> refs_by_key_;
  std::vector<std::size_t> remaining_after_;
  std::vector<bool> fixed_;
  std::vector<long> work_;
  std::vector<long> best_;
  std::size_t best_chunks_ = 0;
  std::size_t nodes_ = 0;
  bool exhausted_ = false;
};

// Maps strings to dense ids; tokens of `skip` positions get -1.
struct KeyTable {
  std::unordered_map<std::string, int> ids;
  int id(const std::string& s) {
    return ids.try_emplace(s, static_cast<int>(ids.size())).first->second;
  }
};

}  // namespace

MeteorResult meteor(const TokenSequence& candidate,
                    const TokenSequence& reference,
                    const MeteorOptions& options) {
  MeteorResult result;
  auto& b = result.breakdown;
  const std::size_t n = candidate.size();
  const std::size_t m = reference.size();
  result.alignment.assign(n, kUnmatched);
  std::vector<bool> ref_used(m, false);

  KeyTable exact;
  std::vector<int> cand_keys(n), ref_keys(m);
  for (std::size_t i = 0; i < n; ++i) cand_keys[i] = exact.id(candidate.tokens[i]);
  for (std::size_t j = 0; j < m; ++j) ref_keys[j] = exact.id(reference.tokens[j]);
  bool exact_search = StageSearch(cand_keys, ref_keys, result.alignment,
                                  ref_used, options.search_budget)
                          .run();
  for (const long j : result.alignment)
    if (j != kUnmatched) ++b.exact_matches;

  if (options.stem) {
    KeyTable stems;
    for (std::size_t i = 0; i < n; ++i)
      cand_keys[i] = result.alignment[i] == kUnmatched
                         ? stems.id(porter_stem(fold_case(candidate.tokens[i])))
                         : -1;
    for (std::size_t j = 0; j < m; ++j)
      ref_keys[j] = ref_used[j]
                        ? -1
                        : stems.id(porter_stem(fold_case(reference.tokens[j])));
    exact_search = StageSearch(cand_keys, ref_keys, result.alignment, ref_used,
                               options.search_budget)
                       .run() &&
                   exact_search;
  }
  b.alignment_exact = exact_search;

  for (const long j : result.alignment)
    if (j != kUnmatched) ++b.matches;
  b.stem_matches = b.matches - b.exact_matches;
  b.chunks = count_chunks(result.alignment);
  if (b.matches == 0) return result;

  const double matches = static_cast<double>(b.matches);
  b.precision = matches / static_cast<double>(n);
  b.recall = matches / static_cast<double>(m);
  b.f_mean = 10.0 * b.precision * b.recall / (b.recall + 9.0 * b.precision);
  const double ratio = static_cast<double>(b.chunks) / matches;
  b.fragmentation_penalty = 0.5 * ratio * ratio * ratio;
  result.score = b.f_mean * (1.0 - b.fragmentation_penalty);
  return result;
}

}  // namespace mtkit::metrics
