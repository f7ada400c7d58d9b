#ifndef SMATTACK_ATTACK_HPP
#define SMATTACK_ATTACK_HPP

#include <atomic>
#include <chrono>
#include <map>
#include <thread>
#include <vector>

#include "smattack/candidates.hpp"
#include "smattack/features.hpp"
#include "smattack/model_io.hpp"
#include "smattack/train.hpp"

namespace smattack {

namespace attack_detail {

/// Runs fn(i) for i in [0, count) across `threads` workers. Results must be
/// written to pre-sized slots so the outcome is independent of scheduling.
template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(threads, count); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace attack_detail

/// Nearest-virtual-pin baseline: per sink group, the candidate with the
/// smallest unsigned Manhattan distance wins; ties go to the lowest source
/// fragment id.
inline std::map<int, int> baseline_proximity(const std::vector<CandidateGroup>& groups) {
  std::map<int, int> selected;
  for (const CandidateGroup& g : groups) {
    if (g.candidates.empty()) continue;
    const CandidateVpp* best = &g.candidates[0];
    for (const CandidateVpp& c : g.candidates) {
      const std::int64_t dc = c.pref_dbu + c.nonpref_dbu;
      const std::int64_t db = best->pref_dbu + best->nonpref_dbu;
      if (dc < db || (dc == db && c.source_fragment < best->source_fragment)) best = &c;
    }
    selected[g.sink_fragment] = best->source_fragment;
  }
  return selected;
}

/// Feature extraction for all groups, optionally threaded. Group order is
/// preserved (one slot per input group).
inline std::vector<GroupFeatures> extract_all_features(
    const std::vector<CandidateGroup>& groups, const FragmentSet& frags,
    const SplitLayout& layout, const CellLibrary& lib, const RasterConfig& raster_cfg,
    int threads = 1) {
  std::vector<GroupFeatures> out(groups.size());
  attack_detail::parallel_for(static_cast<int>(groups.size()), threads, [&](int i) {
    out[i] = assemble_features(groups[i], frags, layout, lib, raster_cfg);
  });
  return out;
}

struct AttackReport {
  std::map<int, int> selected;        // sink fragment -> predicted source fragment
  std::map<int, double> scores;       // sink fragment -> winning score
  int num_sinks = 0;
  int num_sources = 0;
  int unpredictable_sinks = 0;        // empty candidate groups
  double ccr = -1.0;                  // -1 when no ground truth is available
  double baseline_ccr = -1.0;
  double extraction_s = 0.0;
  double inference_s = 0.0;
};

/// Runs a trained model over a split layout: candidate selection, feature
/// extraction, normalization with the model's stored statistics, and scoring.
inline AttackReport run_attack(const LoadedModel& model, const SplitLayout& layout,
                               const FragmentSet& frags, const CellLibrary& lib,
                               const GroundTruth* truth = nullptr, int threads = 1) {
  const auto t0 = std::chrono::steady_clock::now();
  RasterConfig raster;
  raster.image_px = model.bundle.config.image_px;
  raster.scales_um = model.bundle.scales_um;

  std::vector<CandidateGroup> groups =
      select_all_candidates(frags, layout, model.bundle.candidates_n);
  std::vector<GroupFeatures> features =
      extract_all_features(groups, frags, layout, lib, raster, threads);
  for (GroupFeatures& g : features)
    if (!g.candidates.empty()) apply_normalization(g, model.bundle.stats);
  const auto t1 = std::chrono::steady_clock::now();

  AttackReport rep;
  for (const Fragment& f : frags.fragments)
    (f.kind == FragmentKind::sink ? rep.num_sinks : rep.num_sources) += 1;

  struct Pick {
    int sink = -1, source = -1;
    double score = 0.0;
  };
  std::vector<Pick> picks(features.size());
  attack_detail::parallel_for(static_cast<int>(features.size()), threads, [&](int i) {
    if (auto p = predict_source_scored(model.net, features[i]))
      picks[i] = {features[i].sink_fragment, p->first, static_cast<double>(p->second)};
  });
  for (const Pick& p : picks) {
    if (p.sink < 0) {
      ++rep.unpredictable_sinks;
    } else {
      rep.selected[p.sink] = p.source;
      rep.scores[p.sink] = p.score;
    }
  }
  if (truth) {
    rep.ccr = compute_ccr(rep.selected, *truth);
    rep.baseline_ccr = compute_ccr(baseline_proximity(groups), *truth);
  }
  const auto t2 = std::chrono::steady_clock::now();
  rep.extraction_s = std::chrono::duration<double>(t1 - t0).count();
  rep.inference_s = std::chrono::duration<double>(t2 - t1).count();
  return rep;
}

}  // namespace smattack

#endif
