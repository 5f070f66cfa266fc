// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "addle/grad_check.hpp"
#include "addle/ordinal_loss.hpp"
#include "addle/pipeline.hpp"
#include "oracles.hpp"

using namespace addle;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("addle_accept_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Small but complete experiment used where the full-size default is not needed.
ExperimentConfig small_config(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.simulator.num_samples = 800;
  cfg.simulator.num_features = 8;
  cfg.simulator.num_raters = 5;
  cfg.simulator.population.oracle_rater = 1;
  cfg.backbone.hidden = {16};
  cfg.backbone.latent_dim = 4;
  cfg.train.max_epochs = 30;
  cfg.train.finetune_iterations = 20;
  return cfg;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::uint64_t s = 0; s < 25; ++s) {
    const BackboneConfig cfg = oracle::random_backbone(1000 + s);
    const ModelParams p = oracle::random_params(cfg, s);
    const Tensor x = oracle::random_tensor({3, cfg.input_dim}, 7000 + s);
    const Tensor z = oracle::random_tensor({3, cfg.latent_dim}, 8000 + s, -1.5, 1.5);
    std::vector<int> labels;
    for (std::size_t i = 0; i < 3; ++i) labels.push_back(static_cast<int>((s + 2 * i) % cfg.num_classes));

    std::vector<Tensor> flat;
    for (const auto& l : p.layers) {
      flat.push_back(l.weight);
      flat.push_back(l.bias);
    }
    for (const auto& a : p.mixing) flat.push_back(a);
    flat.push_back(x);
    flat.push_back(z);
    const auto fn = [&](Tape& t, std::span<const Var> v) {
      ParamVars pv;
      std::size_t i = 0;
      for (std::size_t l = 0; l < p.layers.size(); ++l) {
        pv.weights.push_back(v[i++]);
        pv.biases.push_back(v[i++]);
      }
      for (std::size_t a = 0; a < p.mixing.size(); ++a) pv.mixing.push_back(v[i++]);
      const Var xv = v[i++];
      const Var zv = v[i++];
      return fh_loss_sum(t, forward_graph(t, cfg, pv, xv, zv), labels);
    };
    worst = std::max(worst, grad_check(fn, flat, 1e-6).max_relative_error);
    ++cases;
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && cases >= 20 && secs < 30.0,
          std::to_string(cases) + " cases, max rel err " + fmt(worst, 3) + ", " + fmt(secs, 3) + " s"};
}

Outcome criterion2() {
  bool exact = true;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const BackboneConfig cfg = oracle::random_backbone(2000 + s);
    const ModelParams p = oracle::random_params(cfg, s);
    const Tensor x = oracle::random_tensor({4, cfg.input_dim}, s);
    const Tensor zero({4, cfg.latent_dim}, 0.0);
    exact = exact && forward_batch(p, cfg, x, &zero) == forward_batch(without_injections(p), without_injections(cfg), x, nullptr);
  }

  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const std::size_t B = 1 + s % 3, Cin = 1 + s % 3, L = 5 + s % 5, C = 1 + s % 4, K = 1 + s % 3, M = 1 + s % 4;
    const Tensor a = oracle::random_tensor({B, Cin, L}, 3000 + s);
    const Tensor k = oracle::random_tensor({C, Cin, K}, 4000 + s);
    const Tensor bias = oracle::random_tensor({C}, 5000 + s);
    const Tensor A = oracle::random_tensor({C, M}, 6000 + s);
    const Tensor z = oracle::random_tensor({B, M}, 7000 + s);
    // extra input channels hold the replicated code; their kernels spread A over the taps
    Tensor cat({B, Cin + M, L});
    for (std::size_t n = 0; n < B; ++n)
      for (std::size_t q = 0; q < L; ++q) {
        for (std::size_t c = 0; c < Cin; ++c) cat.at(n, c, q) = a.at(n, c, q);
        for (std::size_t m = 0; m < M; ++m) cat.at(n, Cin + m, q) = z.at(n, m);
      }
    Tensor big({C, Cin + M, K}, 0.0);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t q = 0; q < K; ++q) {
        for (std::size_t ci = 0; ci < Cin; ++ci) big.at(c, ci, q) = k.at(c, ci, q);
        for (std::size_t m = 0; m < M; ++m) big.at(c, Cin + m, q) = A.at(c, m) / static_cast<double>(K);
      }
    Tape tape;
    const Tensor injected = tape.value(
        inject_spatial(tape, tape.constant(a), tape.constant(k), tape.constant(bias), tape.constant(A), tape.constant(z)));
    const Tensor reference = tape.value(tape.conv1d(tape.constant(cat), tape.constant(big), tape.constant(bias)));
    if (injected.shape() != reference.shape()) return {false, "shape mismatch in case " + std::to_string(s)};
    for (std::size_t i = 0; i < injected.numel(); ++i) worst = std::max(worst, std::abs(injected[i] - reference[i]));
  }
  return {exact && worst < 1e-9, std::string("zero code ") + (exact ? "bit-exact" : "differs") +
                                     " on 50 nets, concat max err " + fmt(worst, 3) + " on 100 cases"};
}

Outcome criterion3() {
  double worst = 0.0, worst_two_group = 0.0;
  bool roc_ok = true;
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::mt19937_64 rng(9000 + s);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 200)(rng);
    std::vector<double> scores = oracle::random_values(n, s, 0.0, 4.0);
    std::vector<int> labels(n);
    for (auto& y : labels) y = std::uniform_int_distribution<int>(0, 3)(rng);
    labels[0] = 0;
    labels[n - 1] = 3;
    if (s % 5 == 0) std::fill(scores.begin(), scores.end(), 1.0);  // all ties
    if (s % 5 == 1)
      for (std::size_t i = 0; i < n; ++i) scores[i] = labels[i] + 0.1 * scores[i] / 4.0;  // perfectly separated
    if (s % 5 == 2)
      for (auto& v : scores) v = std::round(v);  // heavy ties
    std::vector<int> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = labels[i] >= 2;

    worst = std::max(worst, std::abs(jt_index(scores, labels) - oracle::jt(scores, labels)));
    worst = std::max(worst, std::abs(auc(scores, pos) - oracle::auc(scores, pos)));
    for (double f : {0.1, 0.3, 1.0})
      worst = std::max(worst, std::abs(partial_auc(scores, pos, f) - oracle::partial_auc(scores, pos, f)));
    const auto got = roc_points(scores, pos);
    const auto want = oracle::roc(scores, pos);
    if (got.size() != want.size()) {
      roc_ok = false;
    } else {
      for (std::size_t i = 0; i < got.size(); ++i)
        worst = std::max({worst, std::abs(got[i].fpr - want[i].fpr), std::abs(got[i].tpr - want[i].tpr)});
    }
    worst_two_group = std::max(worst_two_group, std::abs(jt_index(scores, pos) - auc(scores, pos)));
  }
  return {roc_ok && worst < 1e-9 && worst_two_group < 1e-12,
          "50 datasets, max oracle gap " + fmt(worst, 3) + ", two-group JT-AUC gap " + fmt(worst_two_group, 3) +
              (roc_ok ? "" : ", ROC point count mismatch")};
}

Outcome criterion4() {
  std::size_t good_seeds = 0;
  std::string worst;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.simulator.assignment = Assignment::power_law;
    const Splits splits = make_splits(cfg);
    const RaterModel trained = train_mode(cfg, splits, TrainMode::addle).model;
    const FinetuneResult ft = finetune_raters(trained, splits.train, experiment_train_config(cfg, TrainMode::addle));
    bool ok = ft.model.params == trained.params && ft.raters.size() == 8;
    for (const auto& r : ft.raters) {
      if (!(r.after <= r.before)) {
        ok = false;
        worst = "seed " + std::to_string(seed) + " rater " + r.rater_id + " rose " + fmt(r.before) + " -> " + fmt(r.after);
      }
    }
    good_seeds += ok;
  }
  return {good_seeds == 5, std::to_string(good_seeds) + "/5 seeds descend with theta unchanged" +
                               (worst.empty() ? "" : ", " + worst)};
}

Outcome criterion5() {
  const auto t0 = Clock::now();
  double gap_sum = 0.0;
  std::size_t greedy_wins = 0, oracle_hits = 0;
  std::string per_seed;
  ExperimentConfig cfg;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg = ExperimentConfig{};
    cfg.seed = seed;
    const Splits splits = make_splits(cfg);
    const RaterModel base = train_mode(cfg, splits, TrainMode::baseline).model;
    const RaterModel joint = train_mode(cfg, splits, TrainMode::addle).model;
    const RaterModel tuned =
        finetune_raters(joint, splits.train, experiment_train_config(cfg, TrainMode::addle)).model;
    const VirtualRaterSet set =
        greedy_select(tuned, splits.val_gold, cfg.eval.selection_metric, cfg.eval.fpr_max, cfg.eval.study_level);
    const ModeEvaluation b = evaluate_mode(cfg, base, nullptr, splits.test);
    const ModeEvaluation a = evaluate_mode(cfg, tuned, &set, splits.test);
    const double base_jt = b.variants[0].report.jt, mean_jt = a.variants[0].report.jt, greedy_jt = a.variants[1].report.jt;
    gap_sum += mean_jt - base_jt;
    greedy_wins += greedy_jt >= mean_jt;
    const std::string oracle_id = tuned.rater_ids.at(cfg.simulator.population.oracle_rater);
    const bool hit = std::find(a.variants[1].raters.begin(), a.variants[1].raters.end(), oracle_id) != a.variants[1].raters.end();
    oracle_hits += hit;
    per_seed += " [s" + std::to_string(seed) + " base " + fmt(base_jt) + " mean " + fmt(mean_jt) + " greedy " +
                fmt(greedy_jt) + (hit ? " oracle-in" : " oracle-out") + "]";
  }
  const double gap = gap_sum / 5.0;

  const BackboneConfig bb = experiment_backbone(cfg);
  const std::size_t R = cfg.simulator.num_raters;
  const auto counts = analytic_parameter_counts(bb, R);
  std::size_t mixing = 0;
  for (const auto& pt : bb.injections) mixing += bb.layer_width(pt.layer_index) * bb.latent_dim;
  const bool counts_ok = counts.at("jlsl") == 8 * counts.at("baseline") &&
                         counts.at("addle") == counts.at("baseline") + R * bb.latent_dim + mixing;
  const double secs = seconds_since(t0);

  const bool a_ok = gap >= 0.02, b_ok = greedy_wins >= 4, c_ok = oracle_hits >= 4;
  const std::string detail = std::string("(a) mean gap ") + fmt(gap) + (a_ok ? " ok" : " <0.02") + "; (b) greedy>=mean " +
                             std::to_string(greedy_wins) + "/5; (c) oracle selected " + std::to_string(oracle_hits) +
                             "/5; (d) counts " + (counts_ok ? "ok" : "wrong") + "; " + fmt(secs, 3) + " s;" + per_seed;
  return {a_ok && b_ok && c_ok && counts_ok && secs < 600.0, detail};
}

Outcome criterion6() {
  const ExperimentConfig cfg = small_config(3);
  const Splits splits = make_splits(cfg);
  const RaterModel model = train_mode(cfg, splits, TrainMode::addle).model;
  const Tensor x = splits.test.feature_matrix();
  const auto gold = splits.test.gold_labels();
  const LatentCodebook& cb = *model.codebook;

  double endpoint_gap = 0.0;
  for (std::size_t r0 = 0; r0 < cb.num_raters(); ++r0)
    for (std::size_t r1 = 0; r1 < cb.num_raters(); ++r1) {
      if (r0 == r1) continue;
      const auto z0 = cb.code(r0), z1 = cb.code(r1);
      const auto curve = performance_curve(model, {interpolate(z0, z1, 0.0), interpolate(z0, z1, 1.0)}, x, gold);
      endpoint_gap = std::max({endpoint_gap, std::abs(curve[0] - jt_index(rater_scores(model, x, r0), gold)),
                               std::abs(curve[1] - jt_index(rater_scores(model, x, r1), gold))});
    }

  double ratio_sum_gap = 0.0, ortho_gap = 0.0, oracle_gap = 0.0;
  std::vector<Tensor> codebooks = {cb.codes()};
  for (std::uint64_t s = 0; s < 20; ++s) codebooks.push_back(oracle::random_tensor({3 + s % 9, 2 + s % 6}, 400 + s));
  for (const auto& z : codebooks) {
    const PcaBasis basis = pca(z);
    const auto [vals, vecs] = oracle::jacobi_eigen(oracle::covariance(z));
    double total = 0.0, sum = 0.0;
    for (double v : vals) total += v;
    for (std::size_t c = 0; c < basis.explained_ratio.size(); ++c) {
      sum += basis.explained_ratio[c];
      oracle_gap = std::max(oracle_gap, std::abs(basis.explained_ratio[c] - vals[c] / total));
      for (std::size_t d = 0; d < basis.components.size(); ++d) {
        double dot = 0.0;
        for (std::size_t k = 0; k < basis.components[c].size(); ++k) dot += basis.components[c][k] * basis.components[d][k];
        ortho_gap = std::max(ortho_gap, std::abs(dot - (c == d ? 1.0 : 0.0)));
      }
    }
    ratio_sum_gap = std::max(ratio_sum_gap, std::abs(sum - 1.0));
  }
  return {endpoint_gap <= 1e-12 && ratio_sum_gap <= 1e-9 && ortho_gap <= 1e-9 && oracle_gap <= 1e-9,
          "endpoint gap " + fmt(endpoint_gap, 3) + ", ratio sum gap " + fmt(ratio_sum_gap, 3) + ", orthonormality gap " +
              fmt(ortho_gap, 3) + ", oracle ratio gap " + fmt(oracle_gap, 3) + " over " +
              std::to_string(codebooks.size()) + " codebooks"};
}

Outcome criterion7() {
  TempDir a("run_a"), b("run_b");
  const ExperimentConfig cfg;
  Pipeline(cfg, a.path).run();
  Pipeline(cfg, b.path).run();
  std::size_t files = 0, reports = 0, checkpoints = 0, plots = 0;
  std::string mismatch;
  for (const auto& e : fs::recursive_directory_iterator(a.path)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a.path);
    ++files;
    const std::string top = rel.begin()->string();
    reports += top == "reports";
    checkpoints += top == "models";
    plots += top == "plots";
    if (!fs::exists(b.path / rel) || slurp(e.path()) != slurp(b.path / rel)) mismatch = rel.generic_string();
  }
  std::size_t files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b.path)) files_b += e.is_regular_file();
  const bool ok = mismatch.empty() && files == files_b && reports > 0 && checkpoints > 0 && plots > 0;
  return {ok, std::to_string(files) + " files compared (" + std::to_string(reports) + " reports, " +
                  std::to_string(checkpoints) + " checkpoints, " + std::to_string(plots) + " plot files)" +
                  (mismatch.empty() ? ", all identical" : ", differs: " + mismatch)};
}

Outcome criterion8() {
  const ExperimentConfig cfg = small_config(8);
  const Splits splits = make_splits(cfg);
  const Tensor x = splits.test.feature_matrix();
  TempDir tmp("ckpt");
  double worst = 0.0;
  bool bytes_ok = true;
  std::size_t files = 0;
  for (auto mode : cfg.modes) {
    const RaterModel model = train_mode(cfg, splits, mode).model;
    const Provenance prov{cfg.hash(), cfg.seed, 1};
    const auto paths = save_model(model, prov, tmp.path, mode_name(mode));
    const RaterModel loaded = load_model(tmp.path, mode_name(mode));
    const auto before = score_matrix(model, x), after = score_matrix(loaded, x);
    for (std::size_t r = 0; r < before.size(); ++r)
      for (std::size_t i = 0; i < before[r].size(); ++i) worst = std::max(worst, std::abs(before[r][i] - after[r][i]));
    for (const auto& p : paths) {
      const auto bytes = encode_checkpoint(load_checkpoint(p));
      bytes_ok = bytes_ok && std::string(bytes.begin(), bytes.end()) == slurp(p);
      ++files;
    }
  }
  return {worst <= 1e-12 && bytes_ok, std::to_string(files) + " checkpoint files over 4 modes, max score gap " +
                                          fmt(worst, 3) + (bytes_ok ? ", re-serialization identical" : ", bytes differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient check of the full forward and loss graph", criterion1},
      {"zero-code and concatenation equivalences", criterion2},
      {"metrics match brute-force oracles", criterion3},
      {"per-rater fine-tuning descends with shared weights frozen", criterion4},
      {"synthetic comparison of baseline, mean and greedy raters", criterion5},
      {"latent analysis endpoints and PCA", criterion6},
      {"pipeline reproducibility", criterion7},
      {"checkpoint round trip", criterion8},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " -- " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
