// Acceptance runner: one PASS/FAIL line per criterion. With arguments, only
// the listed criteria (e.g. "1 4 9") run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "edaan/commands.hpp"
#include "edaan/config.hpp"
#include "../support/fixtures.hpp"
#include "../support/suites.hpp"

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Line {
  bool pass = false;
  std::string detail;
};

void report(int n, const Line& l) {
  std::printf("AC%d %s: %s\n", n, l.pass ? "PASS" : "FAIL", l.detail.c_str());
  std::fflush(stdout);
}

Line suite_line(const suites::Result& r, double secs, double limit) {
  std::ostringstream os;
  os << r.summary() << "; " << secs << " s";
  if (limit > 0) os << " (limit " << limit << " s)";
  return {r.ok() && (limit <= 0 || secs < limit), os.str()};
}

template <typename Fn>
Line timed_suite(Fn fn, double limit) {
  const auto t0 = Clock::now();
  try {
    const suites::Result r = fn();
    return suite_line(r, seconds_since(t0), limit);
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

// One desk-scale training + evaluation.
struct DeskRun {
  std::string name;
  bool ok = false;
  std::string error;
  double seconds = 0;
  bool all_finite = true;
  double first_mean = 0, last_mean = 0;
  double rank1 = 0, fg_mae = NAN, attn_iou = NAN;
  int test_identities = 0;
};

const int kSeeds[3] = {0, 1, 2};

class Desk {
 public:
  explicit Desk(std::string work) : work_(std::move(work)) {}

  edaan::RunConfig config(edaan::TrainMode mode, bool attention, int seed) const {
    edaan::RunConfig c = edaan::load_run_config((fs::path(EDAAN_SOURCE_DIR) / "configs" / "desk.json").string());
    c.data.root = (fs::path(work_) / "data").string();
    c.output.run_root = (fs::path(work_) / "runs").string();
    c.train.mode = mode;
    c.train.attention_enabled = attention;
    c.train.seed = static_cast<std::uint64_t>(seed);
    c.output.run_name = std::string(edaan::mode_name(mode)) + (attention ? "_attn" : "_noattn") + "_seed" +
                        std::to_string(seed);
    c.validate();
    return c;
  }

  const DeskRun& run(edaan::TrainMode mode, bool attention, int seed) {
    const edaan::RunConfig c = config(mode, attention, seed);
    auto it = runs_.find(c.output.run_name);
    if (it != runs_.end()) return it->second;
    DeskRun r;
    r.name = c.output.run_name;
    try {
      if (!generated_) edaan::cmd_gen_data(c), generated_ = true;
      const auto t0 = Clock::now();
      fs::remove_all(c.run_dir());
      const edaan::TrainResult tr = edaan::cmd_train(c);
      r.seconds = seconds_since(t0);
      // Loss trend over the stage that trains the full objective.
      const auto& losses = tr.stages.front().losses;
      for (const auto& s : tr.stages)
        for (const auto& l : s.losses)
          for (const auto& [name, v] : edaan::report_terms(l)) r.all_finite &= std::isfinite(v);
      const std::size_t k = std::max<std::size_t>(1, losses.size() / 10);
      for (std::size_t i = 0; i < k; ++i) r.first_mean += losses[i].total / k;
      for (std::size_t i = losses.size() - k; i < losses.size(); ++i) r.last_mean += losses[i].total / k;
      const edaan::EvaluationReport rep =
          edaan::cmd_evaluate(c, edaan::default_checkpoint(c), (fs::path(c.run_dir()) / "eval").string());
      r.rank1 = rep.value("cmc", 1);
      if (rep.has("fg_mae")) r.fg_mae = rep.value("fg_mae");
      if (rep.has("attn_iou")) r.attn_iou = rep.value("attn_iou");
      r.test_identities = static_cast<int>(edaan::prepare_data(c).target.test_identities.size());
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    std::printf("  desk %s: %s rank1=%.4f fg_mae=%.4f attn_iou=%.4f loss %.4f -> %.4f, %.0f s\n", r.name.c_str(),
                r.ok ? "ok" : ("error: " + r.error).c_str(), r.rank1, r.fg_mae, r.attn_iou, r.first_mean,
                r.last_mean, r.seconds);
    std::fflush(stdout);
    return runs_.emplace(r.name, r).first->second;
  }

 private:
  std::string work_;
  bool generated_ = false;
  std::map<std::string, DeskRun> runs_;
};

Line ac6(Desk& desk) {
  std::ostringstream os;
  bool pass = true;
  for (int seed : kSeeds) {
    const DeskRun& r = desk.run(edaan::TrainMode::kEdaanEndToEnd, true, seed);
    if (!r.ok) {
      os << "seed " << seed << " failed: " << r.error << "; ";
      pass = false;
      continue;
    }
    const double baseline = 1.0 / r.test_identities;
    const bool finite = r.all_finite, falls = r.last_mean < r.first_mean, beats = r.rank1 >= 3 * baseline,
               fast = r.seconds < 3600;
    pass &= finite && falls && beats && fast;
    os << "seed " << seed << ": finite=" << finite << " loss " << r.first_mean << "->" << r.last_mean
       << " rank1=" << r.rank1 << " (>= " << 3 * baseline << ") " << r.seconds << " s; ";
  }
  return {pass, os.str()};
}

Line ac7(Desk& desk) {
  using edaan::TrainMode;
  std::vector<double> edaan_r1, daan_r1, daan_noattn_r1, fg_attn, fg_noattn;
  bool ok = true;
  for (int seed : kSeeds) {
    const DeskRun& e = desk.run(TrainMode::kEdaanEndToEnd, true, seed);
    const DeskRun& d = desk.run(TrainMode::kDaanTwoStage, true, seed);
    const DeskRun& dn = desk.run(TrainMode::kDaanTwoStage, false, seed);
    const DeskRun& en = desk.run(TrainMode::kEdaanEndToEnd, false, seed);
    ok &= e.ok && d.ok && dn.ok && en.ok;
    edaan_r1.push_back(e.rank1);
    daan_r1.push_back(d.rank1);
    daan_noattn_r1.push_back(dn.rank1);
    fg_attn.push_back(e.fg_mae);
    fg_noattn.push_back(en.fg_mae);
  }
  const double me = median(edaan_r1), md = median(daan_r1), mdn = median(daan_noattn_r1);
  const double fa = median(fg_attn), fn = median(fg_noattn);
  std::ostringstream os;
  os << "median rank1 edaan=" << me << " daan=" << md << " daan_noattn=" << mdn << "; median fg_mae attn=" << fa
     << " noattn=" << fn;
  return {ok && fa < fn && me >= md && md >= mdn, os.str()};
}

Line ac8(Desk& desk) {
  std::vector<double> iou;
  bool ok = true;
  for (int seed : kSeeds) {
    const DeskRun& r = desk.run(edaan::TrainMode::kEdaanEndToEnd, true, seed);
    ok &= r.ok && !std::isnan(r.attn_iou);
    iou.push_back(r.attn_iou);
  }
  const double m = median(iou);
  std::ostringstream os;
  os << "median attention IoU " << m << " (need > 0.5); per seed";
  for (double v : iou) os << ' ' << v;
  return {ok && m > 0.5, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int n) { return only.empty() || only.count(n); };
  const std::string work = fixtures::scratch_dir("acceptance");
  Desk desk((fs::path(work) / "desk").string());
  int failed = 0;
  auto emit = [&](int n, const std::function<Line()>& fn) {
    if (!wanted(n)) return;
    Line l;
    try {
      l = fn();
    } catch (const std::exception& e) {
      l = {false, std::string("exception: ") + e.what()};
    }
    failed += !l.pass;
    report(n, l);
  };
  emit(1, [] { return timed_suite([] { return suites::loss_closed_forms(); }, 10); });
  emit(2, [] { return timed_suite([] { return suites::gradients(50); }, 120); });
  emit(3, [] { return timed_suite([] { return suites::composition_identities(); }, 0); });
  emit(4, [] { return timed_suite([] { return suites::retrieval_oracle(200); }, 30); });
  emit(5, [&] { return timed_suite([&] { return suites::schedule_and_phases((fs::path(work) / "ac5").string()); }, 0); });
  emit(9, [&] { return timed_suite([&] { return suites::determinism((fs::path(work) / "ac9").string()); }, 0); });
  emit(6, [&] { return ac6(desk); });
  emit(8, [&] { return ac8(desk); });
  emit(7, [&] { return ac7(desk); });
  return failed ? 1 : 0;
}
