#ifndef EDAAN_TESTS_SUITES_HPP_
#define EDAAN_TESTS_SUITES_HPP_

// Check suites shared by the unit tests and the acceptance runner. Each
// suite records every failed expectation with a readable description.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace suites {

struct Result {
  int checks = 0;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty() && checks > 0; }
  void expect(bool pass, const std::string& what) {
    ++checks;
    if (!pass) failures.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream os;
    os.precision(12);
    os << what << ": got " << got << ", want " << want << " (tol " << tol << ")";
    expect(std::fabs(got - want) <= tol, os.str());
  }
  std::string summary() const {
    std::ostringstream os;
    os << checks << " checks, " << failures.size() << " failed";
    for (std::size_t i = 0; i < failures.size() && i < 5; ++i) os << "; " << failures[i];
    return os.str();
  }
};

// Closed-form examples of every loss plus the mAP / IoU / foreground
// closed forms and scalar-loop oracles.
Result loss_closed_forms();
// Analytic loss and composition gradients vs. central differences on random
// 8-element double instances.
Result gradients(int trials = 50);
// Mask-1 identity, mask-0 raw translation, decomposition and betweenness.
Result composition_identities();
// CMC / mAP vs. brute-force scoring on random small galleries.
Result retrieval_oracle(int galleries = 200);
// lr values, phase thresholds, attention freeze across checkpoints and the
// discriminator input switch, on a tiny training run under `work_dir`.
Result schedule_and_phases(const std::string& work_dir);
// Dataset regeneration, checkpoint round trip, repeated evaluation and
// translation export are byte-identical.
Result determinism(const std::string& work_dir);

}  // namespace suites

#endif  // EDAAN_TESTS_SUITES_HPP_
