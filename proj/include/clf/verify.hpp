#pragma once

#include <string>
#include <vector>

#include "clf/chainrec.hpp"
#include "clf/construct.hpp"

namespace clf {

// orbital derivative of tau at p by central differences along the true flow,
// (tau(Phi_d(p)) - tau(Phi_-d(p))) / 2d, sharpened by one Richardson step
// (d and d/2), so the truncation error is O(d^4) for smooth tau
double fd_orbital_derivative(const LyapunovEvaluator& tau, const VectorField& X,
                             const Vec& p, double delta = 1e-3,
                             const FlowMapConfig& cfg = {});

struct CheckResult {
  std::string name;
  int samples = 0;
  double worst = 0.0;  // worst measured violation; <= tol passes
  double tol = 0.0;
  bool pass = true;
  std::string note;
};

struct VerifyTolerances {
  double prescription = 1e-4;       // x max |g| over the target set
  double prescription_colloc = 5e-2;  // absolute bound when the base is fitted
  double locality = 1e-7;      // |stack - C*base| away from the tubes
  double negativity = 1e-3;    // strict decrease bound off the recurrent cells
  double step_identity = 1e-9;
  double slope = 1e-6;         // |d/dt + 1| on the prescribed zone
  double roundtrip = 1e-7;
  double fd_agree = 1e-6;      // finite differences vs the analytic derivative,
                               // absolute on the prescribed set
  double fd_agree_rel = 1e-3;  // relative bound elsewhere: off the prescribed
                               // set the chart amplifies |od| by C/|ghat-speed|
                               // and no evaluator can hold an absolute 1e-6
  double fd_delta = 1e-3;      // base step for the difference quotients
  double fd_agree_delta = 8e-5;  // smaller step for the agreement checks (keeps
                                 // the O(d^4) truncation below fd_agree)
  double smooth_order = 1.9;   // min acceptable convergence order at the seams
  double seam_growth = 1.0;    // |D2(d/2)| - 1.5 |D2(d)| allowance
  double seam_delta = 8e-3;    // base step for the seam-order quotients
  int samples = 1000;          // quasi-random samples per region
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  bool pass = true;
  std::string base_provenance;

  std::string text() const;     // human-readable block
  std::string machine() const;  // "check_name worst_violation tolerance pass" lines
};

struct VerifyInputs {
  const PrescribedResult* result = nullptr;
  Region K;       // the set carrying the prescription
  ScalarField g;  // prescribed derivative on K
  CellGrid grid;  // cell partition used for the recurrence keep-out
  RecurrentSet rec;
  bool have_rec = false;
};

// run every check on the constructed function; failures become report
// entries, never exceptions
VerificationReport verify_report(const VerifyInputs& in,
                                 const VerifyTolerances& tol = {},
                                 unsigned seed = 0);

}  // namespace clf
