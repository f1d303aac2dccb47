#pragma once

// End-to-end checks of the shipped behaviour: gradient and Shapley
// correctness against brute-force references, mixture fitting, and the
// orderings expected from the evaluation reports.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alioth/evalkit.hpp"

namespace alioth::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  bool evaluated = true;  // false: printed as SKIP
};

std::string format_line(const CriterionResult& r);

// Largest relative error |a - b| / max(|a| + |b|, 1e-6) between backprop
// and central differences (eps = 1e-5) over MLP, DAE and DADAE parameters.
struct GradientCheck {
  double max_rel_error = 0.0;
  int configurations = 0;
};
GradientCheck gradient_check(std::uint64_t seed, int configurations = 5);
CriterionResult check_gradients(std::uint64_t seed);

// Exponential-time Shapley values. Interventional: the value of a subset
// averages the model over the background with the subset taken from x.
std::vector<double> brute_force_interventional(const gbt::TreeEnsemble& model,
                                               const std::vector<double>& x,
                                               const Eigen::MatrixXd& background);
// Path-dependent: the value of a subset is the cover-weighted expectation
// of each tree given the subset's values.
std::vector<double> brute_force_path_dependent(const gbt::TreeEnsemble& model,
                                               const std::vector<double>& x);
CriterionResult check_shapley(std::uint64_t seed);

CriterionResult check_denoising(const evalkit::EvalReport& offline);
CriterionResult check_pipeline_ordering(const evalkit::EvalReport& offline);
CriterionResult check_generalization(const evalkit::EvalReport& loao);
CriterionResult check_sweep(const evalkit::EvalReport& offline);
CriterionResult check_attribution(const evalkit::EvalReport& offline);
CriterionResult check_gmm(std::uint64_t seed);
// Byte equality of every CSV under two run directories.
CriterionResult check_determinism(const std::filesystem::path& a, const std::filesystem::path& b);
// Mean wall time of one prediction from a raw metric window.
double inference_ms(const pipeline::AliothModel& model, const simcloud::Dataset& data,
                    int repeats = 200);
CriterionResult check_runtime(double repro_seconds, double inference_ms);

}  // namespace alioth::acceptance
