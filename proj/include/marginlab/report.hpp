#pragma once

#include <string>
#include <vector>

#include "marginlab/harness.hpp"

namespace marginlab {

// Fixed-order CSV of sweep rows:
// cell_index,repeat,d,n,k,gamma,m,alpha,eta,seed,converged,T,train_loss,
// w_star_norm,margin_ratio,A_min,A_lin,Z_frobenius,z_lin_norm,test_error,
// test_stderr,outcome,wall_time_s
std::string table_to_csv(const std::vector<ExperimentResult>& rows);
std::vector<ExperimentResult> table_from_csv(const std::string& text);

// Heatmap of mean test error over exactly two swept axes, with contour
// curves at 1/8 and at epsilon.  A swept gamma axis is drawn log-scaled.
std::string heatmap_svg(const std::vector<ExperimentResult>& rows, double epsilon);

// Outcome counts, error statistics and convergence tallies.
std::string summary_text(const std::vector<ExperimentResult>& rows);

}  // namespace marginlab
