#pragma once

#include <cstdint>
#include <vector>

#include "mts/manifold.hpp"

namespace mts {

// Constrained ReLU network class used as the discriminator family:
//   f(x) = clamp(W_L a_{L-1} + b_L),  a_l = relu(W_l a_{l-1} + b_l),  a_0 = x
// with  |f| <= output_bound (hard clamp stage),
//       all entries of W_l, b_l bounded by weight_bound in absolute value,
//       total nonzero entries across all W_l, b_l at most `sparsity`,
//       hidden widths equal to `width`, `depth` affine layers in total.
struct CriticArchitecture {
    int input_dim = 1;
    int depth = 1;            // number of affine layers
    int width = 1;            // hidden width (unused when depth == 1)
    double output_bound = 1.0;
    double weight_bound = 1.0;
    long long sparsity = 1;   // must be >= depth
};

void validate_arch(const CriticArchitecture& arch);

// Row count / column count of layer l in [0, depth).
int layer_rows(const CriticArchitecture& arch, int l);
int layer_cols(const CriticArchitecture& arch, int l);

struct CriticParams {
    // w[l] is row-major layer_rows x layer_cols; b[l] has layer_rows entries.
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;
    // Keep-masks recording the sparsity pattern selected by the last
    // projection (1 = kept). Masked-out entries hold the value 0.
    std::vector<std::vector<std::uint8_t>> w_keep;
    std::vector<std::vector<std::uint8_t>> b_keep;
};

CriticParams zero_params(const CriticArchitecture& arch);
void check_conformance(const CriticArchitecture& arch, const CriticParams& params);

// Class-feasibility check: conformance + weight bounds + sparsity count.
// Throws DomainError when infeasible.
void check_feasible(const CriticArchitecture& arch, const CriticParams& params);

double critic_forward(const CriticArchitecture& arch, const CriticParams& params, const Vec& x);

// Training objective mean_x f - mean_y f and its analytic gradient in all
// stored entries (the gradient is taken in the dense parameterization; the
// projection re-imposes the sparsity pattern). Subgradient conventions:
// relu'(0) = 0, clamp' = 1 on the closed interval [-R, R] and 0 outside.
double critic_objective(const CriticArchitecture& arch, const CriticParams& params,
                        const std::vector<Vec>& x, const std::vector<Vec>& y);
void critic_objective_gradient(const CriticArchitecture& arch, const CriticParams& params,
                               const std::vector<Vec>& x, const std::vector<Vec>& y,
                               CriticParams& grad);

// Euclidean-style projection onto the class constraints: entrywise clip to
// [-weight_bound, weight_bound] followed by global magnitude top-K selection
// (remaining entries zeroed). Ties broken toward the earlier layer, weights
// before biases, then row-major position; deterministic and idempotent.
void project_to_class(const CriticArchitecture& arch, CriticParams& params);

// Theory-driven sizing for sample size n, ambient dimension D, intrinsic
// dimension d and smoothness s + beta, with unit leading constants:
//   output_bound = 1
//   weight_bound = max{1, coord_bound, sqrt(d), reach^2}
//   depth  = ceil( (s+beta)/(2(s+beta)+d) * ln(n D) )
//   width  = ceil( n^{d/(2(s+beta)+d)} ) + D
//   sparsity = ceil( (s+beta)/(2(s+beta)+d) * (n^{d/(2(s+beta)+d)} + D) ln n
//              + D ln D )
// Values within 1e-9 of an integer snap to it before the ceiling so exact
// integer powers are not bumped up by float noise.
CriticArchitecture hyperparams_from_theory(std::size_t n, int ambient_dim, int intrinsic_dim,
                                           double s, double beta, double coord_bound = 1.0,
                                           double reach = 1.0);

struct TrainConfig {
    int steps = 100;
    double step_size = 0.5;
    int projection_period = 10; // must divide steps
    std::uint64_t seed = 0;
    double init_scale = 0.0;    // 0 = auto: weight_bound / sqrt(width)
    double decay = 1.0;         // optional geometric step-size decay
    int restarts = 1;           // independent inits; the best run is kept
};

void validate_train_config(const TrainConfig& cfg);

struct TrainResult {
    CriticParams params;     // feasible parameters of the best iterate seen
    double statistic = 0.0;  // objective achieved by those parameters
};

// Projected gradient ascent on the training objective, reporting the best
// feasible iterate across all steps and restarts (the objective is not
// monotone along a projected trajectory). Deterministic for a fixed seed:
// restart r draws its initialization from a stream seeded by derive_seed
// (seed, r), iteration order is fixed, and the projection runs every
// projection_period steps.
TrainResult train_critic(const CriticArchitecture& arch, const std::vector<Vec>& x,
                         const std::vector<Vec>& y, const TrainConfig& cfg);

// Negates the final affine layer, mapping f to -f inside the same class.
CriticParams negate_params(const CriticParams& params);

} // namespace mts
