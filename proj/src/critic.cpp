#include "mts/critic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mts/errors.hpp"
#include "mts/rng.hpp"

namespace mts {

void validate_arch(const CriticArchitecture& arch) {
    if (arch.input_dim < 1) throw ShapeError("critic: input dimension must be >= 1");
    if (arch.depth < 1) throw ShapeError("critic: depth must be >= 1");
    if (arch.depth > 1 && arch.width < 1) throw ShapeError("critic: width must be >= 1");
    if (!(arch.output_bound > 0.0)) throw DomainError("critic: output bound must be positive");
    if (!(arch.weight_bound > 0.0)) throw DomainError("critic: weight bound must be positive");
    if (arch.sparsity < arch.depth) {
        throw DomainError("critic: sparsity budget below depth (every layer carries parameters)");
    }
}

int layer_rows(const CriticArchitecture& arch, int l) {
    return l == arch.depth - 1 ? 1 : arch.width;
}

int layer_cols(const CriticArchitecture& arch, int l) {
    return l == 0 ? arch.input_dim : arch.width;
}

CriticParams zero_params(const CriticArchitecture& arch) {
    validate_arch(arch);
    CriticParams p;
    p.w.resize(static_cast<std::size_t>(arch.depth));
    p.b.resize(static_cast<std::size_t>(arch.depth));
    p.w_keep.resize(static_cast<std::size_t>(arch.depth));
    p.b_keep.resize(static_cast<std::size_t>(arch.depth));
    for (int l = 0; l < arch.depth; ++l) {
        const auto nw = static_cast<std::size_t>(layer_rows(arch, l)) * layer_cols(arch, l);
        const auto nb = static_cast<std::size_t>(layer_rows(arch, l));
        p.w[static_cast<std::size_t>(l)].assign(nw, 0.0);
        p.b[static_cast<std::size_t>(l)].assign(nb, 0.0);
        p.w_keep[static_cast<std::size_t>(l)].assign(nw, 1);
        p.b_keep[static_cast<std::size_t>(l)].assign(nb, 1);
    }
    return p;
}

void check_conformance(const CriticArchitecture& arch, const CriticParams& params) {
    validate_arch(arch);
    const auto depth = static_cast<std::size_t>(arch.depth);
    if (params.w.size() != depth || params.b.size() != depth ||
        params.w_keep.size() != depth || params.b_keep.size() != depth) {
        throw ShapeError("critic: parameter layer count does not match the architecture");
    }
    for (int l = 0; l < arch.depth; ++l) {
        const auto nw = static_cast<std::size_t>(layer_rows(arch, l)) * layer_cols(arch, l);
        const auto nb = static_cast<std::size_t>(layer_rows(arch, l));
        const auto ul = static_cast<std::size_t>(l);
        if (params.w[ul].size() != nw || params.b[ul].size() != nb ||
            params.w_keep[ul].size() != nw || params.b_keep[ul].size() != nb) {
            throw ShapeError("critic: layer " + std::to_string(l) + " has wrong shape");
        }
    }
}

void check_feasible(const CriticArchitecture& arch, const CriticParams& params) {
    check_conformance(arch, params);
    long long nonzeros = 0;
    for (std::size_t l = 0; l < params.w.size(); ++l) {
        for (std::size_t i = 0; i < params.w[l].size(); ++i) {
            const double v = params.w[l][i];
            if (std::abs(v) > arch.weight_bound + 1e-12) {
                throw DomainError("critic: weight magnitude above the bound");
            }
            if (!params.w_keep[l][i] && v != 0.0) {
                throw DomainError("critic: masked-out weight entry is nonzero");
            }
            if (v != 0.0) ++nonzeros;
        }
        for (std::size_t i = 0; i < params.b[l].size(); ++i) {
            const double v = params.b[l][i];
            if (std::abs(v) > arch.weight_bound + 1e-12) {
                throw DomainError("critic: bias magnitude above the bound");
            }
            if (!params.b_keep[l][i] && v != 0.0) {
                throw DomainError("critic: masked-out bias entry is nonzero");
            }
            if (v != 0.0) ++nonzeros;
        }
    }
    if (nonzeros > arch.sparsity) throw DomainError("critic: sparsity budget exceeded");
}

double critic_forward(const CriticArchitecture& arch, const CriticParams& params, const Vec& x) {
    check_conformance(arch, params);
    if (static_cast<int>(x.size()) != arch.input_dim) {
        throw ShapeError("critic: input point has wrong dimension");
    }
    Vec a(x), next;
    for (int l = 0; l < arch.depth; ++l) {
        const int rows = layer_rows(arch, l), cols = layer_cols(arch, l);
        const auto ul = static_cast<std::size_t>(l);
        next.assign(static_cast<std::size_t>(rows), 0.0);
        for (int r = 0; r < rows; ++r) {
            double acc = params.b[ul][static_cast<std::size_t>(r)];
            const double* wrow = &params.w[ul][static_cast<std::size_t>(r) * cols];
            for (int c = 0; c < cols; ++c) acc += wrow[c] * a[static_cast<std::size_t>(c)];
            next[static_cast<std::size_t>(r)] = (l + 1 < arch.depth) ? std::max(acc, 0.0) : acc;
        }
        a.swap(next);
    }
    return std::clamp(a[0], -arch.output_bound, arch.output_bound);
}

namespace {

// Shared batch forward/backward workspace. Points are stored feature-major
// (activation[r * batch + p]) so the inner loops run over contiguous memory.
struct BatchWork {
    std::size_t batch = 0;
    std::vector<std::vector<double>> act;  // act[0] = inputs, act[l+1] = post-relu of layer l
    std::vector<std::vector<double>> pre;  // pre-activations per layer
    std::vector<double> delta, delta_next;
};

void batch_forward(const CriticArchitecture& arch, const CriticParams& params,
                   const std::vector<Vec>& x, const std::vector<Vec>& y, BatchWork& w) {
    const std::size_t nx = x.size(), ny = y.size(), batch = nx + ny;
    w.batch = batch;
    w.act.resize(static_cast<std::size_t>(arch.depth) + 1);
    w.pre.resize(static_cast<std::size_t>(arch.depth));
    auto& input = w.act[0];
    input.assign(static_cast<std::size_t>(arch.input_dim) * batch, 0.0);
    for (std::size_t p = 0; p < nx; ++p) {
        for (int c = 0; c < arch.input_dim; ++c) {
            input[static_cast<std::size_t>(c) * batch + p] = x[p][static_cast<std::size_t>(c)];
        }
    }
    for (std::size_t p = 0; p < ny; ++p) {
        for (int c = 0; c < arch.input_dim; ++c) {
            input[static_cast<std::size_t>(c) * batch + nx + p] = y[p][static_cast<std::size_t>(c)];
        }
    }
    for (int l = 0; l < arch.depth; ++l) {
        const int rows = layer_rows(arch, l), cols = layer_cols(arch, l);
        const auto ul = static_cast<std::size_t>(l);
        auto& pre = w.pre[ul];
        auto& out = w.act[ul + 1];
        pre.assign(static_cast<std::size_t>(rows) * batch, 0.0);
        out.assign(static_cast<std::size_t>(rows) * batch, 0.0);
        const auto& in = w.act[ul];
        for (int r = 0; r < rows; ++r) {
            double* prow = &pre[static_cast<std::size_t>(r) * batch];
            const double bias = params.b[ul][static_cast<std::size_t>(r)];
            for (std::size_t p = 0; p < batch; ++p) prow[p] = bias;
            const double* wrow = &params.w[ul][static_cast<std::size_t>(r) * cols];
            for (int c = 0; c < cols; ++c) {
                const double wv = wrow[c];
                if (wv == 0.0) continue;
                const double* irow = &in[static_cast<std::size_t>(c) * batch];
                for (std::size_t p = 0; p < batch; ++p) prow[p] += wv * irow[p];
            }
            double* orow = &out[static_cast<std::size_t>(r) * batch];
            if (l + 1 < arch.depth) {
                for (std::size_t p = 0; p < batch; ++p) orow[p] = prow[p] > 0.0 ? prow[p] : 0.0;
            } else {
                for (std::size_t p = 0; p < batch; ++p) orow[p] = prow[p];
            }
        }
    }
}

double batch_objective(const CriticArchitecture& arch, const BatchWork& w, std::size_t nx) {
    const auto& out = w.pre.back();
    const double r = arch.output_bound;
    double sx = 0.0, sy = 0.0;
    for (std::size_t p = 0; p < nx; ++p) sx += std::clamp(out[p], -r, r);
    for (std::size_t p = nx; p < w.batch; ++p) sy += std::clamp(out[p], -r, r);
    return sx / static_cast<double>(nx) - sy / static_cast<double>(w.batch - nx);
}

void batch_backward(const CriticArchitecture& arch, const CriticParams& params, BatchWork& w,
                    std::size_t nx, CriticParams& grad) {
    const std::size_t batch = w.batch, ny = batch - nx;
    // dJ/d f(p): +1/nx on the first block, -1/ny on the second; the clamp
    // stage passes gradient through on the closed interval [-R, R].
    w.delta.assign(batch, 0.0);
    const auto& out = w.pre.back();
    const double r = arch.output_bound;
    for (std::size_t p = 0; p < batch; ++p) {
        if (std::abs(out[p]) <= r) {
            w.delta[p] = p < nx ? 1.0 / static_cast<double>(nx) : -1.0 / static_cast<double>(ny);
        }
    }
    for (int l = arch.depth - 1; l >= 0; --l) {
        const int rows = layer_rows(arch, l), cols = layer_cols(arch, l);
        const auto ul = static_cast<std::size_t>(l);
        const auto& in = w.act[ul];
        for (int r2 = 0; r2 < rows; ++r2) {
            const double* drow = &w.delta[static_cast<std::size_t>(r2) * batch];
            double* gw = &grad.w[ul][static_cast<std::size_t>(r2) * cols];
            double acc_b = 0.0;
            for (std::size_t p = 0; p < batch; ++p) acc_b += drow[p];
            grad.b[ul][static_cast<std::size_t>(r2)] = acc_b;
            for (int c = 0; c < cols; ++c) {
                const double* irow = &in[static_cast<std::size_t>(c) * batch];
                double acc = 0.0;
                for (std::size_t p = 0; p < batch; ++p) acc += drow[p] * irow[p];
                gw[c] = acc;
            }
        }
        if (l == 0) break;
        // delta_prev[c] = relu'(pre_{l-1}[c]) * sum_r w[r][c] * delta[r]
        w.delta_next.assign(static_cast<std::size_t>(cols) * batch, 0.0);
        for (int r2 = 0; r2 < rows; ++r2) {
            const double* drow = &w.delta[static_cast<std::size_t>(r2) * batch];
            const double* wrow = &params.w[ul][static_cast<std::size_t>(r2) * cols];
            for (int c = 0; c < cols; ++c) {
                const double wv = wrow[c];
                if (wv == 0.0) continue;
                double* trow = &w.delta_next[static_cast<std::size_t>(c) * batch];
                for (std::size_t p = 0; p < batch; ++p) trow[p] += wv * drow[p];
            }
        }
        const auto& pre_prev = w.pre[ul - 1];
        for (std::size_t i = 0; i < w.delta_next.size(); ++i) {
            if (!(pre_prev[i] > 0.0)) w.delta_next[i] = 0.0;
        }
        w.delta.swap(w.delta_next);
    }
}

void validate_points(const CriticArchitecture& arch, const std::vector<Vec>& pts,
                     const char* side) {
    if (pts.empty()) throw DomainError(std::string("critic: empty sample on side ") + side);
    for (const auto& p : pts) {
        if (static_cast<int>(p.size()) != arch.input_dim) {
            throw ShapeError(std::string("critic: point dimension mismatch on side ") + side);
        }
    }
}

} // namespace

double critic_objective(const CriticArchitecture& arch, const CriticParams& params,
                        const std::vector<Vec>& x, const std::vector<Vec>& y) {
    check_conformance(arch, params);
    validate_points(arch, x, "x");
    validate_points(arch, y, "y");
    BatchWork w;
    batch_forward(arch, params, x, y, w);
    return batch_objective(arch, w, x.size());
}

void critic_objective_gradient(const CriticArchitecture& arch, const CriticParams& params,
                               const std::vector<Vec>& x, const std::vector<Vec>& y,
                               CriticParams& grad) {
    check_conformance(arch, params);
    validate_points(arch, x, "x");
    validate_points(arch, y, "y");
    grad = zero_params(arch);
    BatchWork w;
    batch_forward(arch, params, x, y, w);
    batch_backward(arch, params, w, x.size(), grad);
}

void project_to_class(const CriticArchitecture& arch, CriticParams& params) {
    check_conformance(arch, params);
    // Entrywise clip.
    const double bound = arch.weight_bound;
    for (auto& layer : params.w) {
        for (auto& v : layer) v = std::clamp(v, -bound, bound);
    }
    for (auto& layer : params.b) {
        for (auto& v : layer) v = std::clamp(v, -bound, bound);
    }
    // Global magnitude top-K with a deterministic total order on ties:
    // earlier layer first, weights before biases, then position.
    struct EntryRef {
        double magnitude;
        std::size_t ordinal;
        double* value;
        std::uint8_t* keep;
    };
    std::vector<EntryRef> entries;
    std::size_t ordinal = 0;
    for (std::size_t l = 0; l < params.w.size(); ++l) {
        for (std::size_t i = 0; i < params.w[l].size(); ++i) {
            entries.push_back({std::abs(params.w[l][i]), ordinal++, &params.w[l][i],
                               &params.w_keep[l][i]});
        }
        for (std::size_t i = 0; i < params.b[l].size(); ++i) {
            entries.push_back({std::abs(params.b[l][i]), ordinal++, &params.b[l][i],
                               &params.b_keep[l][i]});
        }
    }
    const auto k = static_cast<std::size_t>(std::min<long long>(
        arch.sparsity, static_cast<long long>(entries.size())));
    std::sort(entries.begin(), entries.end(), [](const EntryRef& a, const EntryRef& b) {
        if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
        return a.ordinal < b.ordinal;
    });
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i < k) {
            *entries[i].keep = 1;
        } else {
            *entries[i].keep = 0;
            *entries[i].value = 0.0;
        }
    }
}

CriticArchitecture hyperparams_from_theory(std::size_t n, int ambient_dim, int intrinsic_dim,
                                           double s, double beta, double coord_bound,
                                           double reach) {
    if (n < 2) throw DomainError("hyperparams_from_theory: n must be >= 2");
    if (ambient_dim < 1 || intrinsic_dim < 1) {
        throw ShapeError("hyperparams_from_theory: dimensions must be >= 1");
    }
    if (!(s + beta > 0.0)) throw DomainError("hyperparams_from_theory: smoothness must be positive");
    // ceil with an epsilon snap so exact integer powers are not bumped up.
    auto snap_ceil = [](double v) {
        const double r = std::round(v);
        return std::abs(v - r) < 1e-9 ? r : std::ceil(v);
    };
    const double sb = s + beta;
    const double denom = 2.0 * sb + static_cast<double>(intrinsic_dim);
    const double nd = static_cast<double>(n);
    const double dd = static_cast<double>(ambient_dim);
    const double rate_exp = static_cast<double>(intrinsic_dim) / denom;
    const double n_pow = std::exp(rate_exp * std::log(nd));

    CriticArchitecture arch;
    arch.input_dim = ambient_dim;
    arch.output_bound = 1.0;
    arch.weight_bound = std::max({1.0, coord_bound, std::sqrt(static_cast<double>(intrinsic_dim)),
                                  reach * reach});
    arch.depth = static_cast<int>(snap_ceil(sb / denom * std::log(nd * dd)));
    arch.depth = std::max(arch.depth, 1);
    arch.width = static_cast<int>(snap_ceil(n_pow)) + ambient_dim;
    arch.sparsity = static_cast<long long>(
        snap_ceil(sb / denom * (n_pow + dd) * std::log(nd) + dd * std::log(dd)));
    arch.sparsity = std::max<long long>(arch.sparsity, arch.depth);
    validate_arch(arch);
    return arch;
}

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.steps < 1) throw DomainError("train config: steps must be >= 1");
    if (!(cfg.step_size > 0.0)) throw DomainError("train config: step size must be positive");
    if (cfg.projection_period < 1 || cfg.steps % cfg.projection_period != 0) {
        throw DomainError("train config: projection period must divide the step count");
    }
    if (cfg.init_scale < 0.0) throw DomainError("train config: negative init scale");
    if (!(cfg.decay > 0.0 && cfg.decay <= 1.0)) {
        throw DomainError("train config: decay must lie in (0, 1]");
    }
    if (cfg.restarts < 1) throw DomainError("train config: restarts must be >= 1");
}

TrainResult train_critic(const CriticArchitecture& arch, const std::vector<Vec>& x,
                         const std::vector<Vec>& y, const TrainConfig& cfg) {
    validate_arch(arch);
    validate_train_config(cfg);
    validate_points(arch, x, "x");
    validate_points(arch, y, "y");

    const double scale = cfg.init_scale > 0.0
                             ? cfg.init_scale
                             : arch.weight_bound / std::sqrt(static_cast<double>(
                                   std::max(arch.width, arch.input_dim)));

    CriticParams grad = zero_params(arch);
    BatchWork work;
    TrainResult result;
    bool have_result = false;
    for (int restart = 0; restart < cfg.restarts; ++restart) {
        // Restart 0 keeps the seed itself so restarts = 1 reproduces a plain
        // single run bit for bit.
        const std::uint64_t run_seed =
            restart == 0 ? cfg.seed
                         : rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(restart));
        CriticParams params = zero_params(arch);
        rng::Stream stream(run_seed);
        for (auto& layer : params.w) {
            for (auto& v : layer) v = stream.uniform(-scale, scale);
        }
        for (auto& layer : params.b) {
            for (auto& v : layer) v = stream.uniform(-scale, scale);
        }
        project_to_class(arch, params);

        // Projected gradient ascent reporting the best feasible iterate. The
        // objective is not monotone along the trajectory (the sparsity
        // projection can drop it sharply), so the last iterate would
        // under-report what the search actually achieved inside the class.
        batch_forward(arch, params, x, y, work);
        double run_best = batch_objective(arch, work, x.size());
        if (!have_result || run_best > result.statistic) {
            result.statistic = run_best;
            result.params = params;
            have_result = true;
        }
        double lr = cfg.step_size;
        for (int step = 1; step <= cfg.steps; ++step) {
            batch_forward(arch, params, x, y, work);
            batch_backward(arch, params, work, x.size(), grad);
            for (std::size_t l = 0; l < params.w.size(); ++l) {
                for (std::size_t i = 0; i < params.w[l].size(); ++i) {
                    params.w[l][i] += lr * grad.w[l][i];
                }
                for (std::size_t i = 0; i < params.b[l].size(); ++i) {
                    params.b[l][i] += lr * grad.b[l][i];
                }
            }
            lr *= cfg.decay;
            if (step % cfg.projection_period == 0) {
                project_to_class(arch, params);
                batch_forward(arch, params, x, y, work);
                const double value = batch_objective(arch, work, x.size());
                if (value > result.statistic) {
                    result.statistic = value;
                    result.params = params;
                }
            }
        }
        // projection_period divides steps, so each restart ends on a
        // projected, evaluated iterate.
    }
    return result;
}

CriticParams negate_params(const CriticParams& params) {
    CriticParams out = params;
    if (out.w.empty()) throw ShapeError("negate_params: empty parameter set");
    for (auto& v : out.w.back()) v = -v;
    for (auto& v : out.b.back()) v = -v;
    return out;
}

} // namespace mts
