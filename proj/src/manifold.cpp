#include "mts/manifold.hpp"

#include <algorithm>
#include <cmath>

#include "mts/errors.hpp"
#include "mts/rng.hpp"

namespace mts {

namespace detail {

Embedding Embedding::make(int ambient_dim, int low_dim, std::uint64_t rotation_seed) {
    if (low_dim < 1 || ambient_dim < low_dim) {
        throw ShapeError("embedding: ambient dimension must be >= intrinsic coordinate dimension");
    }
    Embedding e;
    e.ambient_dim_ = ambient_dim;
    e.low_dim_ = low_dim;
    e.identity_ = (rotation_seed == 0);
    if (e.identity_) return e;

    // Draw a Gaussian matrix and orthonormalize columns by modified
    // Gram-Schmidt. MGS yields the QR factor with positive diagonal of R,
    // so the result is canonical (no sign ambiguity) and deterministic.
    const int d = ambient_dim;
    rng::Stream stream(rotation_seed);
    std::vector<double> a(static_cast<std::size_t>(d) * d);
    for (auto& v : a) v = stream.normal();

    auto col = [&](std::vector<double>& m, int j, int i) -> double& {
        return m[static_cast<std::size_t>(i) * d + j];
    };
    std::vector<double> q(a);
    for (int j = 0; j < d; ++j) {
        for (int k = 0; k < j; ++k) {
            double dot = 0.0;
            for (int i = 0; i < d; ++i) dot += col(q, k, i) * col(q, j, i);
            for (int i = 0; i < d; ++i) col(q, j, i) -= dot * col(q, k, i);
        }
        double norm = 0.0;
        for (int i = 0; i < d; ++i) norm += col(q, j, i) * col(q, j, i);
        norm = std::sqrt(norm);
        if (norm < 1e-12) throw DomainError("embedding: degenerate random rotation draw");
        for (int i = 0; i < d; ++i) col(q, j, i) /= norm;
    }
    e.q_ = std::move(q);
    return e;
}

Vec Embedding::embed(const Vec& low) const {
    if (static_cast<int>(low.size()) != low_dim_) {
        throw ShapeError("embedding: wrong low-dimensional coordinate size");
    }
    Vec x(static_cast<std::size_t>(ambient_dim_), 0.0);
    if (identity_) {
        std::copy(low.begin(), low.end(), x.begin());
        return x;
    }
    // x = Q * padded(low); padded has zeros past low_dim_.
    for (int i = 0; i < ambient_dim_; ++i) {
        double acc = 0.0;
        for (int j = 0; j < low_dim_; ++j) {
            acc += q_[static_cast<std::size_t>(i) * ambient_dim_ + j] * low[static_cast<std::size_t>(j)];
        }
        x[static_cast<std::size_t>(i)] = acc;
    }
    return x;
}

void Embedding::to_low(const Vec& ambient, Vec& low, double& residual) const {
    if (static_cast<int>(ambient.size()) != ambient_dim_) {
        throw ShapeError("embedding: wrong ambient point size");
    }
    low.assign(static_cast<std::size_t>(low_dim_), 0.0);
    double res2 = 0.0;
    if (identity_) {
        for (int j = 0; j < low_dim_; ++j) low[static_cast<std::size_t>(j)] = ambient[static_cast<std::size_t>(j)];
        for (int j = low_dim_; j < ambient_dim_; ++j) {
            res2 += ambient[static_cast<std::size_t>(j)] * ambient[static_cast<std::size_t>(j)];
        }
    } else {
        for (int j = 0; j < ambient_dim_; ++j) {
            double acc = 0.0;
            for (int i = 0; i < ambient_dim_; ++i) {
                acc += q_[static_cast<std::size_t>(i) * ambient_dim_ + j] * ambient[static_cast<std::size_t>(i)];
            }
            if (j < low_dim_) {
                low[static_cast<std::size_t>(j)] = acc;
            } else {
                res2 += acc * acc;
            }
        }
    }
    residual = std::sqrt(res2);
}

} // namespace detail

double smooth_bump(double t) {
    if (!(std::abs(t) < 1.0)) return 0.0;
    return std::exp(-1.0 / (1.0 - t * t));
}

double one_sided_mollifier(double u, double u0) {
    if (!(u > u0)) return 0.0;
    return std::exp(-1.0 / (u - u0));
}

// ---------------------------------------------------------------- circle ---

CircleAtlas::CircleAtlas(int ambient_dim, std::uint64_t rotation_seed) {
    if (ambient_dim < 2) throw ShapeError("circle atlas needs ambient dimension >= 2");
    emb_ = detail::Embedding::make(ambient_dim, 2, rotation_seed);
    desc_.kind = ManifoldKind::Circle;
    desc_.intrinsic_dim = 1;
    desc_.ambient_dim = ambient_dim;
    desc_.coord_bound = 1.0;
    desc_.reach = 1.0; // unit circle, rotation preserves it
    desc_.rotation_seed = rotation_seed;
}

double CircleAtlas::manifold_residual(const Vec& x) const {
    Vec low;
    double residual;
    emb_.to_low(x, low, residual);
    const double radial = std::abs(std::hypot(low[0], low[1]) - 1.0);
    return std::max(residual, radial);
}

double CircleAtlas::canonical_angle(const Vec& x) const {
    Vec low;
    double residual;
    emb_.to_low(x, low, residual);
    if (std::max(residual, std::abs(std::hypot(low[0], low[1]) - 1.0)) > tolerance) {
        throw DomainError("circle atlas: point is off the manifold");
    }
    return std::atan2(low[1], low[0]);
}

Vec CircleAtlas::embed_angle(double theta) const {
    return emb_.embed(Vec{std::cos(theta), std::sin(theta)});
}

bool CircleAtlas::chart_contains(std::size_t alpha, const Vec& x) const {
    if (alpha >= 2) throw ShapeError("circle atlas: chart index out of range");
    const double off = rng::wrap_angle(canonical_angle(x) - chart_center(alpha));
    return std::abs(off) < half_width;
}

Vec CircleAtlas::chart_coords(std::size_t alpha, const Vec& x) const {
    if (alpha >= 2) throw ShapeError("circle atlas: chart index out of range");
    const double off = rng::wrap_angle(canonical_angle(x) - chart_center(alpha));
    if (!(std::abs(off) < half_width)) {
        throw DomainError("circle atlas: point outside the chart window");
    }
    return Vec{off};
}

std::vector<double> CircleAtlas::unity_weights(const Vec& x) const {
    const double theta = canonical_angle(x); // includes the on-manifold check
    std::vector<double> w(2);
    for (std::size_t alpha = 0; alpha < 2; ++alpha) {
        const double off = rng::wrap_angle(theta - chart_center(alpha));
        w[alpha] = smooth_bump(off / half_width);
    }
    const double total = w[0] + w[1];
    // The two windows cover the circle, so at least one bump is positive.
    w[0] /= total;
    w[1] /= total;
    return w;
}

// ---------------------------------------------------------------- sphere ---

SphereAtlas::SphereAtlas(int ambient_dim, std::uint64_t rotation_seed) {
    if (ambient_dim < 3) throw ShapeError("sphere atlas needs ambient dimension >= 3");
    emb_ = detail::Embedding::make(ambient_dim, 3, rotation_seed);
    desc_.kind = ManifoldKind::Sphere;
    desc_.intrinsic_dim = 2;
    desc_.ambient_dim = ambient_dim;
    desc_.coord_bound = 1.0;
    desc_.reach = 1.0;
    desc_.rotation_seed = rotation_seed;
}

namespace {

// Chart alpha = 2*axis + (sign < 0): hemisphere {sign * x_axis > floor}.
inline int sphere_axis(std::size_t alpha) { return static_cast<int>(alpha / 2); }
inline double sphere_sign(std::size_t alpha) { return (alpha % 2 == 0) ? 1.0 : -1.0; }

} // namespace

double SphereAtlas::manifold_residual(const Vec& x) const {
    Vec low;
    double residual;
    emb_.to_low(x, low, residual);
    const double norm = std::sqrt(low[0] * low[0] + low[1] * low[1] + low[2] * low[2]);
    return std::max(residual, std::abs(norm - 1.0));
}

Vec SphereAtlas::embed_point(double x, double y, double z) const {
    return emb_.embed(Vec{x, y, z});
}

bool SphereAtlas::chart_contains(std::size_t alpha, const Vec& x) const {
    if (alpha >= 6) throw ShapeError("sphere atlas: chart index out of range");
    Vec low;
    double residual;
    emb_.to_low(x, low, residual);
    if (manifold_residual(x) > tolerance) {
        throw DomainError("sphere atlas: point is off the manifold");
    }
    return sphere_sign(alpha) * low[static_cast<std::size_t>(sphere_axis(alpha))] > window_floor;
}

Vec SphereAtlas::chart_coords(std::size_t alpha, const Vec& x) const {
    if (!chart_contains(alpha, x)) {
        throw DomainError("sphere atlas: point outside the chart window");
    }
    Vec low;
    double residual;
    emb_.to_low(x, low, residual);
    // Drop the window axis; keep the other two coordinates in axis order.
    Vec out;
    out.reserve(2);
    for (int j = 0; j < 3; ++j) {
        if (j != sphere_axis(alpha)) out.push_back(low[static_cast<std::size_t>(j)]);
    }
    return out;
}

std::vector<double> SphereAtlas::unity_weights(const Vec& x) const {
    Vec low;
    double residual;
    emb_.to_low(x, low, residual);
    const double norm = std::sqrt(low[0] * low[0] + low[1] * low[1] + low[2] * low[2]);
    if (std::max(residual, std::abs(norm - 1.0)) > tolerance) {
        throw DomainError("sphere atlas: point is off the manifold");
    }
    std::vector<double> w(6);
    double total = 0.0;
    for (std::size_t alpha = 0; alpha < 6; ++alpha) {
        const double u = sphere_sign(alpha) * low[static_cast<std::size_t>(sphere_axis(alpha))];
        w[alpha] = one_sided_mollifier(u, window_floor);
        total += w[alpha];
    }
    // max_i |x_i| >= 1/sqrt(3) > window_floor on the sphere, so total > 0.
    for (auto& v : w) v /= total;
    return w;
}

std::unique_ptr<CircleAtlas> build_circle_atlas(int ambient_dim, std::uint64_t rotation_seed) {
    return std::make_unique<CircleAtlas>(ambient_dim, rotation_seed);
}

std::unique_ptr<SphereAtlas> build_sphere_atlas(int ambient_dim, std::uint64_t rotation_seed) {
    return std::make_unique<SphereAtlas>(ambient_dim, rotation_seed);
}

std::unique_ptr<Atlas> build_atlas(const ManifoldDescriptor& desc) {
    switch (desc.kind) {
        case ManifoldKind::Circle:
            return build_circle_atlas(desc.ambient_dim, desc.rotation_seed);
        case ManifoldKind::Sphere:
            return build_sphere_atlas(desc.ambient_dim, desc.rotation_seed);
    }
    throw ConfigError("unknown manifold kind");
}

// ------------------------------------------------------------- sampling ---

void validate_spec(const DistributionSpec& spec) {
    const auto& m = spec.manifold;
    const bool circle_family = spec.family != DistFamily::UniformSphere;
    if (circle_family && m.kind != ManifoldKind::Circle) {
        throw ConfigError("circle distribution family on a non-circle manifold");
    }
    if (!circle_family && m.kind != ManifoldKind::Sphere) {
        throw ConfigError("sphere distribution family on a non-sphere manifold");
    }
    if (m.kind == ManifoldKind::Circle && (m.intrinsic_dim != 1 || m.ambient_dim < 2)) {
        throw ConfigError("circle manifold needs intrinsic dimension 1 and ambient >= 2");
    }
    if (m.kind == ManifoldKind::Sphere && (m.intrinsic_dim != 2 || m.ambient_dim < 3)) {
        throw ConfigError("sphere manifold needs intrinsic dimension 2 and ambient >= 3");
    }
    if (spec.family == DistFamily::VonMisesCircle && !(spec.kappa >= 0.0)) {
        throw ConfigError("von Mises concentration must be >= 0");
    }
    if (spec.family == DistFamily::BumpPerturbedCircle) {
        if (!(spec.width > 0.0 && spec.width <= M_PI)) {
            throw ConfigError("bump width must lie in (0, pi]");
        }
        if (!(std::abs(spec.amplitude) < 1.0 / (2.0 * M_PI))) {
            throw ConfigError("bump amplitude must stay strictly below the uniform density level");
        }
    }
}

Sample sample_distribution(const DistributionSpec& spec, std::size_t n, std::uint64_t seed) {
    validate_spec(spec);
    rng::Stream stream(seed);
    Sample out;
    out.points.reserve(n);
    out.spec = spec;
    out.seed = seed;

    if (spec.manifold.kind == ManifoldKind::Sphere) {
        const SphereAtlas atlas(spec.manifold.ambient_dim, spec.manifold.rotation_seed);
        for (std::size_t i = 0; i < n; ++i) {
            double x, y, z, norm;
            do {
                x = stream.normal();
                y = stream.normal();
                z = stream.normal();
                norm = std::sqrt(x * x + y * y + z * z);
            } while (norm < 1e-12);
            out.points.push_back(atlas.embed_point(x / norm, y / norm, z / norm));
        }
        return out;
    }

    const CircleAtlas atlas(spec.manifold.ambient_dim, spec.manifold.rotation_seed);
    const bool is_uniform = spec.family == DistFamily::UniformCircle ||
                            (spec.family == DistFamily::VonMisesCircle && spec.kappa == 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double theta;
        if (is_uniform) {
            theta = stream.uniform(-M_PI, M_PI);
        } else if (spec.family == DistFamily::VonMisesCircle) {
            theta = stream.von_mises(spec.mu, spec.kappa);
        } else {
            // Rejection sampler for the bump-perturbed density
            //   h(theta) ∝ 1/(2pi) + a * bump(wrap(theta - center)/width).
            const double base = 1.0 / (2.0 * M_PI);
            const double envelope = base + std::max(0.0, spec.amplitude) * std::exp(-1.0);
            for (;;) {
                theta = stream.uniform(-M_PI, M_PI);
                const double u = stream.uniform01();
                const double t = rng::wrap_angle(theta - spec.center) / spec.width;
                const double density = base + spec.amplitude * smooth_bump(t);
                if (u * envelope <= density) break;
            }
        }
        out.points.push_back(atlas.embed_angle(theta));
    }
    return out;
}

// ------------------------------------------------------------ chart ops ---

std::size_t assign_chart(const Atlas& atlas, const Vec& x) {
    const auto w = atlas.unity_weights(x);
    std::size_t best = 0;
    for (std::size_t a = 1; a < w.size(); ++a) {
        if (w[a] > w[best]) best = a; // strict: ties stay with the lowest index
    }
    return best;
}

std::vector<Rational> chart_masses(const Atlas& atlas, const Sample& sample) {
    if (sample.points.empty()) throw DomainError("chart_masses: empty sample");
    std::vector<std::int64_t> counts(atlas.chart_count(), 0);
    for (const auto& x : sample.points) counts[assign_chart(atlas, x)]++;
    std::vector<Rational> masses;
    masses.reserve(counts.size());
    const auto n = static_cast<std::int64_t>(sample.points.size());
    for (auto c : counts) masses.push_back(make_rational(c, n));
    return masses;
}

void validate_cloud(const WeightedPointCloud& cloud) {
    if (cloud.points.empty()) throw DomainError("point cloud: empty");
    if (cloud.points.size() != cloud.weights.size()) {
        throw ShapeError("point cloud: points/weights length mismatch");
    }
    const std::size_t dim = cloud.points.front().size();
    if (dim == 0) throw ShapeError("point cloud: zero-dimensional points");
    Rational total{0, 1};
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        if (cloud.points[i].size() != dim) throw ShapeError("point cloud: ragged point dimensions");
        if (cloud.weights[i].num <= 0) throw DomainError("point cloud: non-positive weight");
        total = rat_add(total, cloud.weights[i]);
    }
    if (!rat_eq(total, Rational{1, 1})) throw DomainError("point cloud: weights do not sum to 1");
}

WeightedPointCloud push_to_chart(const Atlas& atlas, const Sample& sample, std::size_t alpha) {
    if (alpha >= atlas.chart_count()) throw ShapeError("push_to_chart: chart index out of range");
    WeightedPointCloud cloud;
    for (const auto& x : sample.points) {
        if (assign_chart(atlas, x) == alpha) cloud.points.push_back(atlas.chart_coords(alpha, x));
    }
    const auto m = static_cast<std::int64_t>(cloud.points.size());
    cloud.weights.assign(cloud.points.size(), make_rational(1, m == 0 ? 1 : m));
    return cloud;
}

} // namespace mts
