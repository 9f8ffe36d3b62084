#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "mts/rational.hpp"

namespace mts {

using Vec = std::vector<double>;

enum class ManifoldKind { Circle, Sphere };

// Immutable description of an embedded manifold instance. The embedding is
// fully determined by (kind, ambient_dim, rotation_seed): low-dimensional
// coordinates are zero-padded to the ambient dimension and rotated by a
// deterministic orthogonal matrix drawn from rotation_seed. rotation_seed == 0
// means the identity embedding (pure zero-padding).
struct ManifoldDescriptor {
    ManifoldKind kind = ManifoldKind::Circle;
    int intrinsic_dim = 1;
    int ambient_dim = 2;
    double coord_bound = 1.0;           // sup-norm bound on ambient coordinates
    std::optional<double> reach = 1.0;  // nullopt when unknown
    std::uint64_t rotation_seed = 0;
};

namespace detail {

// Deterministic orthogonal embedding of R^low_dim into R^ambient_dim.
class Embedding {
public:
    static Embedding make(int ambient_dim, int low_dim, std::uint64_t rotation_seed);

    Vec embed(const Vec& low) const;

    // Inverse rotation; returns the low block and the off-manifold residual
    // norm of the padded block.
    void to_low(const Vec& ambient, Vec& low, double& residual) const;

    int ambient_dim() const { return ambient_dim_; }
    int low_dim() const { return low_dim_; }

private:
    int ambient_dim_ = 0;
    int low_dim_ = 0;
    bool identity_ = true;
    std::vector<double> q_; // ambient_dim x ambient_dim, row-major, orthogonal
};

} // namespace detail

// Smooth compactly-supported bump: exp(-1/(1-t^2)) on |t| < 1, zero outside.
double smooth_bump(double t);

// One-sided mollifier: exp(-1/(u-u0)) for u > u0, zero otherwise.
double one_sided_mollifier(double u, double u0);

// A finite atlas over an embedded manifold together with a smooth partition
// of unity subordinate to the chart windows. Immutable after construction;
// all operations are pure.
class Atlas {
public:
    virtual ~Atlas() = default;

    const ManifoldDescriptor& descriptor() const { return desc_; }
    virtual std::size_t chart_count() const = 0;
    // Dimension of chart images (1 for circle charts, 2 for sphere charts).
    virtual int chart_dim() const = 0;

    // Chart-window membership for an ambient point on the manifold.
    virtual bool chart_contains(std::size_t alpha, const Vec& x) const = 0;

    // Chart map; requires chart_contains(alpha, x).
    virtual Vec chart_coords(std::size_t alpha, const Vec& x) const = 0;

    // Partition-of-unity weights at x: non-negative, sum exactly normalized
    // to 1, weight positive only inside the corresponding chart window.
    // Throws DomainError when x is farther than `tolerance` from the manifold.
    virtual std::vector<double> unity_weights(const Vec& x) const = 0;

    // Distance diagnostics used by the domain check.
    virtual double manifold_residual(const Vec& x) const = 0;

    static constexpr double tolerance = 1e-9;

protected:
    ManifoldDescriptor desc_;
};

class CircleAtlas final : public Atlas {
public:
    CircleAtlas(int ambient_dim, std::uint64_t rotation_seed);

    std::size_t chart_count() const override { return 2; }
    int chart_dim() const override { return 1; }
    bool chart_contains(std::size_t alpha, const Vec& x) const override;
    Vec chart_coords(std::size_t alpha, const Vec& x) const override;
    std::vector<double> unity_weights(const Vec& x) const override;
    double manifold_residual(const Vec& x) const override;

    // Canonical angle of an on-manifold point, in (-pi, pi].
    double canonical_angle(const Vec& x) const;
    // Ambient point for an angle (used by samplers and tests).
    Vec embed_angle(double theta) const;

    // Chart centers 0 and pi, common half-width 3*pi/4.
    static constexpr double half_width = 3.0 * M_PI / 4.0;
    double chart_center(std::size_t alpha) const { return alpha == 0 ? 0.0 : M_PI; }

private:
    detail::Embedding emb_;
};

class SphereAtlas final : public Atlas {
public:
    SphereAtlas(int ambient_dim, std::uint64_t rotation_seed);

    std::size_t chart_count() const override { return 6; }
    int chart_dim() const override { return 2; }
    bool chart_contains(std::size_t alpha, const Vec& x) const override;
    Vec chart_coords(std::size_t alpha, const Vec& x) const override;
    std::vector<double> unity_weights(const Vec& x) const override;
    double manifold_residual(const Vec& x) const override;

    Vec embed_point(double x, double y, double z) const;

    // Coordinate-hemisphere windows {sigma * x_axis > window_floor}; the floor
    // sits strictly below 1/sqrt(3) so the six windows cover the sphere.
    static constexpr double window_floor = 0.4;

private:
    detail::Embedding emb_;
};

std::unique_ptr<CircleAtlas> build_circle_atlas(int ambient_dim, std::uint64_t rotation_seed);
std::unique_ptr<SphereAtlas> build_sphere_atlas(int ambient_dim, std::uint64_t rotation_seed);
std::unique_ptr<Atlas> build_atlas(const ManifoldDescriptor& desc);

enum class DistFamily { UniformCircle, VonMisesCircle, BumpPerturbedCircle, UniformSphere };

struct DistributionSpec {
    DistFamily family = DistFamily::UniformCircle;
    ManifoldDescriptor manifold;
    // Von Mises parameters (kappa == 0 reduces exactly to the uniform branch).
    double kappa = 0.0;
    double mu = 0.0;
    // Bump perturbation h(theta) ∝ 1/(2pi) + amplitude * bump(wrap(theta-center)/width).
    double amplitude = 0.0;
    double center = 0.0;
    double width = 1.0;
};

// Throws ConfigError on inconsistent family/manifold combinations or
// parameters outside their domain (|amplitude| must stay strictly below the
// uniform density level 1/(2pi) so the perturbed density is positive).
void validate_spec(const DistributionSpec& spec);

struct Sample {
    std::vector<Vec> points;
    std::optional<DistributionSpec> spec;
    std::uint64_t seed = 0;
};

Sample sample_distribution(const DistributionSpec& spec, std::size_t n, std::uint64_t seed);

// Hard chart assignment: argmax of unity weights, ties to the lowest index.
std::size_t assign_chart(const Atlas& atlas, const Vec& x);

// Exact empirical chart-occupancy vector (counts / n).
std::vector<Rational> chart_masses(const Atlas& atlas, const Sample& sample);

struct WeightedPointCloud {
    std::vector<Vec> points;
    std::vector<Rational> weights; // positive, summing exactly to 1
};

// Validates the cloud invariants (conforming sizes, positive weights summing
// exactly to one); throws ShapeError / DomainError.
void validate_cloud(const WeightedPointCloud& cloud);

// Conditional pushforward of the empirical measure onto chart alpha: chart
// coordinates of the points assigned to alpha, uniformly weighted 1/m.
// Returns an empty cloud when no point lands in the chart.
WeightedPointCloud push_to_chart(const Atlas& atlas, const Sample& sample, std::size_t alpha);

} // namespace mts
