// Target distributions: potential/gradient abstraction, the Gaussian family,
// the three 1D potentials with exact derivative chains, and the interacting
// particle chain with its split (chain force / mean-field) structure.
#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdmps {

using Vec = std::vector<double>;

class Target {
public:
    virtual ~Target() = default;
    virtual int dim() const = 0;
    virtual double potential(const Vec& x) const = 0;
    virtual Vec gradient(const Vec& x) const = 0;
    virtual double partial(int i, const Vec& x) const { return gradient(x)[i]; }
    // Global Lipschitz constant of the gradient; absent when none exists.
    virtual std::optional<double> grad_lipschitz() const { return std::nullopt; }
};

// ---------------------------------------------------------------------------
// Gaussian targets
// ---------------------------------------------------------------------------

struct GaussianSpec {
    enum class Structure { equicorrelated, diagonal };
    int dim = 1;
    Structure structure = Structure::equicorrelated;
    double rho = 0.0;      // equicorrelated: Sigma_ii = 1, Sigma_ij = rho
    double sigma1sq = 1.0; // diagonal: Sigma_11 = sigma1sq, Sigma_ii = 1 otherwise
};

namespace detail {

// In-place lower Cholesky; throws naming the pivot that failed.
inline void cholesky(std::vector<double>& a, int d) {
    for (int j = 0; j < d; ++j) {
        double s = a[j * d + j];
        for (int k = 0; k < j; ++k) s -= a[j * d + k] * a[j * d + k];
        if (s <= 0.0)
            throw std::invalid_argument("covariance not SPD: Cholesky pivot " +
                                        std::to_string(j) + " is nonpositive");
        double l = std::sqrt(s);
        a[j * d + j] = l;
        for (int i = j + 1; i < d; ++i) {
            double t = a[i * d + j];
            for (int k = 0; k < j; ++k) t -= a[i * d + k] * a[j * d + k];
            a[i * d + j] = t / l;
        }
        for (int k = j + 1; k < d; ++k) a[j * d + k] = 0.0;
    }
}

// Solve (L L^T) X = I for X given the lower factor L.
inline std::vector<double> cholesky_inverse(const std::vector<double>& l, int d) {
    std::vector<double> inv(static_cast<std::size_t>(d) * d, 0.0);
    std::vector<double> col(d);
    for (int c = 0; c < d; ++c) {
        for (int i = 0; i < d; ++i) col[i] = (i == c) ? 1.0 : 0.0;
        for (int i = 0; i < d; ++i) {  // forward
            double s = col[i];
            for (int k = 0; k < i; ++k) s -= l[i * d + k] * col[k];
            col[i] = s / l[i * d + i];
        }
        for (int i = d - 1; i >= 0; --i) {  // backward with L^T
            double s = col[i];
            for (int k = i + 1; k < d; ++k) s -= l[k * d + i] * col[k];
            col[i] = s / l[i * d + i];
        }
        for (int i = 0; i < d; ++i) inv[i * d + c] = col[i];
    }
    return inv;
}

}  // namespace detail

class GaussianTarget final : public Target {
public:
    explicit GaussianTarget(const GaussianSpec& spec) : spec_(spec), d_(spec.dim) {
        if (d_ < 1) throw std::invalid_argument("GaussianTarget: dim must be >= 1");
        std::vector<double> sigma(static_cast<std::size_t>(d_) * d_, 0.0);
        if (spec.structure == GaussianSpec::Structure::equicorrelated) {
            for (int i = 0; i < d_; ++i)
                for (int j = 0; j < d_; ++j) sigma[i * d_ + j] = (i == j) ? 1.0 : spec.rho;
            double lo = std::min(1.0 - spec.rho, 1.0 + (d_ - 1) * spec.rho);
            lipschitz_ = lo > 0.0 ? 1.0 / lo : 0.0;  // Cholesky below rejects lo <= 0
        } else {
            for (int i = 0; i < d_; ++i) sigma[i * d_ + i] = (i == 0) ? spec.sigma1sq : 1.0;
            lipschitz_ = std::max(1.0, spec.sigma1sq > 0 ? 1.0 / spec.sigma1sq : 0.0);
        }
        chol_ = sigma;
        detail::cholesky(chol_, d_);
        precision_ = detail::cholesky_inverse(chol_, d_);
    }

    int dim() const override { return d_; }

    double potential(const Vec& x) const override {
        // 0.5 x^T P x via the cached precision
        double s = 0.0;
        for (int i = 0; i < d_; ++i) {
            double r = 0.0;
            for (int j = 0; j < d_; ++j) r += precision_[i * d_ + j] * x[j];
            s += x[i] * r;
        }
        return 0.5 * s;
    }

    Vec gradient(const Vec& x) const override {
        Vec g(d_, 0.0);
        for (int i = 0; i < d_; ++i) {
            double r = 0.0;
            for (int j = 0; j < d_; ++j) r += precision_[i * d_ + j] * x[j];
            g[i] = r;
        }
        return g;
    }

    double partial(int i, const Vec& x) const override {
        double r = 0.0;
        for (int j = 0; j < d_; ++j) r += precision_[i * d_ + j] * x[j];
        return r;
    }

    std::optional<double> grad_lipschitz() const override { return lipschitz_; }

    // Draw from the target via the Cholesky factor of Sigma.
    template <class Rng>
    Vec sample(Rng& rng) const {
        Vec z(d_), x(d_, 0.0);
        for (auto& zi : z) zi = rng.normal();
        for (int i = 0; i < d_; ++i)
            for (int k = 0; k <= i; ++k) x[i] += chol_[i * d_ + k] * z[k];
        return x;
    }

    const std::vector<double>& precision() const { return precision_; }
    const GaussianSpec& spec() const { return spec_; }

private:
    GaussianSpec spec_;
    int d_;
    std::vector<double> precision_;
    std::vector<double> chol_;
    double lipschitz_ = 0.0;
};

inline std::shared_ptr<GaussianTarget> make_gaussian(const GaussianSpec& spec) {
    return std::make_shared<GaussianTarget>(spec);
}

// ---------------------------------------------------------------------------
// One-dimensional targets with exact derivative chains
// ---------------------------------------------------------------------------

class Target1D final : public Target {
public:
    enum class Kind { gaussian, quartic, cauchy };

    static Target1D gaussian(double sigma2) {
        if (sigma2 <= 0.0) throw std::invalid_argument("Target1D: sigma2 must be positive");
        return Target1D(Kind::gaussian, sigma2, 0.0);
    }
    static Target1D quartic() { return Target1D(Kind::quartic, 0.0, 0.0); }
    static Target1D cauchy(double gamma) {
        if (gamma <= 0.0) throw std::invalid_argument("Target1D: gamma must be positive");
        return Target1D(Kind::cauchy, 0.0, gamma);
    }

    Kind kind() const { return kind_; }
    double sigma2() const { return sigma2_; }
    double gamma() const { return gamma_; }

    int dim() const override { return 1; }

    double psi(double x) const {
        switch (kind_) {
            case Kind::gaussian: return x * x / (2.0 * sigma2_);
            case Kind::quartic: return x * x * x * x;
            case Kind::cauchy: return std::log(gamma_ * gamma_ + x * x);
        }
        return 0.0;
    }
    double psi1(double x) const {
        switch (kind_) {
            case Kind::gaussian: return x / sigma2_;
            case Kind::quartic: return 4.0 * x * x * x;
            case Kind::cauchy: return 2.0 * x / (gamma_ * gamma_ + x * x);
        }
        return 0.0;
    }
    double psi2(double x) const {
        switch (kind_) {
            case Kind::gaussian: return 1.0 / sigma2_;
            case Kind::quartic: return 12.0 * x * x;
            case Kind::cauchy: {
                double q = gamma_ * gamma_ + x * x;
                return 2.0 * (gamma_ * gamma_ - x * x) / (q * q);
            }
        }
        return 0.0;
    }
    double psi3(double x) const {
        switch (kind_) {
            case Kind::gaussian: return 0.0;
            case Kind::quartic: return 24.0 * x;
            case Kind::cauchy: {
                double g2 = gamma_ * gamma_, q = g2 + x * x;
                return -4.0 * x * (3.0 * g2 - x * x) / (q * q * q);
            }
        }
        return 0.0;
    }

    double potential(const Vec& x) const override { return psi(x[0]); }
    Vec gradient(const Vec& x) const override { return {psi1(x[0])}; }
    double partial(int, const Vec& x) const override { return psi1(x[0]); }

    std::optional<double> grad_lipschitz() const override {
        switch (kind_) {
            case Kind::gaussian: return 1.0 / sigma2_;
            case Kind::quartic: return std::nullopt;  // psi'' unbounded
            case Kind::cauchy: return 2.0 / (gamma_ * gamma_);
        }
        return std::nullopt;
    }

private:
    Target1D(Kind k, double s2, double g) : kind_(k), sigma2_(s2), gamma_(g) {}
    Kind kind_;
    double sigma2_;
    double gamma_;
};

inline Target1D make_gaussian1d(double sigma2) { return Target1D::gaussian(sigma2); }
inline Target1D make_quartic1d() { return Target1D::quartic(); }
inline Target1D make_cauchy1d(double gamma) { return Target1D::cauchy(gamma); }

// ---------------------------------------------------------------------------
// Factorized targets (subsampling)
// ---------------------------------------------------------------------------

// Potential of the form psi = (1/N_f) sum_j psi_j. The optional force split
// exposes a deterministic per-component force plus a bounded thinned part,
// which is what the per-event subsampling clock construction consumes.
class FactorizedTarget : public Target {
public:
    virtual int num_factors() const = 0;
    virtual double factor_partial(int j, int i, const Vec& x) const = 0;

    virtual bool has_force_split() const { return false; }
    // Exact deterministic force on component i (the "cheap" part).
    virtual double det_force(int /*i*/, const Vec& /*x*/) const {
        throw std::logic_error("det_force: target has no force split");
    }
    // Uniform bound on the per-component thinned rate.
    virtual double split_bound() const {
        throw std::logic_error("split_bound: target has no force split");
    }
    // Normalized partner force; |pair_force| <= split_bound, and the thinned
    // acceptance probability is (v_i * pair_force)_+ / split_bound.
    virtual double pair_force(int /*i*/, int /*j*/, const Vec& /*x*/) const {
        throw std::logic_error("pair_force: target has no force split");
    }
};

// Wraps any target as a single-factor factorized target (N_f = 1).
class SingleFactor final : public FactorizedTarget {
public:
    explicit SingleFactor(std::shared_ptr<const Target> base) : base_(std::move(base)) {}
    int dim() const override { return base_->dim(); }
    double potential(const Vec& x) const override { return base_->potential(x); }
    Vec gradient(const Vec& x) const override { return base_->gradient(x); }
    double partial(int i, const Vec& x) const override { return base_->partial(i, x); }
    std::optional<double> grad_lipschitz() const override { return base_->grad_lipschitz(); }
    int num_factors() const override { return 1; }
    double factor_partial(int, int i, const Vec& x) const override { return base_->partial(i, x); }

private:
    std::shared_ptr<const Target> base_;
};

// ---------------------------------------------------------------------------
// Interacting particle chain
// ---------------------------------------------------------------------------

// psi(x) = sum_i V(x_i - x_{i+1}) + (a/N) sum_{i<j} W(x_i - x_j) with
// V(s) = s^4 and W(s) = -sqrt(1+s^2). Boundary convention x_0 = x_1,
// x_{N+1} = x_N, so the end forces lose the missing-neighbour term.
// The mean-field pair convention keeps d_i psi equal to the chain force plus
// (a/N) sum_{j != i} W'(x_i - x_j), which is the rate the two-clock sampler
// thins against.
class ParticleChain final : public FactorizedTarget {
public:
    ParticleChain(int n, double a) : n_(n), a_(a) {
        if (n < 2) throw std::invalid_argument("ParticleChain: need at least 2 particles");
        if (a < 0.0) throw std::invalid_argument("ParticleChain: coupling must be >= 0");
    }

    static double V(double s) { return s * s * s * s; }
    static double Vp(double s) { return 4.0 * s * s * s; }
    static double W(double s) { return -std::sqrt(1.0 + s * s); }
    static double Wp(double s) { return -s / std::sqrt(1.0 + s * s); }

    int dim() const override { return n_; }
    int particles() const { return n_; }
    double coupling() const { return a_; }

    double potential(const Vec& x) const override {
        double s = 0.0;
        for (int i = 0; i + 1 < n_; ++i) s += V(x[i] - x[i + 1]);
        if (a_ > 0.0) {
            double m = 0.0;
            for (int i = 0; i < n_; ++i)
                for (int j = i + 1; j < n_; ++j) m += W(x[i] - x[j]);
            s += a_ / n_ * m;
        }
        return s;
    }

    double chain_force(int i, const Vec& x) const {
        double f = 0.0;
        if (i + 1 < n_) f += Vp(x[i] - x[i + 1]);
        if (i > 0) f -= Vp(x[i - 1] - x[i]);
        return f;
    }

    double meanfield_force(int i, const Vec& x) const {
        if (a_ == 0.0) return 0.0;
        double s = 0.0;
        for (int j = 0; j < n_; ++j)
            if (j != i) s += Wp(x[i] - x[j]);
        return a_ / n_ * s;
    }

    Vec gradient(const Vec& x) const override {
        Vec g(n_);
        for (int i = 0; i < n_; ++i) g[i] = chain_force(i, x) + meanfield_force(i, x);
        return g;
    }

    double partial(int i, const Vec& x) const override {
        return chain_force(i, x) + meanfield_force(i, x);
    }

    // Uniform-average factorization: psi_j = chain + (a/2) sum_{i != j} W(x_i - x_j),
    // so (1/N) sum_j d_i psi_j recovers d_i psi exactly.
    int num_factors() const override { return n_; }
    double factor_partial(int j, int i, const Vec& x) const override {
        double f = chain_force(i, x);
        if (a_ == 0.0) return f;
        if (i != j) {
            f += 0.5 * a_ * Wp(x[i] - x[j]);
        } else {
            double s = 0.0;
            for (int k = 0; k < n_; ++k)
                if (k != j) s += Wp(x[j] - x[k]);
            f += 0.5 * a_ * s;
        }
        return f;
    }

    bool has_force_split() const override { return true; }
    double det_force(int i, const Vec& x) const override { return chain_force(i, x); }
    double split_bound() const override { return a_; }
    // a * W'(x_i - x_j); magnitude bounded by a since |W'| <= 1.
    double pair_force(int i, int j, const Vec& x) const override {
        if (i == j) return 0.0;
        return a_ * Wp(x[i] - x[j]);
    }

private:
    int n_;
    double a_;
};

inline std::shared_ptr<ParticleChain> make_particle_chain(int n, double a) {
    return std::make_shared<ParticleChain>(n, a);
}

// Empirical variance v(x) = (1/N^2) sum_{ij} (x_i - x_j)^2, in O(N) form.
inline double empirical_variance(const Vec& x) {
    double s1 = 0.0, s2 = 0.0;
    for (double xi : x) {
        s1 += xi;
        s2 += xi * xi;
    }
    double n = static_cast<double>(x.size());
    double m = s1 / n;
    return 2.0 * s2 / n - 2.0 * m * m;
}

}  // namespace pdmps
