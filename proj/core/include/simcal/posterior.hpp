#pragma once

#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#include "simcal/types.hpp"

namespace simcal {

/// Observed real-system counts n_j(i) and simulation counts ñ_j(i) over
/// s design points and m outcome categories.
///
/// Row totals are derived on demand; the class never stores them.
class ProblemData {
public:
    ProblemData(std::vector<double> design_coords, CountTable real_counts, CountTable sim_counts);

    int designs() const { return static_cast<int>(coords_.size()); }
    int outcomes() const { return static_cast<int>(real_.cols()); }

    const std::vector<double>& design_coords() const { return coords_; }
    const CountTable& real_counts() const { return real_; }
    const CountTable& sim_counts() const { return sim_; }

    std::int64_t real_total(int design) const { return real_.row(design).sum(); }
    std::int64_t sim_total(int design) const { return sim_.row(design).sum(); }
    std::int64_t real_total() const { return real_.sum(); }

    /// Same design grid with different real counts (used by the replication experiments).
    ProblemData with_real_counts(CountTable real_counts) const;
    ProblemData with_sim_counts(CountTable sim_counts) const;

private:
    std::vector<double> coords_;
    CountTable real_;
    CountTable sim_;
};

/// Row-stochastic s×m table (a valid distribution per design point).
struct ProbTable {
    Table values;
};

/// Nonnegative likelihood-ratio table d_j(i) = p_j(i) / p̃_j(i).
struct DiscrepancyTable {
    Table values;
};

/// Gaussian prior on (d, p̃) with means 1 and 1/m respectively.
struct GaussianPriorSpec {
    double lambda_d = 0.25;
    double lambda_p = 0.01;
    double rho_design = 0.75;
    double rho_outcome = 0.75;
    double jitter = 1e-8;
    // Explicit sm×sm correlation matrices; when set, the kernel parameters are ignored.
    std::optional<Matrix> R_d;
    std::optional<Matrix> R_p;
};

bool validate_distribution(const Table& p, double tol = kValidityTolerance);
bool validate_discrepancy(const Table& d, const Table& p, double tol = kValidityTolerance);

/// Kronecker product R_x ⊗ R_y with (R_x)_jk = rho_design^|x_j − x_k| and
/// (R_y)_kl = rho_outcome^|k − l|, plus jitter on the diagonal.
/// Throws std::invalid_argument if the result is not positive definite.
Matrix build_prior_correlation(const std::vector<double>& design_coords, int m, double rho_design,
                               double rho_outcome, double jitter);

/// Σ n log(d p̃) + Σ ñ log p̃; −∞ when a positive count meets a nonpositive argument.
double log_likelihood(const Table& d, const Table& p_tilde, const ProblemData& data);

/// Immutable data + prior. Precision matrices λ R⁻¹ are factored once at construction.
class PosteriorModel {
public:
    PosteriorModel(ProblemData data, GaussianPriorSpec prior);

    const ProblemData& data() const { return data_; }
    const GaussianPriorSpec& prior() const { return prior_; }
    int designs() const { return data_.designs(); }
    int outcomes() const { return data_.outcomes(); }

    /// λ_d R_d⁻¹ and λ_p R_p⁻¹ (sm×sm, design-major).
    const Matrix& discrepancy_precision() const { return prec_d_; }
    const Matrix& simulator_precision() const { return prec_p_; }

    /// g(d) = −λ_d (d−1)ᵀ R_d⁻¹ (d−1), no constraint check.
    double discrepancy_log_density(const Table& d) const;
    /// f(p̃) = −λ_p (p̃−1/m)ᵀ R_p⁻¹ (p̃−1/m), no constraint check.
    double simulator_log_density(const Table& p_tilde) const;

    /// f + g when the constraint block holds within tolerance, −∞ otherwise.
    double log_prior(const Table& d, const Table& p_tilde) const;
    double log_likelihood(const Table& d, const Table& p_tilde) const;
    double log_posterior(const Table& d, const Table& p_tilde) const;

    /// Log posterior in the (p, p̃) parameterisation, d = p / p̃. Rows of p
    /// and p̃ are assumed to lie on the simplex; p̃ must be strictly positive.
    double log_posterior_pp(const Table& p, const Table& p_tilde) const;

    /// Gradients of log_posterior_pp with respect to p and p̃.
    void gradient_pp(const Table& p, const Table& p_tilde, Table& grad_p, Table& grad_pt) const;
    /// Hessian of log_posterior_pp over x = (flat p, flat p̃), size 2sm.
    /// Requires p > 0 wherever n > 0.
    void hessian_pp(const Table& p, const Table& p_tilde, Matrix& hess) const;

private:
    ProblemData data_;
    GaussianPriorSpec prior_;
    Matrix prec_d_;
    Matrix prec_p_;
};

/// log_prior as a free function: builds the correlation matrices from `design_coords`.
double log_prior(const Table& d, const Table& p_tilde, const GaussianPriorSpec& prior,
                 const std::vector<double>& design_coords);

}  // namespace simcal
