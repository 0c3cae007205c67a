#include "simcal/posterior.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace simcal {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_counts(const CountTable& c, const char* what) {
    if ((c.array() < 0).any()) {
        throw std::invalid_argument(std::string(what) + " counts must be nonnegative");
    }
}

Matrix precision_from(const Matrix& R, double lambda, const char* what) {
    Eigen::LLT<Matrix> llt(R);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument(std::string(what) + " correlation matrix is not positive definite");
    }
    Matrix inv = llt.solve(Matrix::Identity(R.rows(), R.cols()));
    inv = 0.5 * (inv + inv.transpose());
    return lambda * inv;
}

void check_explicit(const Matrix& R, Eigen::Index sm, const char* what) {
    if (R.rows() != sm || R.cols() != sm) {
        throw std::invalid_argument(std::string(what) + " must be " + std::to_string(sm) + "x" +
                                    std::to_string(sm));
    }
    if (!R.allFinite()) {
        throw std::invalid_argument(std::string(what) + " has non-finite entries");
    }
    const double scale = std::max(1.0, R.cwiseAbs().maxCoeff());
    if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw std::invalid_argument(std::string(what) + " is not symmetric");
    }
}

double quad_form(const Matrix& Q, const Eigen::Ref<const Vector>& v) {
    return v.dot(Q * v);
}

}  // namespace

ProblemData::ProblemData(std::vector<double> design_coords, CountTable real_counts,
                         CountTable sim_counts)
    : coords_(std::move(design_coords)), real_(std::move(real_counts)), sim_(std::move(sim_counts)) {
    const auto s = static_cast<Eigen::Index>(coords_.size());
    if (s < 1) throw std::invalid_argument("at least one design point is required");
    if (real_.rows() != s || sim_.rows() != s) {
        throw std::invalid_argument("count tables must have one row per design point");
    }
    if (real_.cols() != sim_.cols()) {
        throw std::invalid_argument("real and simulation count tables differ in outcome count");
    }
    if (real_.cols() < 2) throw std::invalid_argument("at least two outcome categories are required");
    check_counts(real_, "real");
    check_counts(sim_, "simulation");
    for (std::size_t j = 0; j < coords_.size(); ++j) {
        if (!std::isfinite(coords_[j])) throw std::invalid_argument("design coordinates must be finite");
        for (std::size_t k = 0; k < j; ++k) {
            if (coords_[j] == coords_[k]) {
                throw std::invalid_argument("design coordinates must be pairwise distinct");
            }
        }
    }
}

ProblemData ProblemData::with_real_counts(CountTable real_counts) const {
    return ProblemData(coords_, std::move(real_counts), sim_);
}

ProblemData ProblemData::with_sim_counts(CountTable sim_counts) const {
    return ProblemData(coords_, real_, std::move(sim_counts));
}

bool validate_distribution(const Table& p, double tol) {
    if (!p.allFinite()) return false;
    for (Eigen::Index j = 0; j < p.rows(); ++j) {
        if ((p.row(j).array() < -tol).any()) return false;
        if (std::abs(p.row(j).sum() - 1.0) > tol) return false;
    }
    return true;
}

bool validate_discrepancy(const Table& d, const Table& p, double tol) {
    if (d.rows() != p.rows() || d.cols() != p.cols() || !d.allFinite()) return false;
    for (Eigen::Index j = 0; j < d.rows(); ++j) {
        if ((d.row(j).array() < -tol).any()) return false;
        if (std::abs(d.row(j).dot(p.row(j)) - 1.0) > tol) return false;
    }
    return true;
}

Matrix build_prior_correlation(const std::vector<double>& design_coords, int m, double rho_design,
                               double rho_outcome, double jitter) {
    if (design_coords.empty() || m < 1) throw std::invalid_argument("empty correlation structure");
    if (!(rho_design > 0.0 && rho_design < 1.0) || !(rho_outcome > 0.0 && rho_outcome < 1.0)) {
        throw std::invalid_argument("correlation bases must lie in (0, 1)");
    }
    if (!(jitter >= 0.0)) throw std::invalid_argument("jitter must be nonnegative");

    const auto s = static_cast<Eigen::Index>(design_coords.size());
    Matrix Rx(s, s);
    for (Eigen::Index a = 0; a < s; ++a) {
        for (Eigen::Index b = 0; b < s; ++b) {
            Rx(a, b) = std::pow(rho_design, std::abs(design_coords[a] - design_coords[b]));
        }
    }
    Matrix Ry(m, m);
    for (int k = 0; k < m; ++k) {
        for (int l = 0; l < m; ++l) Ry(k, l) = std::pow(rho_outcome, std::abs(k - l));
    }

    Matrix R(s * m, s * m);
    for (Eigen::Index a = 0; a < s; ++a) {
        for (Eigen::Index b = 0; b < s; ++b) R.block(a * m, b * m, m, m) = Rx(a, b) * Ry;
    }
    R.diagonal().array() += jitter;

    Eigen::LLT<Matrix> llt(R);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("prior correlation is not positive definite at the configured jitter");
    }
    return R;
}

double log_likelihood(const Table& d, const Table& p_tilde, const ProblemData& data) {
    const auto& n = data.real_counts();
    const auto& nt = data.sim_counts();
    double total = 0.0;
    for (Eigen::Index j = 0; j < n.rows(); ++j) {
        for (Eigen::Index i = 0; i < n.cols(); ++i) {
            if (n(j, i) > 0) {
                const double arg = d(j, i) * p_tilde(j, i);
                if (!(arg > 0.0)) return kNegInf;
                total += static_cast<double>(n(j, i)) * std::log(arg);
            }
            if (nt(j, i) > 0) {
                if (!(p_tilde(j, i) > 0.0)) return kNegInf;
                total += static_cast<double>(nt(j, i)) * std::log(p_tilde(j, i));
            }
        }
    }
    return total;
}

PosteriorModel::PosteriorModel(ProblemData data, GaussianPriorSpec prior)
    : data_(std::move(data)), prior_(std::move(prior)) {
    if (!(prior_.lambda_d > 0.0) || !(prior_.lambda_p > 0.0)) {
        throw std::invalid_argument("prior scales lambda_d and lambda_p must be positive");
    }
    const Eigen::Index sm = static_cast<Eigen::Index>(designs()) * outcomes();

    Matrix kernel;
    if (!prior_.R_d || !prior_.R_p) {
        kernel = build_prior_correlation(data_.design_coords(), outcomes(), prior_.rho_design,
                                         prior_.rho_outcome, prior_.jitter);
    }
    if (prior_.R_d) check_explicit(*prior_.R_d, sm, "R_d");
    if (prior_.R_p) check_explicit(*prior_.R_p, sm, "R_p");
    prec_d_ = precision_from(prior_.R_d ? *prior_.R_d : kernel, prior_.lambda_d, "R_d");
    prec_p_ = precision_from(prior_.R_p ? *prior_.R_p : kernel, prior_.lambda_p, "R_p");
}

double PosteriorModel::discrepancy_log_density(const Table& d) const {
    const Vector v = flat(d).array() - 1.0;
    return -quad_form(prec_d_, v);
}

double PosteriorModel::simulator_log_density(const Table& p_tilde) const {
    const Vector v = flat(p_tilde).array() - 1.0 / outcomes();
    return -quad_form(prec_p_, v);
}

double PosteriorModel::log_prior(const Table& d, const Table& p_tilde) const {
    if (d.rows() != designs() || d.cols() != outcomes() || p_tilde.rows() != designs() ||
        p_tilde.cols() != outcomes()) {
        throw std::invalid_argument("table shape does not match the model");
    }
    if (!validate_distribution(p_tilde) || !validate_discrepancy(d, p_tilde)) return kNegInf;
    return simulator_log_density(p_tilde) + discrepancy_log_density(d);
}

double PosteriorModel::log_likelihood(const Table& d, const Table& p_tilde) const {
    return simcal::log_likelihood(d, p_tilde, data_);
}

double PosteriorModel::log_posterior(const Table& d, const Table& p_tilde) const {
    const double prior = log_prior(d, p_tilde);
    if (prior == kNegInf) return kNegInf;
    return log_likelihood(d, p_tilde) + prior;
}

double PosteriorModel::log_posterior_pp(const Table& p, const Table& p_tilde) const {
    const auto& n = data_.real_counts();
    const auto& nt = data_.sim_counts();
    double ll = 0.0;
    for (Eigen::Index j = 0; j < p.rows(); ++j) {
        for (Eigen::Index i = 0; i < p.cols(); ++i) {
            if (!(p_tilde(j, i) > 0.0) || p(j, i) < 0.0) return kNegInf;
            if (n(j, i) > 0) {
                if (!(p(j, i) > 0.0)) return kNegInf;
                ll += static_cast<double>(n(j, i)) * std::log(p(j, i));
            }
            if (nt(j, i) > 0) ll += static_cast<double>(nt(j, i)) * std::log(p_tilde(j, i));
        }
    }
    const Table d = p.cwiseQuotient(p_tilde);
    return ll + simulator_log_density(p_tilde) + discrepancy_log_density(d);
}

void PosteriorModel::gradient_pp(const Table& p, const Table& p_tilde, Table& grad_p,
                                 Table& grad_pt) const {
    const auto& n = data_.real_counts();
    const auto& nt = data_.sim_counts();
    const Table d = p.cwiseQuotient(p_tilde);
    const Vector dv = flat(d).array() - 1.0;
    const Vector pv = flat(p_tilde).array() - 1.0 / outcomes();
    const Vector rd = prec_d_ * dv;
    const Vector rp = prec_p_ * pv;

    grad_p.resize(p.rows(), p.cols());
    grad_pt.resize(p.rows(), p.cols());
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < p.rows(); ++j) {
        for (Eigen::Index i = 0; i < p.cols(); ++i, ++k) {
            const double q = p_tilde(j, i);
            grad_p(j, i) = (n(j, i) > 0 ? static_cast<double>(n(j, i)) / p(j, i) : 0.0) - 2.0 * rd(k) / q;
            grad_pt(j, i) = (nt(j, i) > 0 ? static_cast<double>(nt(j, i)) / q : 0.0) - 2.0 * rp(k) +
                            2.0 * rd(k) * p(j, i) / (q * q);
        }
    }
}

void PosteriorModel::hessian_pp(const Table& p, const Table& p_tilde, Matrix& hess) const {
    const Vector pv = flat(p);
    const Vector q = flat(p_tilde);
    const Vector n = data_.real_counts().cast<double>().reshaped<Eigen::RowMajor>();
    const Vector nt = data_.sim_counts().cast<double>().reshaped<Eigen::RowMajor>();
    const Vector r = prec_d_ * (pv.cwiseQuotient(q).array() - 1.0).matrix();
    const Eigen::Index k = pv.size();

    // Jacobian of u = p/q − 1: ∂u/∂p = 1/q, ∂u/∂q = −p/q².
    const Vector jp = q.cwiseInverse();
    const Vector jq = -pv.cwiseQuotient(q.cwiseAbs2());
    hess.resize(2 * k, 2 * k);
    hess.topLeftCorner(k, k) = -2.0 * jp.asDiagonal() * prec_d_ * jp.asDiagonal();
    hess.topRightCorner(k, k) = -2.0 * jp.asDiagonal() * prec_d_ * jq.asDiagonal();
    hess.bottomRightCorner(k, k) = -2.0 * jq.asDiagonal() * prec_d_ * jq.asDiagonal() - 2.0 * prec_p_;
    for (Eigen::Index a = 0; a < k; ++a) {
        if (n(a) > 0.0) hess(a, a) -= n(a) / (pv(a) * pv(a));
        hess(a, k + a) += 2.0 * r(a) / (q(a) * q(a));
        hess(k + a, k + a) -= nt(a) / (q(a) * q(a)) + 4.0 * r(a) * pv(a) / (q(a) * q(a) * q(a));
    }
    hess.bottomLeftCorner(k, k) = hess.topRightCorner(k, k).transpose();
}

double log_prior(const Table& d, const Table& p_tilde, const GaussianPriorSpec& prior,
                 const std::vector<double>& design_coords) {
    const auto s = static_cast<Eigen::Index>(design_coords.size());
    if (d.rows() != s) throw std::invalid_argument("table rows must match design coordinates");
    CountTable zeros = CountTable::Zero(s, d.cols());
    const PosteriorModel model(ProblemData(design_coords, zeros, zeros), prior);
    return model.log_prior(d, p_tilde);
}

}  // namespace simcal
