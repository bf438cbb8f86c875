#include "sca/dpmix.hpp"

#include <cmath>
#include <stdexcept>

#include "sca/special.hpp"

namespace sca {

MixtureState MixtureState::uniform(std::size_t k, std::size_t dim, double gamma0, double nu,
                                   double eta) {
    MixtureState s;
    s.truncation = k;
    s.dim = dim;
    s.centroids = Tensor2(k, dim, 0.0);
    s.proportions.assign(k, 1.0 / static_cast<double>(k));
    s.concentration = gamma0;
    s.dof = nu;
    s.step_size = eta;
    s.validate();
    return s;
}

void MixtureState::validate() const {
    if (truncation < 1) throw std::invalid_argument("MixtureState: K must be >= 1");
    if (dof < 1.0) throw std::invalid_argument("MixtureState: nu must be >= 1");
    if (!(concentration > 0.0)) throw std::invalid_argument("MixtureState: gamma0 must be > 0");
    if (!(step_size > 0.0 && step_size < 1.0))
        throw std::invalid_argument("MixtureState: eta must be in (0,1)");
    if (proportions.size() != truncation || centroids.rows != truncation || centroids.cols != dim)
        throw std::invalid_argument("MixtureState: inconsistent sizes");
    double s = 0.0;
    for (double p : proportions) {
        if (p < 0.0) throw std::invalid_argument("MixtureState: negative proportion");
        s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("MixtureState: proportions off simplex");
}

double student_t_log_density(std::span<const double> z, std::span<const double> c, double nu) {
    const double d = static_cast<double>(z.size());
    const double r2 = squared_distance(z, c);
    return std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) - 0.5 * d * std::log(nu * M_PI) -
           0.5 * (nu + d) * std::log1p(r2 / nu);
}

std::vector<double> stick_weights(std::size_t k, double gamma0) {
    const double ev = 1.0 / (1.0 + gamma0);
    std::vector<double> w(k);
    double remaining = 1.0;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        w[i] = ev * remaining;
        remaining *= 1.0 - ev;
    }
    w[k - 1] = remaining;  // V_K = 1 closes the stick
    return w;
}

namespace {

// Row-normalized responsibilities from per-component log weights, in log space.
ResponsibilityResult normalize(const Tensor2& log_scores, double prior_offset) {
    const std::size_t m = log_scores.rows;
    const std::size_t k = log_scores.cols;
    ResponsibilityResult out;
    out.resp = Tensor2(m, k);
    out.dirichlet.assign(k, prior_offset);
    for (std::size_t n = 0; n < m; ++n) {
        const double lse = log_sum_exp(log_scores.row(n));
        for (std::size_t j = 0; j < k; ++j) {
            const double r = std::exp(log_scores(n, j) - lse);
            out.resp(n, j) = r;
            out.dirichlet[j] += r;
        }
    }
    return out;
}

Tensor2 log_scores_with(const MixtureState& state, const Tensor2& z_batch,
                        const std::vector<double>& weights) {
    check_shape(z_batch.cols == state.dim, "responsibilities latent dim");
    Tensor2 s(z_batch.rows, state.truncation);
    for (std::size_t n = 0; n < z_batch.rows; ++n)
        for (std::size_t j = 0; j < state.truncation; ++j)
            s(n, j) = std::log(std::max(weights[j], 1e-300)) +
                      student_t_log_density(z_batch.row(n), state.centroids.row(j), state.dof);
    return s;
}

}  // namespace

ResponsibilityResult responsibilities_q(const MixtureState& state, const Tensor2& z_batch) {
    return normalize(log_scores_with(state, z_batch, state.proportions),
                     1.0 / static_cast<double>(state.truncation));
}

ResponsibilityResult responsibilities_p(const MixtureState& state, const Tensor2& z_batch) {
    return normalize(log_scores_with(state, z_batch, stick_weights(state.truncation, state.concentration)),
                     state.concentration);
}

double kl_dirichlet(std::span<const double> xi, std::span<const double> gamma) {
    if (xi.size() != gamma.size()) throw std::invalid_argument("kl_dirichlet: length mismatch");
    double xi0 = 0.0, ga0 = 0.0;
    for (std::size_t i = 0; i < xi.size(); ++i) {
        if (!(xi[i] > 0.0) || !(gamma[i] > 0.0))
            throw std::domain_error("kl_dirichlet: parameters must be positive");
        xi0 += xi[i];
        ga0 += gamma[i];
    }
    double kl = std::lgamma(xi0) - std::lgamma(ga0);
    const double dig0 = digamma(xi0);
    for (std::size_t i = 0; i < xi.size(); ++i)
        kl += std::lgamma(gamma[i]) - std::lgamma(xi[i]) +
              (xi[i] - gamma[i]) * (digamma(xi[i]) - dig0);
    return kl;
}

ClusteringLossResult clustering_loss(const MixtureState& state, const Tensor2& z_batch) {
    if (z_batch.rows < 1) throw std::invalid_argument("clustering_loss: empty minibatch");
    const std::size_t m = z_batch.rows;
    const std::size_t k = state.truncation;
    const std::size_t d = state.dim;

    const ResponsibilityResult q = responsibilities_q(state, z_batch);
    const ResponsibilityResult p = responsibilities_p(state, z_batch);
    const std::vector<double>& xi = q.dirichlet;
    const std::vector<double>& ga = p.dirichlet;

    ClusteringLossResult out;
    out.loss = kl_dirichlet(xi, ga);
    out.xi = xi;
    out.grad_z = Tensor2(m, d);
    out.grad_centroids = Tensor2(k, d);

    // dKL/dxi_j = (xi_j - ga_j)*trigamma(xi_j) - trigamma(xi0)*sum(xi - ga)
    // dKL/dga_j = digamma(ga_j) - digamma(ga0) - digamma(xi_j) + digamma(xi0)
    double xi0 = 0.0, ga0 = 0.0, diff_sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        xi0 += xi[j];
        ga0 += ga[j];
        diff_sum += xi[j] - ga[j];
    }
    const double tri0 = trigamma(xi0);
    const double dig_xi0 = digamma(xi0);
    const double dig_ga0 = digamma(ga0);
    std::vector<double> a(k), b(k);
    for (std::size_t j = 0; j < k; ++j) {
        a[j] = (xi[j] - ga[j]) * trigamma(xi[j]) - tri0 * diff_sum;
        b[j] = digamma(ga[j]) - dig_ga0 - digamma(xi[j]) + dig_xi0;
    }

    const double nu = state.dof;
    for (std::size_t n = 0; n < m; ++n) {
        double abar = 0.0, bbar = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            abar += a[j] * q.resp(n, j);
            bbar += b[j] * p.resp(n, j);
        }
        for (std::size_t j = 0; j < k; ++j) {
            // softmax backward: coefficient on d(log t)/d(...)
            const double u = q.resp(n, j) * (a[j] - abar) + p.resp(n, j) * (b[j] - bbar);
            if (u == 0.0) continue;
            const double r2 = squared_distance(z_batch.row(n), state.centroids.row(j));
            const double scale = u * (nu + static_cast<double>(d)) / (nu + r2);
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = z_batch(n, t) - state.centroids(j, t);
                out.grad_z(n, t) -= scale * diff;
                out.grad_centroids(j, t) += scale * diff;
            }
        }
    }
    return out;
}

void update_proportions(MixtureState& state, std::span<const double> xi) {
    if (xi.size() != state.truncation) throw std::invalid_argument("update_proportions: length");
    double total = 0.0;
    for (double x : xi) {
        if (!(x > 0.0)) throw std::invalid_argument("update_proportions: xi must be positive");
        total += x;
    }
    const double eta = state.step_size;
    double s = 0.0;
    for (std::size_t j = 0; j < state.truncation; ++j) {
        state.proportions[j] = eta * state.proportions[j] + (1.0 - eta) * xi[j] / total;
        s += state.proportions[j];
    }
    for (double& p : state.proportions) p /= s;  // renormalize rounding drift
}

std::size_t assign(const MixtureState& state, std::span<const double> z) {
    std::size_t best = 0;
    double best_score = -INFINITY;
    for (std::size_t j = 0; j < state.truncation; ++j) {
        const double s = std::log(std::max(state.proportions[j], 1e-300)) +
                         student_t_log_density(z, state.centroids.row(j), state.dof);
        if (s > best_score) {
            best_score = s;
            best = j;
        }
    }
    return best;
}

std::size_t effective_k(const MixtureState& state, const Tensor2& z_all) {
    if (z_all.rows == 0) throw std::invalid_argument("effective_k: empty dataset");
    std::vector<char> seen(state.truncation, 0);
    for (std::size_t n = 0; n < z_all.rows; ++n) seen[assign(state, z_all.row(n))] = 1;
    std::size_t count = 0;
    for (char c : seen) count += c;
    return count;
}

}  // namespace sca
