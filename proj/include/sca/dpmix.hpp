#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sca/tensor.hpp"

namespace sca {

// Truncated Dirichlet-Process mixture over the latent space. Centroids are
// trained by gradient on the Dirichlet-KL objective; proportions follow the
// online update.
struct MixtureState {
    std::size_t truncation = 25;          // K
    std::size_t dim = 50;                 // d_z
    Tensor2 centroids;                    // K x d_z
    std::vector<double> proportions;      // pi, K-simplex
    double concentration = 3.0;           // gamma_0
    double dof = 1.0;                     // nu
    double step_size = 0.9;               // eta

    static MixtureState uniform(std::size_t k, std::size_t dim, double gamma0, double nu = 1.0,
                                double eta = 0.9);
    void validate() const;  // throws std::invalid_argument on a broken invariant
};

struct ResponsibilityResult {
    Tensor2 resp;                     // M x K rows on the simplex
    std::vector<double> dirichlet;    // xi or gamma, length K
};

// log multivariate Student-t with identity scale, mean c.
double student_t_log_density(std::span<const double> z, std::span<const double> c, double nu);

// Truncated stick weights from E[V] = 1/(1+gamma0); last weight closes the stick.
std::vector<double> stick_weights(std::size_t k, double gamma0);

ResponsibilityResult responsibilities_q(const MixtureState& state, const Tensor2& z_batch);
ResponsibilityResult responsibilities_p(const MixtureState& state, const Tensor2& z_batch);

double kl_dirichlet(std::span<const double> xi, std::span<const double> gamma);

struct ClusteringLossResult {
    double loss = 0.0;
    Tensor2 grad_z;          // M x d_z
    Tensor2 grad_centroids;  // K x d_z
    std::vector<double> xi;  // minibatch Dirichlet parameters for the pi update
};

ClusteringLossResult clustering_loss(const MixtureState& state, const Tensor2& z_batch);

// pi <- eta*pi + (1-eta)*E[Dir(xi)]
void update_proportions(MixtureState& state, std::span<const double> xi);

std::size_t assign(const MixtureState& state, std::span<const double> z);
std::size_t effective_k(const MixtureState& state, const Tensor2& z_all);

}  // namespace sca
