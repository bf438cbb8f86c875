#include <doctest.h>

#include <cmath>
#include <random>

#include "sca/dpmix.hpp"
#include "sca/special.hpp"
#include "test_util.hpp"

using namespace sca;

TEST_CASE("digamma and trigamma sanity") {
    constexpr double euler = 0.57721566490153286;
    CHECK(digamma(1.0) == doctest::Approx(-euler).epsilon(1e-12));
    CHECK(digamma(2.0) == doctest::Approx(1.0 - euler).epsilon(1e-12));
    CHECK(trigamma(1.0) == doctest::Approx(M_PI * M_PI / 6.0).epsilon(1e-12));
    CHECK(trigamma(0.5) == doctest::Approx(M_PI * M_PI / 2.0).epsilon(1e-10));
}

TEST_CASE("student-t log density, cauchy special cases") {
    std::vector<double> z{0.0}, c{0.0};
    CHECK(student_t_log_density(z, c, 1.0) == doctest::Approx(std::log(1.0 / M_PI)).epsilon(1e-12));
    z[0] = 1.0;
    CHECK(student_t_log_density(z, c, 1.0) ==
          doctest::Approx(std::log(1.0 / (2.0 * M_PI))).epsilon(1e-12));
}

TEST_CASE("2-d student-t density integrates to one on a grid") {
    // quadrature oracle over [-40, 40]^2; nu = 3 tails decay fast enough
    const double nu = 3.0;
    std::vector<double> c{0.37, -0.81};
    const double lim = 40.0;
    const int steps = 1600;
    const double h = 2.0 * lim / steps;
    double integral = 0.0;
    for (int i = 0; i < steps; ++i) {
        const double x = -lim + (i + 0.5) * h;
        for (int j = 0; j < steps; ++j) {
            const double y = -lim + (j + 0.5) * h;
            std::vector<double> z{x, y};
            integral += std::exp(student_t_log_density(z, c, nu)) * h * h;
        }
    }
    CHECK(std::abs(integral - 1.0) < 1e-3);
}

TEST_CASE("stick weights: gamma0 = 1 halves the stick and sums to one") {
    const std::vector<double> w = stick_weights(5, 1.0);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.25));
    CHECK(w[2] == doctest::Approx(0.125));
    CHECK(w[3] == doctest::Approx(0.0625));
    CHECK(w[4] == doctest::Approx(0.0625));  // remainder closes the stick
    double s = 0.0;
    for (double v : w) s += v;
    CHECK(s == 1.0);
}

TEST_CASE("responsibilities with K = 1") {
    MixtureState st = MixtureState::uniform(1, 2, 1.0);
    Tensor2 z(4, 2);
    z.data = {1, 2, -1, 0, 3, 3, 0, 0};
    const auto q = responsibilities_q(st, z);
    const auto p = responsibilities_p(st, z);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(q.resp(i, 0) == 1.0);
        CHECK(p.resp(i, 0) == 1.0);
    }
    CHECK(q.dirichlet[0] == doctest::Approx(1.0 + 4.0));  // 1/K + M
    CHECK(p.dirichlet[0] == doctest::Approx(1.0 + 4.0));  // gamma0 + M
}

TEST_CASE("equidistant centroids: q follows the proportions") {
    MixtureState st = MixtureState::uniform(2, 1, 1.0);
    st.centroids(0, 0) = 1.0;
    st.centroids(1, 0) = -1.0;
    Tensor2 z(1, 1, 0.0);

    auto q = responsibilities_q(st, z);
    CHECK(q.resp(0, 0) == doctest::Approx(0.5));
    CHECK(q.resp(0, 1) == doctest::Approx(0.5));

    st.proportions = {0.9, 0.1};
    q = responsibilities_q(st, z);
    CHECK(q.resp(0, 0) == doctest::Approx(0.9));
    CHECK(q.resp(0, 1) == doctest::Approx(0.1));
}

TEST_CASE("equidistant centroids: p follows the stick weights") {
    MixtureState st = MixtureState::uniform(3, 1, 1.0);
    st.centroids(0, 0) = 1.0;
    st.centroids(1, 0) = -1.0;
    st.centroids(2, 0) = 1.0;
    Tensor2 z(1, 1, 0.0);
    const auto p = responsibilities_p(st, z);
    // stick weights (0.5, 0.25, 0.25) against equal densities
    CHECK(p.resp(0, 0) == doctest::Approx(0.5));
    CHECK(p.resp(0, 1) == doctest::Approx(0.25));
    CHECK(p.resp(0, 2) == doctest::Approx(0.25));
}

TEST_CASE("kl_dirichlet basics") {
    std::vector<double> a{1.7, 2.2, 0.4};
    CHECK(kl_dirichlet(a, a) == 0.0);

    std::vector<double> xi{2.0, 2.0}, ga{1.0, 1.0};
    // frozen from a 1e6-sample Monte Carlo oracle (see acceptance suite)
    CHECK(kl_dirichlet(xi, ga) == doctest::Approx(0.125).epsilon(0.01));

    std::mt19937_64 eng(404);
    std::uniform_real_distribution<double> u(0.5, 20.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> p(4), q(4);
        for (int i = 0; i < 4; ++i) {
            p[i] = u(eng);
            q[i] = u(eng);
        }
        CHECK(kl_dirichlet(p, q) >= -1e-12);
    }
    CHECK_THROWS_AS(kl_dirichlet(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 1.0}),
                    std::domain_error);
}

TEST_CASE("clustering loss is zero with zero gradient in a symmetric setup") {
    // K=1 forces q = p rows; xi and gamma still differ by their offsets,
    // so build the exactly-matching case directly on the KL instead.
    std::vector<double> a{3.0, 4.0};
    CHECK(kl_dirichlet(a, a) == 0.0);

    // symmetric two-component state: gamma0 = 1/K aligns the Dirichlet
    // offsets, and proportions equal to the stick weights make q = p rows
    MixtureState st = MixtureState::uniform(2, 1, 0.5);
    st.proportions = stick_weights(2, 0.5);
    st.centroids(0, 0) = 1.0;
    st.centroids(1, 0) = -1.0;
    Tensor2 z(2, 1);
    z.data = {0.4, -0.4};
    const auto r = clustering_loss(st, z);
    CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-12));
    for (double g : r.grad_z.data) CHECK(std::abs(g) < 1e-9);
    for (double g : r.grad_centroids.data) CHECK(std::abs(g) < 1e-9);
}

TEST_CASE("clustering loss gradients match finite differences") {
    Rng rng(21);
    MixtureState st = MixtureState::uniform(4, 3, 2.0);
    for (double& v : st.centroids.data) v = rng.normal();
    st.proportions = {0.4, 0.3, 0.2, 0.1};
    Tensor2 z(5, 3);
    for (double& v : z.data) v = rng.normal() * 2.0;

    const auto r = clustering_loss(st, z);

    for (std::size_t i = 0; i < st.centroids.data.size(); ++i) {
        const double fd = testutil::central_diff(
            [&](double val) {
                MixtureState p = st;
                p.centroids.data[i] = val;
                return clustering_loss(p, z).loss;
            },
            st.centroids.data[i]);
        CHECK(testutil::rel_err(r.grad_centroids.data[i], fd) < 1e-4);
    }
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        const double fd = testutil::central_diff(
            [&](double val) {
                Tensor2 zp = z;
                zp.data[i] = val;
                return clustering_loss(st, zp).loss;
            },
            z.data[i]);
        CHECK(testutil::rel_err(r.grad_z.data[i], fd) < 1e-4);
    }
}

TEST_CASE("update_proportions arithmetic and fixed point") {
    MixtureState st = MixtureState::uniform(2, 1, 1.0);
    st.step_size = 0.9;
    std::vector<double> xi{0.8, 0.2};  // already normalized expectation
    update_proportions(st, xi);
    CHECK(st.proportions[0] == doctest::Approx(0.53));
    CHECK(st.proportions[1] == doctest::Approx(0.47));

    st.proportions = {0.8, 0.2};
    update_proportions(st, xi);
    CHECK(st.proportions[0] == doctest::Approx(0.8));

    st.proportions = {0.5, 0.5};
    for (int i = 0; i < 200; ++i) update_proportions(st, xi);
    CHECK(std::abs(st.proportions[0] - 0.8) < 1e-6);
    double s = 0.0;
    for (double p : st.proportions) s += p;
    CHECK(std::abs(s - 1.0) < 1e-9);
}

TEST_CASE("assign picks the owning centroid and breaks ties low") {
    MixtureState st = MixtureState::uniform(3, 2, 1.0);
    st.centroids(0, 0) = 5.0;
    st.centroids(1, 0) = -5.0;
    st.centroids(2, 1) = 5.0;
    CHECK(assign(st, st.centroids.row(1)) == 1);
    CHECK(assign(st, st.centroids.row(2)) == 2);

    MixtureState one = MixtureState::uniform(1, 2, 1.0);
    CHECK(assign(one, std::vector<double>{9.0, -9.0}) == 0);

    // exact tie between components 0 and 1
    MixtureState tie = MixtureState::uniform(2, 1, 1.0);
    tie.centroids(0, 0) = 1.0;
    tie.centroids(1, 0) = -1.0;
    CHECK(assign(tie, std::vector<double>{0.0}) == 0);
}

TEST_CASE("effective_k counts non-empty components") {
    MixtureState st = MixtureState::uniform(3, 1, 1.0);
    st.centroids(0, 0) = 0.0;
    st.centroids(1, 0) = 10.0;
    st.centroids(2, 0) = 20.0;
    Tensor2 z(4, 1);
    z.data = {0.1, -0.1, 0.0, 0.05};  // all at centroid 0
    CHECK(effective_k(st, z) == 1);

    z.data = {0.1, 10.2, 0.0, 19.9};
    CHECK(effective_k(st, z) == 3);

    MixtureState one = MixtureState::uniform(1, 1, 1.0);
    CHECK(effective_k(one, z) == 1);
}

TEST_CASE("simplex invariants hold under fuzzing") {
    Rng rng(99);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t k = 1 + rng.integer(8);
        const std::size_t d = 1 + rng.integer(4);
        MixtureState st = MixtureState::uniform(k, d, 0.5 + 4.0 * rng.uniform());
        for (double& v : st.centroids.data) v = rng.normal() * 3.0;
        Tensor2 z(1 + rng.integer(6), d);
        for (double& v : z.data) v = rng.normal() * 3.0;

        const auto q = responsibilities_q(st, z);
        const auto p = responsibilities_p(st, z);
        for (std::size_t i = 0; i < z.rows; ++i) {
            double sq = 0.0, sp = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                CHECK(q.resp(i, j) >= 0.0);
                CHECK(p.resp(i, j) >= 0.0);
                sq += q.resp(i, j);
                sp += p.resp(i, j);
            }
            CHECK(std::abs(sq - 1.0) < 1e-9);
            CHECK(std::abs(sp - 1.0) < 1e-9);
        }
        update_proportions(st, q.dirichlet);
        double s = 0.0;
        for (double v : st.proportions) s += v;
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
}

TEST_CASE("assign is invariant to a constant shift of all log densities") {
    // equivalent formulation: scaling all proportions equally cannot change
    // the argmax
    Rng rng(7);
    MixtureState st = MixtureState::uniform(5, 3, 2.0);
    for (double& v : st.centroids.data) v = rng.normal();
    std::vector<double> z{0.3, -0.7, 1.1};
    const std::size_t before = assign(st, z);
    // st.proportions scaled uniformly stays on the simplex only trivially;
    // instead verify against direct argmax of q
    const auto q = responsibilities_q(st, [&] {
        Tensor2 zz(1, 3);
        zz.data = z;
        return zz;
    }());
    std::size_t arg = 0;
    for (std::size_t j = 1; j < 5; ++j)
        if (q.resp(0, j) > q.resp(0, arg)) arg = j;
    CHECK(before == arg);
}
