#include <catch2/catch_amalgamated.hpp>

#include <lbcnet/lbcnet.hpp>

#include "fd_check.hpp"
#include "fixtures.hpp"

using namespace lbcnet;

namespace {

TrainConfig small_config(LossKind loss, ScaleGradMode mode, std::uint64_t seed) {
    TrainConfig config;
    config.loss = loss;
    config.scale_mode = mode;
    config.hidden = 4;
    config.epochs = 1;
    config.seed = seed;
    config.grid_size = 3;
    config.span = 0.3;
    return config;
}

}  // namespace

TEST_CASE("analytic gradients match central differences", "[gradcheck]") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto inst = fixtures::make_instance(1000 + seed, 10, 3);  // 2 covariates + intercept
        const auto data = fixtures::to_dataset(inst);
        const auto grid = fixtures::make_grid(3);

        for (LossKind loss : {LossKind::lbc, LossKind::bce}) {
            for (ScaleGradMode mode : {ScaleGradMode::full, ScaleGradMode::detached}) {
                const auto config = small_config(loss, mode, seed);
                NetworkParams params = init_params(config.seed, {2, config.hidden});
                params.standardizer = Standardizer::fit(data.raw_covariates());

                const auto res = fdcheck::compare(params, data, grid, config);
                INFO("seed " << seed << " loss " << (loss == LossKind::bce ? "bce" : "lbc")
                             << " mode " << (mode == ScaleGradMode::full ? "full" : "detached")
                             << " worst param " << res.worst_index);
                CHECK(res.max_rel_error < 1e-4);
            }
        }
    }
}

TEST_CASE("scale-gradient modes agree on the value but not the gradient", "[gradcheck]") {
    const auto inst = fixtures::make_instance(77, 14, 3);
    const auto data = fixtures::to_dataset(inst);
    const auto grid = fixtures::make_grid(3);

    auto config_full = small_config(LossKind::lbc, ScaleGradMode::full, 3);
    auto config_detached = small_config(LossKind::lbc, ScaleGradMode::detached, 3);

    NetworkParams base = init_params(3, {2, 4});
    base.standardizer = Standardizer::fit(data.raw_covariates());

    NetworkParams pf = base, pd = base;
    const auto full = loss_and_gradient(pf, data, grid, config_full);
    const auto detached = loss_and_gradient(pd, data, grid, config_detached);

    CHECK(full.value.total == detached.value.total);
    CHECK(full.value.balance == detached.value.balance);
    CHECK((full.grad - detached.grad).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("cross-entropy baseline loss at coin-flip scores", "[gradcheck]") {
    Vector t(6), p = Vector::Constant(6, 0.5);
    t << 1, 0, 0, 1, 1, 0;
    const auto sg = bce_loss_and_score_grad(t, p);
    CHECK_THAT(sg.value.total, Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));

    Vector all_ones = Vector::Ones(6);
    const auto sg2 = bce_loss_and_score_grad(all_ones, p);
    CHECK_THAT(sg2.value.total, Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));
}
