#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mvmt/autograd.hpp"
#include "mvmt/errors.hpp"
#include "mvmt/gradcheck.hpp"
#include "mvmt/param_store.hpp"
#include "mvmt/rng.hpp"

using namespace mvmt;
namespace ag = mvmt::ag;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

/// Reduce any output to a scalar through a fixed random functional so that
/// permutation/transposition bugs cannot cancel out.
ag::Var random_functional(const ag::Var& out, Rng& rng) {
    Tensor w = random_tensor({out->value.size()}, rng);
    return ag::dot(ag::flatten(out), ag::constant(w));
}

} // namespace

TEST_CASE("affine matches hand-evaluated cases") {
    auto run = [](Tensor w, Tensor b, Tensor x) {
        return ag::affine(ag::constant(std::move(x)), ag::constant(std::move(w)), ag::constant(std::move(b)))->value;
    };
    Tensor identity = Tensor::matrix(2, 2, {1, 0, 0, 1});
    Tensor y = run(identity, Tensor::vector({0, 0}), Tensor::vector({3, 5}));
    CHECK(y[0] == doctest::Approx(3.0));
    CHECK(y[1] == doctest::Approx(5.0));

    y = run(Tensor::matrix(1, 2, {1, 1}), Tensor::vector({-2}), Tensor::vector({3, 5}));
    CHECK(y[0] == doctest::Approx(6.0));

    y = run(Tensor::matrix(2, 2, {0, 0, 0, 0}), Tensor::vector({7, 7}), Tensor::vector({-1.5, 42.0}));
    CHECK(y[0] == doctest::Approx(7.0));
    CHECK(y[1] == doctest::Approx(7.0));

    CHECK_THROWS_AS(run(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}), Tensor::vector({0, 0}), Tensor::vector({1, 2})),
                    Error);
}

TEST_CASE("activations") {
    Tensor r = ag::relu(ag::constant(Tensor::vector({-1, 0, 2})))->value;
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
    CHECK(r[2] == 2.0);
    CHECK(ag::tanh_op(ag::constant(Tensor::vector({0})))->value[0] == 0.0);
    CHECK(ag::sigmoid(ag::constant(Tensor::vector({0})))->value[0] == doctest::Approx(0.5));
}

TEST_CASE("softmax values and stability") {
    Tensor equal = ag::softmax(ag::constant(Tensor::vector({4.2, 4.2, 4.2})))->value;
    for (std::size_t i = 0; i < 3; ++i) CHECK(equal[i] == doctest::Approx(1.0 / 3.0));

    Tensor closed = ag::softmax(ag::constant(Tensor::vector({std::log(1.0), std::log(3.0)})))->value;
    CHECK(closed[0] == doctest::Approx(0.25));
    CHECK(closed[1] == doctest::Approx(0.75));

    Tensor big = ag::softmax(ag::constant(Tensor::vector({1000.0, 0.0})))->value;
    CHECK(big.all_finite());
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] == doctest::Approx(0.0));

    // empty input is unrepresentable: construction itself rejects zero extents
    CHECK_THROWS_AS(Tensor::vector({}), Error);
}

TEST_CASE("softmax sums to one for long random vectors") {
    Rng rng(7);
    for (std::size_t len : {3ul, 100ul, 10000ul}) {
        Tensor scores = random_tensor({len}, rng, -50.0, 50.0);
        Tensor out = ag::softmax(ag::constant(scores))->value;
        double total = 0.0;
        double lowest = 1.0;
        for (double v : out.data()) {
            total += v;
            lowest = std::min(lowest, v);
        }
        CHECK(std::fabs(total - 1.0) < 1e-9);
        CHECK(lowest > 0.0);
    }
}

TEST_CASE("conv1d hand cases") {
    auto run = [](Tensor seq, Tensor ker, Tensor bias) {
        return ag::conv1d_single_channel(ag::constant(std::move(seq)), ag::constant(std::move(ker)),
                                         ag::constant(std::move(bias)))->value;
    };
    Tensor delta = run(Tensor::vector({4, 7, 9}), Tensor::matrix(1, 3, {0, 1, 0}), Tensor::vector({0}));
    CHECK(delta.at(0, 0) == 4.0);
    CHECK(delta.at(0, 1) == 7.0);
    CHECK(delta.at(0, 2) == 9.0);

    Tensor box = run(Tensor::vector({1, 0, 1}), Tensor::matrix(1, 3, {1, 1, 1}), Tensor::vector({0}));
    CHECK(box.at(0, 0) == 1.0);
    CHECK(box.at(0, 1) == 2.0);
    CHECK(box.at(0, 2) == 1.0);

    Tensor biased = run(Tensor::vector({5, -3, 11}), Tensor::matrix(1, 3, {0, 0, 0}), Tensor::vector({5}));
    for (std::size_t t = 0; t < 3; ++t) CHECK(biased.at(0, t) == 5.0);

    CHECK_THROWS_AS(run(Tensor::vector({1, 2}), Tensor::matrix(1, 4, {1, 1, 1, 1}), Tensor::vector({0})), Error);
}

TEST_CASE("conv1d with centered delta kernel reproduces input") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t t_len = 1 + rng.uniform_index(12);
        Tensor seq = random_tensor({t_len}, rng, -3.0, 3.0);
        Tensor out = ag::conv1d_single_channel(ag::constant(seq),
                                               ag::constant(Tensor::matrix(1, 3, {0, 1, 0})),
                                               ag::constant(Tensor::vector({0})))->value;
        for (std::size_t t = 0; t < t_len; ++t) CHECK(out.at(0, t) == seq[t]);
    }
}

TEST_CASE("maxpool values and first-argmax gradient") {
    Tensor pooled = ag::maxpool_over_time(ag::constant(Tensor::matrix(2, 3, {1, 3, 2, 0, 0, 0})))->value;
    CHECK(pooled[0] == 3.0);
    CHECK(pooled[1] == 0.0);

    Tensor single = ag::maxpool_over_time(ag::constant(Tensor::matrix(2, 1, {4, -2})))->value;
    CHECK(single[0] == 4.0);
    CHECK(single[1] == -2.0);

    ag::Var tied = ag::leaf(Tensor::matrix(1, 3, {2, 2, 2}));
    ag::Var out = ag::maxpool_over_time(tied);
    CHECK(out->value[0] == 2.0);
    ag::backward(ag::sum(out));
    CHECK(tied->grad.at(0, 0) == 1.0);
    CHECK(tied->grad.at(0, 1) == 0.0);
    CHECK(tied->grad.at(0, 2) == 0.0);
}

TEST_CASE("gru cell closed-form cases") {
    const std::size_t d = 3;
    ParamStore store;
    for (const char* name : {"wz", "uz", "wr", "ur", "wh", "uh"}) store.add(name, {d, d});
    for (const char* name : {"bz", "br", "bh"}) store.add(name, {d});
    auto params = [&] {
        ag::GruParams p;
        p.w_update = store.bind("wz");
        p.u_update = store.bind("uz");
        p.b_update = store.bind("bz");
        p.w_reset = store.bind("wr");
        p.u_reset = store.bind("ur");
        p.b_reset = store.bind("br");
        p.w_cand = store.bind("wh");
        p.u_cand = store.bind("uh");
        p.b_cand = store.bind("bh");
        return p;
    };

    Tensor zero_h = ag::gru_cell(ag::constant(Tensor::vector({1, -1, 2})), ag::constant(Tensor::zeros({d})),
                                 params())->value;
    for (std::size_t i = 0; i < d; ++i) CHECK(zero_h[i] == doctest::Approx(0.0));

    // zero weights: gates are sigmoid(0) = 0.5 and candidate tanh(0) = 0,
    // so the next state is 0.5 * h_prev
    Tensor h = Tensor::vector({0.4, -0.8, 1.2});
    Tensor half = ag::gru_cell(ag::constant(Tensor::vector({1, -1, 2})), ag::constant(h), params())->value;
    for (std::size_t i = 0; i < d; ++i) CHECK(half[i] == doctest::Approx(0.5 * h[i]));
    store.collect_gradients();
}

TEST_CASE("gru cell gradients match finite differences") {
    const std::size_t d = 3;
    Rng rng(23);
    ParamStore store;
    for (const char* name : {"wz", "uz", "wr", "ur", "wh", "uh"})
        store.add_glorot(name, {d, d}, d, d, rng);
    for (const char* name : {"bz", "br", "bh"}) {
        Tensor& b = store.add(name, {d});
        for (double& v : b.data()) v = rng.uniform(-0.5, 0.5);
    }
    store.add("x", {d});
    store.add("h", {d});
    for (double& v : store.value("x").data()) v = rng.uniform(-1.0, 1.0);
    for (double& v : store.value("h").data()) v = rng.uniform(-1.0, 1.0);
    Tensor weights = random_tensor({d}, rng);

    auto loss = [&](ParamStore& s) {
        ag::GruParams p;
        p.w_update = s.bind("wz");
        p.u_update = s.bind("uz");
        p.b_update = s.bind("bz");
        p.w_reset = s.bind("wr");
        p.u_reset = s.bind("ur");
        p.b_reset = s.bind("br");
        p.w_cand = s.bind("wh");
        p.u_cand = s.bind("uh");
        p.b_cand = s.bind("bh");
        return ag::dot(ag::gru_cell(s.bind("x"), s.bind("h"), p), ag::constant(weights));
    };
    GradCheckReport report = finite_difference_check(loss, store, 1e-4);
    CHECK(report.pass);
    CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("normalize_to_unit_sphere") {
    Tensor n = ag::normalize_to_unit_sphere(ag::constant(Tensor::vector({3, 4})))->value;
    CHECK(n[0] == doctest::Approx(0.6));
    CHECK(n[1] == doctest::Approx(0.8));

    Tensor unit = Tensor::vector({0.0, 1.0});
    Tensor same = ag::normalize_to_unit_sphere(ag::constant(unit))->value;
    CHECK(same[0] == 0.0);
    CHECK(same[1] == 1.0);

    CHECK_THROWS_AS(ag::normalize_to_unit_sphere(ag::constant(Tensor::vector({0, 0}))), Error);
    try {
        ag::normalize_to_unit_sphere(ag::constant(Tensor::vector({0, 0})));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateVector);
    }
}

TEST_CASE("adam zero gradient is a no-op from fresh state") {
    ParamStore store;
    Rng rng(3);
    store.add_glorot("w", {4, 4}, 4, 4, rng);
    Tensor before = store.value("w");
    store.adam_step(0.01);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(store.value("w")[i] == before[i]);
}

TEST_CASE("adam descends against a constant gradient") {
    ParamStore store;
    store.add("theta", {1});
    const double g = 0.37;
    for (int step = 0; step < 50; ++step) {
        store.entry("theta").grad[0] = g;
        store.adam_step(0.01);
    }
    CHECK(store.value("theta")[0] < 0.0); // moved opposite the gradient sign
}

TEST_CASE("first adam step size is about the learning rate") {
    for (double g : {1e-6, 0.5, 1234.0}) {
        ParamStore store;
        store.add("theta", {1});
        store.entry("theta").grad[0] = g;
        store.adam_step(0.01);
        CHECK(std::fabs(store.value("theta")[0]) == doctest::Approx(0.01).epsilon(1e-2));
        CHECK(store.value("theta")[0] < 0.0);
    }
}

TEST_CASE("adam requires collected gradients") {
    ParamStore store;
    store.add("w", {2});
    store.bind("w");
    CHECK_THROWS_AS(store.adam_step(0.1), Error);
}

TEST_CASE("param store keeps gradient and adam slots shaped like their values") {
    ParamStore store;
    Rng rng(1);
    store.add("a", {3, 5});
    store.add_glorot("b", {7}, 7, 7, rng);
    store.for_each([](const std::string&, const ParamStore::Entry& e) {
        CHECK(e.grad.same_shape(e.value));
        CHECK(e.adam_m.same_shape(e.value));
        CHECK(e.adam_v.same_shape(e.value));
    });
    CHECK_THROWS_AS(store.add("a", {3, 5}), Error); // exactly one slot per name
}

TEST_CASE("finite difference check on analytic losses") {
    ParamStore store;
    Rng rng(5);
    store.add("a", {6});
    store.add("b", {3, 4});
    for (double& v : store.value("a").data()) v = rng.uniform(-2.0, 2.0);
    for (double& v : store.value("b").data()) v = rng.uniform(-2.0, 2.0);

    auto sum_loss = [](ParamStore& s) { return ag::add(ag::sum(s.bind("a")), ag::sum(s.bind("b"))); };
    GradCheckReport sum_report = finite_difference_check(sum_loss, store, 1e-6);
    CHECK(sum_report.pass);
    CHECK(sum_report.max_relative_error < 1e-6);

    auto square_loss = [](ParamStore& s) {
        ag::Var a = s.bind("a");
        ag::Var b = ag::flatten(s.bind("b"));
        return ag::add(ag::dot(a, a), ag::dot(b, b));
    };
    GradCheckReport sq_report = finite_difference_check(square_loss, store, 1e-6);
    CHECK(sq_report.pass);

    // analytic gradient of sum of squares is 2*theta
    auto builder = square_loss;
    ag::Var loss = builder(store);
    ag::backward(loss);
    store.collect_gradients();
    for (std::size_t i = 0; i < store.value("a").size(); ++i) {
        CHECK(store.grad("a")[i] == doctest::Approx(2.0 * store.value("a")[i]));
    }
    store.zero_gradients();
}

TEST_CASE("primitive gradients match finite differences across random seeds") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed * 977 + 13);
        const std::size_t n = 2 + rng.uniform_index(3);
        const std::size_t m = 2 + rng.uniform_index(3);
        const std::size_t t_len = 1 + rng.uniform_index(5);
        const std::size_t filters = 1 + rng.uniform_index(3);

        ParamStore store;
        auto add_random = [&](const char* name, std::vector<std::size_t> shape, double lo = -1.0,
                              double hi = 1.0) {
            Tensor& t = store.add(name, std::move(shape));
            for (double& v : t.data()) v = rng.uniform(lo, hi);
        };
        add_random("x", {n});
        add_random("w", {m, n});
        add_random("b", {m});
        add_random("rows", {m, n});
        add_random("rw", {m});
        add_random("seq", {t_len});
        add_random("ker", {filters, 3});
        add_random("kb", {filters});
        add_random("u", {n}, 0.5, 2.0);
        add_random("pos", {n}, 0.1, 3.0);

        // every tensor drawn inside a builder must be identical across repeat
        // calls, so constants come from a salted generator keyed by primitive
        auto fixed = [seed](std::size_t salt, std::vector<std::size_t> shape) {
            Rng r(seed * 1315423911ULL + salt);
            Tensor t(std::move(shape));
            for (double& v : t.data()) v = r.uniform(-1.0, 1.0);
            return ag::constant(t);
        };
        auto reduce = [seed](const ag::Var& v, std::size_t salt) {
            Rng r(seed * 2654435761ULL + salt);
            Tensor w = random_tensor({v->value.size()}, r);
            return ag::dot(ag::flatten(v), ag::constant(w));
        };

        using Builder = std::function<ag::Var(ParamStore&)>;
        std::vector<std::pair<const char*, Builder>> primitives;
        primitives.emplace_back("affine", [&](ParamStore& s) {
            return reduce(ag::affine(s.bind("x"), s.bind("w"), s.bind("b")), 1);
        });
        primitives.emplace_back("matvec", [&](ParamStore& s) {
            return reduce(ag::matvec(s.bind("w"), s.bind("x")), 2);
        });
        primitives.emplace_back("linear_rows", [&](ParamStore& s) {
            return reduce(ag::linear_rows(s.bind("rows"), fixed(3, {2, n}), fixed(4, {2})), 5);
        });
        primitives.emplace_back("linear_rows_params", [&](ParamStore& s) {
            return reduce(ag::linear_rows(fixed(6, {3, n}), s.bind("w"), s.bind("b")), 7);
        });
        primitives.emplace_back("relu", [&](ParamStore& s) { return reduce(ag::relu(s.bind("x")), 8); });
        primitives.emplace_back("tanh", [&](ParamStore& s) { return reduce(ag::tanh_op(s.bind("x")), 9); });
        primitives.emplace_back("sigmoid", [&](ParamStore& s) { return reduce(ag::sigmoid(s.bind("x")), 10); });
        primitives.emplace_back("softmax", [&](ParamStore& s) { return reduce(ag::softmax(s.bind("x")), 11); });
        primitives.emplace_back("conv1d", [&](ParamStore& s) {
            return reduce(ag::conv1d_single_channel(s.bind("seq"), s.bind("ker"), s.bind("kb")), 12);
        });
        primitives.emplace_back("maxpool", [&](ParamStore& s) {
            return reduce(ag::maxpool_over_time(ag::conv1d_single_channel(s.bind("seq"), s.bind("ker"), s.bind("kb"))),
                          13);
        });
        primitives.emplace_back("mul", [&](ParamStore& s) { return reduce(ag::mul(s.bind("x"), s.bind("u")), 14); });
        primitives.emplace_back("sub", [&](ParamStore& s) { return reduce(ag::sub(s.bind("x"), s.bind("u")), 15); });
        primitives.emplace_back("concat", [&](ParamStore& s) {
            return reduce(ag::concat({s.bind("x"), s.bind("u"), s.bind("b")}), 16);
        });
        primitives.emplace_back("dot", [&](ParamStore& s) { return ag::dot(s.bind("x"), s.bind("u")); });
        primitives.emplace_back("log", [&](ParamStore& s) { return reduce(ag::log_op(s.bind("pos")), 17); });
        primitives.emplace_back("weighted_sum_rows", [&](ParamStore& s) {
            return reduce(ag::weighted_sum_rows(ag::softmax(s.bind("rw")), s.bind("rows")), 18);
        });
        primitives.emplace_back("gather_columns", [&](ParamStore& s) {
            return reduce(ag::gather_columns(s.bind("w"), {0, n - 1, 0}), 19);
        });
        primitives.emplace_back("add_row_broadcast", [&](ParamStore& s) {
            return reduce(ag::add_row_broadcast(s.bind("rows"), fixed(20, {n})), 21);
        });
        primitives.emplace_back("normalize", [&](ParamStore& s) {
            return reduce(ag::normalize_to_unit_sphere(s.bind("u")), 22);
        });
        primitives.emplace_back("clamp", [&](ParamStore& s) { return reduce(ag::clamp(s.bind("x"), -0.5, 0.5), 23); });
        primitives.emplace_back("stack_row", [&](ParamStore& s) {
            return reduce(ag::row(ag::stack_rows({s.bind("x"), s.bind("u")}), 0), 24);
        });
        primitives.emplace_back("mean", [&](ParamStore& s) { return ag::mean(s.bind("rows")); });

        for (auto& [name, builder] : primitives) {
            GradCheckReport report = finite_difference_check(builder, store, 1e-4);
            INFO("primitive ", name, " seed ", seed, " err ", report.max_relative_error);
            REQUIRE(report.pass);
        }
    }
}

TEST_CASE("contrastive loss gradients match finite differences") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed + 31);
        const std::size_t batch = 1 + rng.uniform_index(4);
        const std::size_t dim = 2 + rng.uniform_index(3);
        ParamStore store;
        for (std::size_t i = 0; i < batch; ++i) {
            Tensor& f = store.add("f" + std::to_string(i), {dim});
            Tensor& v = store.add("v" + std::to_string(i), {dim});
            for (double& x : f.data()) x = rng.uniform(-1.0, 1.0);
            for (double& x : v.data()) x = rng.uniform(-1.0, 1.0);
        }
        const double temperature = seed % 3 == 0 ? 0.7 : 1.0;
        auto builder = [&](ParamStore& s) {
            std::vector<std::pair<ag::Var, ag::Var>> pairs;
            for (std::size_t i = 0; i < batch; ++i) {
                pairs.emplace_back(ag::normalize_to_unit_sphere(s.bind("f" + std::to_string(i))),
                                   ag::normalize_to_unit_sphere(s.bind("v" + std::to_string(i))));
            }
            return ag::contrastive_loss(pairs, temperature);
        };
        GradCheckReport report = finite_difference_check(builder, store, 1e-4);
        INFO("seed ", seed, " err ", report.max_relative_error);
        REQUIRE(report.pass);
    }
}

TEST_CASE("primitives are deterministic") {
    Rng rng(99);
    Tensor seq = random_tensor({6}, rng);
    Tensor ker = random_tensor({2, 3}, rng);
    Tensor bias = random_tensor({2}, rng);
    Tensor first = ag::maxpool_over_time(
        ag::conv1d_single_channel(ag::constant(seq), ag::constant(ker), ag::constant(bias)))->value;
    Tensor second = ag::maxpool_over_time(
        ag::conv1d_single_channel(ag::constant(seq), ag::constant(ker), ag::constant(bias)))->value;
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(first[i] == second[i]);
}
