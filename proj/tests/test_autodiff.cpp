#include <doctest.h>

#include "epg/autodiff/optim.hpp"
#include "gradcheck.hpp"

using namespace epg;
using namespace epg::testing;
using ad::Index;

TEST_CASE("every op passes a central-difference gradient check")
{
    const auto suite = gradcheck_suite(20240611);
    REQUIRE(suite.size() >= 100);
    for (const auto& c : suite) {
        const auto r = gradcheck(c, 99);
        INFO(c.name);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("same padding puts the extra element on the right")
{
    const auto g = ad::conv_geometry(10, 4, 1, ad::Padding::same);
    CHECK(g.out_length == 10);
    CHECK(g.pad_left == 1);
    CHECK(ad::conv_geometry(2560, 16, 2, ad::Padding::same).out_length == 1280);
    CHECK(ad::conv_geometry(7, 3, 2, ad::Padding::valid).out_length == 3);
    CHECK_THROWS_AS(ad::conv_geometry(3, 5, 1, ad::Padding::valid), DimensionError);
}

TEST_CASE("conv1d matches a direct loop oracle")
{
    Rng rng(3);
    const Index b = 2, cin = 3, cout = 2, k = 5, len = 11, s = 2;
    auto x = random_tensor(rng, {b, cin, len});
    auto w = random_tensor(rng, {cout, cin, k});
    auto bias = random_tensor(rng, {cout});
    ad::Tape<double> t;
    const auto y = t.value(ad::conv1d(t, t.constant(x), t.constant(w), t.constant(bias), s, ad::Padding::same));
    const auto geo = ad::conv_geometry(len, k, s, ad::Padding::same);
    REQUIRE(y.shape() == ad::Shape{b, cout, geo.out_length});
    for (Index bi = 0; bi < b; ++bi)
        for (Index o = 0; o < cout; ++o)
            for (Index p = 0; p < geo.out_length; ++p) {
                double acc = bias[o];
                for (Index c = 0; c < cin; ++c)
                    for (Index j = 0; j < k; ++j) {
                        const Index src = p * s + j - geo.pad_left;
                        if (src >= 0 && src < len) acc += w(o, c, j) * x(bi, c, src);
                    }
                CHECK(y(bi, o, p) == doctest::Approx(acc).epsilon(1e-12));
            }
}

TEST_CASE("batchnorm eval mode uses running statistics and train mode updates them")
{
    ad::BatchNormStats<double> stats(1);
    stats.running_mean[0] = 1.0;
    stats.running_var[0] = 4.0;
    ad::Tensor<double> x({2, 1, 2});
    x.data() << 1, 3, 5, 7;
    ad::Tensor<double> g({1}), be({1});
    g[0] = 1;
    ad::Tape<double> t;
    ad::BatchNormOptions opt{0.0, 0.1};
    auto y = t.value(ad::batchnorm(t, t.constant(x), t.constant(g), t.constant(be), stats, ad::Mode::eval, opt));
    CHECK(y[0] == doctest::Approx(0.0));
    CHECK(y[3] == doctest::Approx(3.0));
    ad::batchnorm(t, t.constant(x), t.constant(g), t.constant(be), stats, ad::Mode::train, opt);
    CHECK(stats.running_mean[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 4.0));
    CHECK(stats.running_var[0] == doctest::Approx(0.9 * 4.0 + 0.1 * 5.0));
}

TEST_CASE("dropout is identity in eval mode and deterministic per key")
{
    Rng rng(5);
    auto x = random_tensor(rng, {2, 3, 50});
    ad::Tape<double> t;
    auto v = t.constant(x);
    CHECK(ad::dropout(t, v, 0.5, ad::Mode::eval, {}).id == v.id);
    const auto a = t.value(ad::dropout(t, v, 0.5, ad::Mode::train, {1, 2, 3}));
    const auto b = t.value(ad::dropout(t, v, 0.5, ad::Mode::train, {1, 2, 3}));
    const auto c = t.value(ad::dropout(t, v, 0.5, ad::Mode::train, {1, 2, 4}));
    CHECK(a.data() == b.data());
    CHECK(a.data() != c.data());
    int zeros = 0;
    for (Index i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) ++zeros;
        else CHECK(a[i] == doctest::Approx(2.0 * x[i]));
    }
    CHECK(zeros > 100);
    CHECK(zeros < 200);
}

TEST_CASE("softmax_xent rejects out-of-range labels and backward needs a scalar")
{
    ad::Tape<double> t;
    auto logits = t.variable(ad::Tensor<double>({2, 3}));
    const int bad[] = {0, 3};
    CHECK_THROWS_AS(ad::softmax_xent<double>(t, logits, bad), ValidationError);
    CHECK_THROWS_AS(t.backward(logits), ContractError);
    const int ok[] = {0, 2};
    auto r = ad::softmax_xent<double>(t, logits, ok);
    CHECK(t.value(r.loss)[0] == doctest::Approx(std::log(3.0)));
}

TEST_CASE("a parameter may be recorded only once per tape")
{
    ad::Parameter<double> p("w", ad::Tensor<double>({2}));
    ad::Tape<double> t;
    t.parameter(p);
    CHECK_THROWS_AS(t.parameter(p), ContractError);
}

TEST_CASE("adam minimises a quadratic")
{
    std::vector<ad::Parameter<double>> ps;
    ps.emplace_back("x", ad::Tensor<double>::constant({3}, 5.0));
    ad::AdamState<double> st;
    ad::AdamConfig cfg;
    cfg.lr = 0.1;
    for (int i = 0; i < 500; ++i) {
        ad::Tape<double> t;
        ps[0].zero_grad();
        auto v = t.parameter(ps[0]);
        const std::vector<ad::Var> vs{v};
        t.backward(ad::l2_penalty<double>(t, vs, 1.0));
        ad::adam_step<double>(ps, st, cfg);
    }
    CHECK(ps[0].value.data().cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("gradcheck detects a wrong backward")
{
    GradCase c;
    c.name = "square with halved gradient";
    Rng rng(8);
    c.inputs = {random_tensor(rng, {4})};
    c.build = [](ad::Tape<double>& t, const std::vector<ad::Var>& v) {
        ad::Tensor<double> y = t.value(v[0]);
        y.data() = y.data().array().square();
        const ad::Var x = v[0];
        return t.record(ad::OpKind::weighted_sum, std::move(y), {x}, [x](ad::Tape<double>& tp, int self) {
            tp.grad(x).data() += tp.node(ad::Var{self}).grad.data().cwiseProduct(tp.value(x).data());
        });
    };
    CHECK(gradcheck(c, 1).max_rel_error > 0.1);
}
