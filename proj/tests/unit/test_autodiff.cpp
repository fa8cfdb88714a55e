#include <doctest.h>

#include <cmath>

#include "dfd/autodiff/checkpoint.hpp"
#include "dfd/autodiff/gradcheck.hpp"
#include "dfd/autodiff/ops.hpp"
#include "dfd/autodiff/optim.hpp"
#include "dfd/error.hpp"
#include "test_util.hpp"

using namespace dfd;
using namespace dfd::ad;
using TD = Tensor<double>;

namespace {

// y = 3x with a backward that claims dy/dx = 6.
TD broken_triple(const TD& x) {
  auto node = std::make_shared<Node<double>>();
  node->shape = x.shape();
  node->value.assign(x.data().begin(), x.data().end());
  for (auto& v : node->value) v *= 3.0;
  node->requires_grad = true;
  node->is_leaf = false;
  node->order = next_order();
  node->op = "broken";
  node->parents = {x.node()};
  node->backward = [](Node<double>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.accumulate(i, 6.0 * self.grad[i]);
  };
  return TD(node);
}

}  // namespace

TEST_CASE("backward basics") {
  SUBCASE("relu passes gradient only where the input is positive") {
    auto x = TD::leaf({4}, {-1.0, 2.0, -3.0, 4.0});
    backward(sum(relu(x)));
    const std::vector<double> g(x.grad().begin(), x.grad().end());
    CHECK(g == std::vector<double>{0.0, 1.0, 0.0, 1.0});
  }
  SUBCASE("sum gives ones and scaling by zero gives zeros") {
    auto x = TD::leaf({2, 3}, {1, 2, 3, 4, 5, 6});
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
    x.zero_grad();
    backward(sum(scale(x, 0.0)));
    for (double g : x.grad()) CHECK(g == 0.0);
  }
  SUBCASE("leaf gradients accumulate across calls") {
    auto x = TD::leaf({3}, {1, -2, 3});
    backward(sum(square(x)));
    const std::vector<double> once(x.grad().begin(), x.grad().end());
    backward(sum(square(x)));
    for (std::size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(2 * once[i]));
  }
  SUBCASE("non-scalar roots are rejected") {
    auto x = TD::leaf({3}, {1, 2, 3});
    CHECK_THROWS_AS(backward(relu(x)), ArgumentError);
  }
  SUBCASE("only leaves are mutable") {
    auto x = TD::leaf({2}, {1, 2});
    auto y = relu(x);
    CHECK_THROWS_AS(y.mutable_data(), StateError);
  }
  SUBCASE("non-finite results are reported by op") {
    auto x = TD::leaf({1}, {1e200});
    CHECK_THROWS_AS(square(x), NumericError);
  }
  SUBCASE("shape mismatches are rejected") {
    CHECK_THROWS_AS(add(TD::leaf({2}, {1, 2}), TD::leaf({3}, {1, 2, 3})), ArgumentError);
    CHECK_THROWS_AS(matmul(TD::leaf({2, 3}, std::vector<double>(6)), TD::leaf({2, 2}, std::vector<double>(4))), ArgumentError);
  }
}

TEST_CASE("op values") {
  SUBCASE("cosine of a vector with itself is 1, with its negation -1") {
    auto x = TD::leaf({2, 3}, {1, 2, 3, -4, 0.5, 2});
    const auto same = cosine_similarity(x, x);
    const auto opposite = cosine_similarity(x, scale(x, -2.0));
    for (double v : same.data()) CHECK(v == doctest::Approx(1.0));
    for (double v : opposite.data()) CHECK(v == doctest::Approx(-1.0));
    auto z = TD::constant({1, 3}, {0, 0, 0});
    CHECK(cosine_similarity(z, TD::constant({1, 3}, {1, 2, 3})).item() == 0.0);
  }
  SUBCASE("softmax rows are distributions and shift invariant") {
    const auto x = dfd::test::random_values(12, 1);
    auto a = softmax(TD::constant({3, 4}, x));
    auto b = softmax(add_scalar(TD::constant({3, 4}, x), 100.0));
    for (int r = 0; r < 3; ++r) {
      double s = 0.0;
      for (int c = 0; c < 4; ++c) {
        CHECK(a.data()[r * 4 + c] > 0.0);
        CHECK(a.data()[r * 4 + c] == doctest::Approx(b.data()[r * 4 + c]).epsilon(1e-12));
        s += a.data()[r * 4 + c];
      }
      CHECK(s == doctest::Approx(1.0));
    }
  }
  SUBCASE("layernorm rows have zero mean and unit variance") {
    auto y = layernorm(TD::constant({2, 8}, dfd::test::random_values(16, 2)));
    for (int r = 0; r < 2; ++r) {
      double m = 0.0, v = 0.0;
      for (int c = 0; c < 8; ++c) m += y.data()[r * 8 + c] / 8;
      for (int c = 0; c < 8; ++c) v += std::pow(y.data()[r * 8 + c] - m, 2) / 8;
      CHECK(std::abs(m) < 1e-12);
      CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
  SUBCASE("log_sigmoid is stable at large magnitudes") {
    auto y = log_sigmoid(TD::constant({3}, {-800.0, 0.0, 800.0}));
    CHECK(y.data()[0] == doctest::Approx(-800.0));
    CHECK(y.data()[1] == doctest::Approx(std::log(0.5)));
    CHECK(y.data()[2] == 0.0);
  }
  SUBCASE("matmul against hand values") {
    auto c = matmul(TD::constant({2, 2}, {1, 2, 3, 4}), TD::constant({2, 2}, {5, 6, 7, 8}));
    CHECK(std::vector<double>(c.data().begin(), c.data().end()) == std::vector<double>{19, 22, 43, 50});
  }
  SUBCASE("split and merge heads are inverse") {
    auto x = TD::constant({2, 3, 8}, dfd::test::random_values(48, 3));
    auto y = merge_heads(split_heads(x, 4), 4);
    CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>(x.data().begin(), x.data().end()));
  }
}

TEST_CASE("grad_check") {
  SUBCASE("square at 3") {
    const auto r = grad_check([](const TD& x) { return sum(square(x)); }, {1}, {3.0});
    CHECK(r.passed);
    CHECK(r.max_rel_error < 1e-8);
  }
  SUBCASE("a wrong backward is caught") {
    const auto r = grad_check([](const TD& x) { return sum(broken_triple(x)); }, {3}, {0.5, -1.0, 2.0});
    CHECK_FALSE(r.passed);
    CHECK(r.max_rel_error == doctest::Approx(0.5));
  }
  SUBCASE("several leaves with coordinate sampling") {
    auto a = TD::leaf({4, 5}, dfd::test::random_values(20, 4));
    auto b = TD::leaf({5, 3}, dfd::test::random_values(15, 5));
    const auto full = grad_check([&] { return sum(gelu(matmul(a, b))); }, {a, b});
    CHECK(full.passed);
    CHECK(full.coordinates == 35);
    const auto sampled = grad_check([&] { return sum(gelu(matmul(a, b))); }, {a, b}, 1e-4, 1e-4, 4);
    CHECK(sampled.passed);
    CHECK(sampled.coordinates == 8);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters in place") {
    Parameter<double> p("p", {3}, {1, 2, 3});
    p.value.zero_grad();
    std::vector<Parameter<double>*> ps{&p};
    adam_step<double>(ps, {0.1});
    CHECK(std::vector<double>(p.value.data().begin(), p.value.data().end()) == std::vector<double>{1, 2, 3});
  }
  SUBCASE("first step moves each coordinate by lr against the gradient sign") {
    Parameter<double> p("p", {2}, {1.0, -1.0});
    backward(sum(mul(p.value, TD::constant({2}, {3.0, -0.5}))));
    std::vector<Parameter<double>*> ps{&p};
    adam_step<double>(ps, {0.1});
    CHECK(p.value.data()[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(p.value.data()[1] == doctest::Approx(-0.9).epsilon(1e-6));
    CHECK_FALSE(p.value.has_grad());
  }
  SUBCASE("minimizes a quadratic") {
    Parameter<double> p("p", {2}, {4.0, -3.0});
    std::vector<Parameter<double>*> ps{&p};
    for (int i = 0; i < 500; ++i) {
      backward(sum(square(add_scalar(p.value, -1.0))));
      adam_step<double>(ps, {0.05});
    }
    for (double v : p.value.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-2));
  }
  SUBCASE("a missing gradient is a state error") {
    Parameter<double> p("p", {1}, {1.0});
    std::vector<Parameter<double>*> ps{&p};
    CHECK_THROWS_AS(adam_step<double>(ps, {}), StateError);
  }
}

TEST_CASE("DFDW checkpoints") {
  const std::vector<NamedArray> arrays{{"w", {2, 3}, {1, 2, 3, 4, 5, -6.5f}}, {"b", {}, {0.25f}}, {"empty", {0}, {}}};
  const std::string bytes = encode_checkpoint(arrays);
  CHECK(bytes.substr(0, 4) == "DFDW");
  CHECK(static_cast<int>(bytes[4]) == 1);
  // header + 3 records (name len, name, rank, dims, values)
  CHECK(bytes.size() == 5 + (4 + 1 + 4 + 8 + 24) + (4 + 1 + 4 + 0 + 4) + (4 + 5 + 4 + 4 + 0));
  const auto back = decode_checkpoint(bytes);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].name == arrays[i].name);
    CHECK(back[i].dims == arrays[i].dims);
    CHECK(back[i].values == arrays[i].values);
  }
  dfd::test::TempDir dir;
  write_checkpoint(dir / "w.dfdw", arrays);
  CHECK(dfd::test::read_bytes(dir / "w.dfdw") == bytes);
  CHECK(read_checkpoint(dir / "w.dfdw").size() == 3);
  CHECK_THROWS_AS(decode_checkpoint("XXXX\x01"), DecodeError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 2)), DecodeError);
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.dfdw"), NotFoundError);
  CHECK_THROWS_AS(encode_checkpoint({{"bad", {2}, {1.0f}}}), ArgumentError);
}
