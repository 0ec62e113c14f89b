#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "dsnet/graph.hpp"
#include "dsnet/layers.hpp"
#include "dsnet/rng.hpp"

using namespace dsnet;

namespace {

void fill_uniform(Tensor& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
}

// Projection loss sum_i w_i * out_i, accumulated in double.
double projected_loss(const Tensor& out, const std::vector<float>& w) {
  double s = 0.0;
  for (int64_t i = 0; i < out.numel(); ++i) s += static_cast<double>(w[static_cast<size_t>(i)]) * out[i];
  return s;
}

struct GradCheck {
  double worst = 0.0;
  int checked = 0;
};

// Central-difference check of d(loss)/d(param) for a sample of elements of
// every trainable tensor, plus the input gradient.
GradCheck grad_check(Network& net, Tensor input, double h, Rng& rng,
                     int max_elems_per_tensor = 24) {
  const Tensor& out0 = net.forward(input, true);
  std::vector<float> w(static_cast<size_t>(out0.numel()));
  for (auto& v : w) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  Tensor gout(out0.dims());
  for (int64_t i = 0; i < gout.numel(); ++i) gout[i] = w[static_cast<size_t>(i)];
  net.zero_param_grads();
  net.backward(gout);

  GradCheck res;
  auto check_tensor = [&](Tensor& value, const Tensor& grad, const std::string&) {
    const int64_t n = value.numel();
    std::vector<int64_t> idx;
    if (n <= max_elems_per_tensor) {
      for (int64_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (int i = 0; i < max_elems_per_tensor; ++i) {
        idx.push_back(static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(n)));
      }
    }
    double num_norm = 0.0, diff_norm = 0.0;
    for (int64_t i : idx) {
      const float saved = value[i];
      value[i] = saved + static_cast<float>(h);
      const double fp = projected_loss(net.forward(input, true), w);
      value[i] = saved - static_cast<float>(h);
      const double fm = projected_loss(net.forward(input, true), w);
      value[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = grad[i];
      num_norm += numeric * numeric;
      diff_norm += (numeric - analytic) * (numeric - analytic);
      ++res.checked;
    }
    const double rel = std::sqrt(diff_norm) / std::max(std::sqrt(num_norm), 1e-8);
    res.worst = std::max(res.worst, rel);
  };

  for (Param* p : net.params()) {
    if (!p->trainable) continue;
    check_tensor(p->value, p->grad, p->name);
  }
  // input gradient: perturb the input tensor itself
  {
    Tensor& grad = net.input_node()->grad();
    const int64_t n = input.numel();
    std::vector<int64_t> idx;
    for (int i = 0; i < max_elems_per_tensor; ++i) {
      idx.push_back(static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(n)));
    }
    double num_norm = 0.0, diff_norm = 0.0;
    for (int64_t i : idx) {
      const float saved = input[i];
      input[i] = saved + static_cast<float>(h);
      const double fp = projected_loss(net.forward(input, true), w);
      input[i] = saved - static_cast<float>(h);
      const double fm = projected_loss(net.forward(input, true), w);
      input[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      num_norm += numeric * numeric;
      diff_norm += (numeric - grad[i]) * (numeric - grad[i]);
      ++res.checked;
    }
    res.worst = std::max(res.worst, std::sqrt(diff_norm) / std::max(std::sqrt(num_norm), 1e-8));
  }
  return res;
}

}  // namespace

TEST_CASE("SAME padding geometry") {
  Pad p = same_pad(192, 256, 7, 2);
  CHECK(p.top == 2);
  CHECK(p.bottom == 3);
  CHECK(same_out_dim(192, 2) == 96);
  p = same_pad(96, 128, 3, 2);
  CHECK(p.top == 0);
  CHECK(p.bottom == 1);
  p = same_pad(48, 64, 3, 1);
  CHECK(p.top == 1);
  CHECK(p.bottom == 1);
}

TEST_CASE("conv2d forward matches a naive convolution") {
  Network net;
  Node* x = net.input(3);
  net.conv2d("c", x, 4, 3, 2, true);
  net.set_output(net.nodes().back().get());
  net.init_params(5);
  net.bind(2, 7, 9);

  Tensor in({2, 7, 9, 3});
  Rng rng(6);
  fill_uniform(in, rng);
  const Tensor& out = net.forward(in, false);
  REQUIRE(out.dims() == std::vector<int>{2, 4, 5, 4});

  const Param* w = net.find_param("c.w");
  const Param* b = net.find_param("c.b");
  const Pad pad = same_pad(7, 9, 3, 2);
  for (int n = 0; n < 2; ++n) {
    for (int oy = 0; oy < 4; ++oy) {
      for (int ox = 0; ox < 5; ++ox) {
        for (int f = 0; f < 4; ++f) {
          double acc = b->value[f];
          for (int kh = 0; kh < 3; ++kh) {
            for (int kw = 0; kw < 3; ++kw) {
              const int iy = oy * 2 + kh - pad.top;
              const int ix = ox * 2 + kw - pad.left;
              if (iy < 0 || iy >= 7 || ix < 0 || ix >= 9) continue;
              for (int c = 0; c < 3; ++c) {
                acc += in[((static_cast<int64_t>(n) * 7 + iy) * 9 + ix) * 3 + c] *
                       w->value[((static_cast<int64_t>(kh) * 3 + kw) * 3 + c) * 4 + f];
              }
            }
          }
          const float got = out[((static_cast<int64_t>(n) * 4 + oy) * 5 + ox) * 4 + f];
          CHECK(got == doctest::Approx(acc).epsilon(1e-4));
        }
      }
    }
  }
}

TEST_CASE("conv_transpose2d forward matches a naive scatter") {
  for (const auto [k, s] : {std::pair{2, 2}, std::pair{4, 2}}) {
    Network net;
    Node* x = net.input(3);
    net.conv_transpose2d("t", x, 2, k, s);
    net.set_output(net.nodes().back().get());
    net.init_params(9);
    net.bind(1, 4, 5);

    Tensor in({1, 4, 5, 3});
    Rng rng(10);
    fill_uniform(in, rng);
    const Tensor& out = net.forward(in, false);
    REQUIRE(out.dims() == std::vector<int>{1, 4 * s, 5 * s, 2});

    const Param* w = net.find_param("t.w");
    const int pad = (k - s) / 2;
    Tensor want({1, 4 * s, 5 * s, 2});
    for (int iy = 0; iy < 4; ++iy) {
      for (int ix = 0; ix < 5; ++ix) {
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const int oy = iy * s + kh - pad;
            const int ox = ix * s + kw - pad;
            if (oy < 0 || oy >= 4 * s || ox < 0 || ox >= 5 * s) continue;
            for (int f = 0; f < 2; ++f) {
              double acc = 0.0;
              for (int c = 0; c < 3; ++c) {
                acc += in[((static_cast<int64_t>(iy)) * 5 + ix) * 3 + c] *
                       w->value[((static_cast<int64_t>(kh) * k + kw) * 3 + c) * 2 + f];
              }
              want[((static_cast<int64_t>(oy)) * 5 * s + ox) * 2 + f] +=
                  static_cast<float>(acc);
            }
          }
        }
      }
    }
    for (int64_t i = 0; i < out.numel(); ++i) {
      CHECK(out[i] == doctest::Approx(want[i]).epsilon(1e-4));
    }
  }
}

TEST_CASE("depthwise conv forward matches a naive loop") {
  Network net;
  Node* x = net.input(5);
  net.depthwise_conv2d("d", x, 3);
  net.set_output(net.nodes().back().get());
  net.init_params(12);
  net.bind(2, 6, 7);

  Tensor in({2, 6, 7, 5});
  Rng rng(13);
  fill_uniform(in, rng);
  const Tensor& out = net.forward(in, false);
  const Param* w = net.find_param("d.w");
  for (int n = 0; n < 2; ++n) {
    for (int oy = 0; oy < 6; ++oy) {
      for (int ox = 0; ox < 7; ++ox) {
        for (int c = 0; c < 5; ++c) {
          double acc = 0.0;
          for (int kh = 0; kh < 3; ++kh) {
            for (int kw = 0; kw < 3; ++kw) {
              const int iy = oy + kh - 1;
              const int ix = ox + kw - 1;
              if (iy < 0 || iy >= 6 || ix < 0 || ix >= 7) continue;
              acc += in[((static_cast<int64_t>(n) * 6 + iy) * 7 + ix) * 5 + c] *
                     w->value[(static_cast<int64_t>(kh) * 3 + kw) * 5 + c];
            }
          }
          CHECK(out[((static_cast<int64_t>(n) * 6 + oy) * 7 + ox) * 5 + c] ==
                doctest::Approx(acc).epsilon(1e-4));
        }
      }
    }
  }
}

TEST_CASE("gradients: single layers") {
  Rng rng(101);

  SUBCASE("conv k3 s2 with bias") {
    Network net;
    Node* x = net.input(3);
    net.conv2d("c", x, 4, 3, 2, true);
    net.set_output(net.nodes().back().get());
    net.init_params(1);
    net.bind(2, 6, 8);
    Tensor in({2, 6, 8, 3});
    fill_uniform(in, rng);
    const GradCheck g = grad_check(net, in, 5e-3, rng);
    CHECK(g.worst < 1e-2);
  }

  SUBCASE("conv k1 s1") {
    Network net;
    Node* x = net.input(6);
    net.conv2d("c", x, 5, 1, 1, false);
    net.set_output(net.nodes().back().get());
    net.init_params(2);
    net.bind(2, 4, 4);
    Tensor in({2, 4, 4, 6});
    fill_uniform(in, rng);
    CHECK(grad_check(net, in, 5e-3, rng).worst < 1e-2);
  }

  SUBCASE("conv k7 s2") {
    Network net;
    Node* x = net.input(2);
    net.conv2d("c", x, 3, 7, 2, false);
    net.set_output(net.nodes().back().get());
    net.init_params(3);
    net.bind(1, 10, 12);
    Tensor in({1, 10, 12, 2});
    fill_uniform(in, rng);
    CHECK(grad_check(net, in, 5e-3, rng).worst < 1e-2);
  }

  SUBCASE("depthwise k3") {
    Network net;
    Node* x = net.input(5);
    net.depthwise_conv2d("d", x, 3);
    net.set_output(net.nodes().back().get());
    net.init_params(4);
    net.bind(2, 5, 6);
    Tensor in({2, 5, 6, 5});
    fill_uniform(in, rng);
    CHECK(grad_check(net, in, 5e-3, rng).worst < 1e-2);
  }

  SUBCASE("conv_transpose k2 s2 and k4 s2") {
    for (const auto [k, s] : {std::pair{2, 2}, std::pair{4, 2}}) {
      Network net;
      Node* x = net.input(4);
      net.conv_transpose2d("t", x, 3, k, s);
      net.set_output(net.nodes().back().get());
      net.init_params(5);
      net.bind(2, 4, 5);
      Tensor in({2, 4, 5, 4});
      fill_uniform(in, rng);
      CHECK(grad_check(net, in, 5e-3, rng).worst < 1e-2);
    }
  }

  SUBCASE("batch norm in train mode") {
    Network net;
    Node* x = net.input(4);
    net.batch_norm("bn", x);
    net.set_output(net.nodes().back().get());
    net.init_params(6);
    net.bind(3, 4, 4);
    Tensor in({3, 4, 4, 4});
    fill_uniform(in, rng, -2.0, 2.0);
    CHECK(grad_check(net, in, 5e-3, rng).worst < 2e-2);
  }

  SUBCASE("max pool k3 s2") {
    Network net;
    Node* x = net.input(3);
    net.max_pool("p", x, 3, 2);
    net.set_output(net.nodes().back().get());
    net.bind(1, 6, 8);
    // well separated values so +-h never flips an argmax
    Tensor in({1, 6, 8, 3});
    std::vector<int> perm(static_cast<size_t>(in.numel()));
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    Rng r2(7);
    r2.shuffle(perm.begin(), perm.end());
    for (int64_t i = 0; i < in.numel(); ++i) in[i] = 0.05f * perm[static_cast<size_t>(i)];
    CHECK(grad_check(net, in, 1e-3, rng).worst < 1e-2);
  }

  SUBCASE("avg pool k2 s2") {
    Network net;
    Node* x = net.input(3);
    net.avg_pool("p", x, 2, 2);
    net.set_output(net.nodes().back().get());
    net.bind(2, 4, 6);
    Tensor in({2, 4, 6, 3});
    fill_uniform(in, rng);
    CHECK(grad_check(net, in, 5e-3, rng).worst < 1e-2);
  }

  SUBCASE("sigmoid") {
    Network net;
    Node* x = net.input(2);
    net.sigmoid("s", x);
    net.set_output(net.nodes().back().get());
    net.bind(2, 3, 3);
    Tensor in({2, 3, 3, 2});
    fill_uniform(in, rng, -3.0, 3.0);
    CHECK(grad_check(net, in, 5e-3, rng).worst < 1e-2);
  }
}

TEST_CASE("gradients: fan-out, concat, add and a composite stack") {
  Rng rng(202);

  SUBCASE("two-branch concat with shared input") {
    Network net;
    Node* x = net.input(3);
    Node* a = net.conv2d("a", x, 4, 3, 1, false);
    Node* b = net.conv2d("b", x, 2, 1, 1, false);
    Node* cat = net.concat("cat", {a, b});
    net.set_output(cat);
    net.init_params(7);
    net.bind(2, 5, 5);
    Tensor in({2, 5, 5, 3});
    fill_uniform(in, rng);
    CHECK(grad_check(net, in, 5e-3, rng).worst < 1e-2);
  }

  SUBCASE("elementwise add") {
    Network net;
    Node* x = net.input(3);
    Node* a = net.conv2d("a", x, 4, 1, 1, false);
    Node* b = net.conv2d("b", x, 4, 1, 1, false);
    net.set_output(net.add("sum", {a, b}));
    net.init_params(8);
    net.bind(2, 4, 4);
    Tensor in({2, 4, 4, 3});
    fill_uniform(in, rng);
    CHECK(grad_check(net, in, 5e-3, rng).worst < 1e-2);
  }

  SUBCASE("dense-unit style composite with upsampling head") {
    Network net;
    Node* x = net.input(3);
    Node* c1 = net.conv2d("c1", x, 6, 3, 2, false);
    Node* bn1 = net.batch_norm("bn1", c1);
    Node* r1 = net.relu("r1", bn1);
    Node* pw = net.conv2d("pw", r1, 8, 1, 1, false);
    Node* cat = net.concat("cat", {r1, pw});
    Node* dw = net.depthwise_conv2d("dw", cat, 3);
    Node* pw2 = net.conv2d("pw2", dw, 6, 1, 1, false);
    Node* bn2 = net.batch_norm("bn2", pw2);
    Node* r2 = net.relu("r2", bn2);
    Node* up = net.conv_transpose2d("up", r2, 4, 2, 2);
    net.set_output(net.sigmoid("sig", up));
    net.init_params(9);
    net.bind(2, 6, 8);
    Tensor in({2, 6, 8, 3});
    fill_uniform(in, rng);
    // small step so the probe does not cross relu kinks
    CHECK(grad_check(net, in, 1e-3, rng).worst < 1e-2);
  }
}

TEST_CASE("batch norm uses batch stats in training and running stats in inference") {
  Network net;
  Node* x = net.input(2);
  net.batch_norm("bn", x);
  net.set_output(net.nodes().back().get());
  net.init_params(0);
  net.bind(1, 2, 2);

  Tensor in({1, 2, 2, 2});
  for (int64_t i = 0; i < in.numel(); ++i) in[i] = static_cast<float>(i);

  // fresh running stats: inference normalizes with mean 0, var 1
  const Tensor& eval_out = net.forward(in, false);
  for (int64_t i = 0; i < in.numel(); ++i) {
    CHECK(eval_out[i] == doctest::Approx(in[i]).epsilon(1e-3));
  }

  // training: output is standardized per channel
  const Tensor& train_out = net.forward(in, true);
  double sum = 0.0;
  for (int64_t i = 0; i < train_out.numel(); i += 2) sum += train_out[i];
  CHECK(sum == doctest::Approx(0.0).scale(1).epsilon(1e-4));

  const Param* rm = net.find_param("bn.running_mean");
  CHECK(rm->value[0] > 0.0f);  // nudged toward the batch mean
}

TEST_CASE("forward is deterministic and duplicate batch rows agree") {
  Network net;
  Node* x = net.input(3);
  Node* c = net.conv2d("c", x, 4, 3, 2, true);
  Node* bn = net.batch_norm("bn", c);
  Node* r = net.relu("r", bn);
  net.set_output(net.sigmoid("s", r));
  net.init_params(42);
  net.bind(2, 6, 8);

  Tensor in({2, 6, 8, 3});
  Rng rng(55);
  for (int64_t i = 0; i < in.numel() / 2; ++i) {
    in[i] = static_cast<float>(rng.uniform(-1, 1));
    in[in.numel() / 2 + i] = in[i];  // duplicate image
  }
  Tensor first = net.forward(in, false);
  const Tensor& second = net.forward(in, false);
  for (int64_t i = 0; i < first.numel(); ++i) CHECK(first[i] == second[i]);
  for (int64_t i = 0; i < first.numel() / 2; ++i) {
    CHECK(first[i] == first[first.numel() / 2 + i]);
  }
}

TEST_CASE("network input validation") {
  Network net;
  Node* x = net.input(3);
  net.set_output(net.conv2d("c", x, 2, 3, 1, false));
  net.init_params(0);
  net.bind(1, 8, 8);
  Tensor wrong({1, 8, 10, 3});
  CHECK_THROWS_AS(net.forward(wrong, false), std::invalid_argument);
}
