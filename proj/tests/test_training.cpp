#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <memory>

#include "dsnet/checkpoint.hpp"
#include "dsnet/training.hpp"
#include "fixtures.hpp"

using namespace dsnet;
using dsnet::testing::temp_dir;
namespace fs = std::filesystem;

namespace {

NetworkSpec tiny_spec() {
  NetworkSpec s;
  s.input_height = 32;
  s.input_width = 32;
  s.growth_rate = 4;
  s.block_layout = {1, 1, 1, 1};
  s.decoder_widths = {12, 10, 8, 6, 4};
  return s;
}

}  // namespace

TEST_CASE("he-normal initialization statistics") {
  // K = 8: target std 0.5; +-2 sigma truncation shrinks it by about 0.88
  std::vector<float> w(100000);
  Rng rng(123);
  init_he_normal(w, 8, rng);
  double sum = 0.0, sumsq = 0.0;
  for (float v : w) {
    sum += v;
    sumsq += static_cast<double>(v) * v;
  }
  const double mean = sum / w.size();
  const double stddev = std::sqrt(sumsq / w.size() - mean * mean);
  CHECK(std::fabs(mean) < 0.01);
  CHECK(stddev > 0.43);
  CHECK(stddev < 0.47);

  // K = 2: target std 1.0, all samples inside the truncation bound
  std::vector<float> w2(50000);
  Rng rng2(5);
  init_he_normal(w2, 2, rng2);
  for (float v : w2) {
    CHECK(std::fabs(v) <= 2.0f);
  }

  // determinism per seed
  std::vector<float> a(512), b(512);
  init_he_normal(a, 8, uint64_t{42});
  init_he_normal(b, 8, uint64_t{42});
  CHECK(a == b);

  CHECK_THROWS_AS(init_he_normal(a, 0, uint64_t{1}), std::invalid_argument);
}

TEST_CASE("adadelta: zero gradient is a no-op") {
  Network net;
  Node* x = net.input(2);
  net.set_output(net.conv2d("c", x, 2, 1, 1, true));
  net.init_params(3);
  std::vector<float> before;
  for (Param* p : net.params())
    before.insert(before.end(), p->value.data(), p->value.data() + p->value.numel());

  Adadelta opt(net.params(), 0.95, 1e-7);
  net.zero_param_grads();
  opt.step(1.0);

  std::vector<float> after;
  for (Param* p : net.params())
    after.insert(after.end(), p->value.data(), p->value.data() + p->value.numel());
  CHECK(before == after);
}

TEST_CASE("adadelta: first update magnitude matches the hand-stepped recurrence") {
  Network net;
  Node* x = net.input(1);
  net.set_output(net.conv2d("c", x, 1, 1, 1, false));
  net.init_params(0);
  Param* w = net.find_param("c.w");
  w->value[0] = 0.0f;
  w->ensure_grad();
  w->grad.fill(1.0f);

  const double rho = 0.95, eps = 1e-7, lr = 1.0;
  Adadelta opt(net.params(), rho, eps);
  opt.step(lr);

  const double want = lr * std::sqrt(eps) / std::sqrt((1.0 - rho) + eps);
  CHECK(std::fabs(std::fabs(w->value[0]) - want) < 1e-9);

  // non-finite gradient aborts with the parameter named
  w->grad.fill(std::numeric_limits<float>::quiet_NaN());
  CHECK_THROWS_WITH_AS(opt.step(lr), doctest::Contains("c.w"), TrainingError);
}

TEST_CASE("adadelta: quadratic bowl strictly decreases over 200 steps") {
  Network net;
  Node* x = net.input(1);
  net.set_output(net.conv2d("c", x, 1, 1, 1, false));
  net.init_params(0);
  Param* w = net.find_param("c.w");
  w->value[0] = 5.0f;
  w->ensure_grad();

  Adadelta opt(net.params(), 0.95, 1e-7);
  double prev = 25.0;
  for (int i = 0; i < 200; ++i) {
    w->grad[0] = 2.0f * w->value[0];  // d/dw of w^2
    opt.step(1.0);
    const double f = static_cast<double>(w->value[0]) * w->value[0];
    CHECK(f < prev);
    prev = f;
  }
  CHECK(prev < 25.0);  // the accumulator warm-up makes early steps tiny
}

TEST_CASE("plateau scheduler worked examples") {
  TrainingConfig cfg;
  {
    TrainingState st;
    st.lr = 1.0;
    plateau_update(st, 1.0, cfg);  // first value becomes best
    for (int i = 0; i < 8; ++i) plateau_update(st, 1.0, cfg);
    CHECK(st.lr == doctest::Approx(0.6));
    CHECK(st.reductions == 1);
  }
  {
    TrainingState st;
    st.lr = 1.0;
    plateau_update(st, 1.0, cfg);
    for (int i = 0; i < 16; ++i) plateau_update(st, 1.0, cfg);
    CHECK(st.lr == doctest::Approx(0.36));
    CHECK(st.reductions == 2);
  }
  {
    TrainingState st;
    st.lr = 1.0;
    double v = 10.0;
    for (int i = 0; i < 40; ++i) {
      CHECK(plateau_update(st, v, cfg));
      v -= 0.1;  // strictly improving
    }
    CHECK(st.lr == doctest::Approx(1.0));
    CHECK(st.reductions == 0);
  }
}

TEST_CASE("plateau scheduler equals an independent simulator on random sequences") {
  TrainingConfig cfg;
  Rng rng(77);
  for (int t = 0; t < 50; ++t) {
    const int len = 10 + static_cast<int>(rng.next_below(90));
    std::vector<double> seq(static_cast<size_t>(len));
    for (auto& v : seq) v = rng.uniform(0.0, 2.0);

    TrainingState st;
    st.lr = cfg.initial_lr;
    std::vector<double> got;
    for (double v : seq) {
      plateau_update(st, v, cfg);
      got.push_back(st.lr);
    }

    // reference simulator, written from the rule directly
    double best = std::numeric_limits<double>::infinity();
    int stagnant = 0;
    int cuts = 0;
    std::vector<double> want;
    for (double v : seq) {
      if (v < best - cfg.improvement_tol) {
        best = v;
        stagnant = 0;
      } else {
        stagnant += 1;
        if (stagnant == cfg.plateau_patience) {
          cuts += 1;
          stagnant = 0;
        }
      }
      want.push_back(cfg.initial_lr * std::pow(cfg.plateau_factor, cuts));
    }
    for (size_t i = 0; i < want.size(); ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
    CHECK(st.lr == doctest::Approx(cfg.initial_lr *
                                   std::pow(cfg.plateau_factor, st.reductions)));
  }
}

TEST_CASE("train with max_epochs 0 returns an untrained model and empty history") {
  Model m = build_dsnet(tiny_spec(), 9);
  std::vector<float> before;
  for (Param* p : m.net.params())
    before.insert(before.end(), p->value.data(), p->value.data() + p->value.numel());

  auto samples = dsnet::testing::make_fixture_samples(2, 32, 32, 31);
  TrainingConfig cfg;
  cfg.max_epochs = 0;
  const TrainResult r = train(m, samples, samples, cfg);
  CHECK(r.state.history.empty());

  std::vector<float> after;
  for (Param* p : m.net.params())
    after.insert(after.end(), p->value.data(), p->value.data() + p->value.numel());
  CHECK(before == after);
}

TEST_CASE("training histories are identical across runs with one seed") {
  auto samples = dsnet::testing::make_fixture_samples(4, 32, 32, 51);
  TrainingConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch_size = 2;
  cfg.seed = 7;

  auto run = [&]() {
    Model m = build_dsnet(tiny_spec(), 100);
    return train(m, samples, samples, cfg).state.history;
  };
  const auto h1 = run();
  const auto h2 = run();
  REQUIRE(h1.size() == 3);
  REQUIRE(h2.size() == 3);
  for (size_t i = 0; i < h1.size(); ++i) {
    CHECK(h1[i].train_loss == h2[i].train_loss);
    CHECK(h1[i].val_loss == h2[i].val_loss);
    CHECK(h1[i].val_miou == h2[i].val_miou);
    CHECK(h1[i].lr == h2[i].lr);
  }
}

TEST_CASE("evaluate: oracle predictor scores perfect metrics") {
  auto samples = dsnet::testing::make_fixture_samples(6, 32, 32, 61);
  const int px = 32 * 32;
  // evaluation batches preserve sample order, so a moving cursor maps batch
  // rows back to their ground-truth masks
  auto cursor = std::make_shared<size_t>(0);
  const ForwardFn oracle = [&samples, cursor, px](const Tensor& images) {
    const int n = images.dim(0);
    Tensor probs({n, 32, 32, 1});
    for (int k = 0; k < n; ++k) {
      const BinaryMask& m = *samples[(*cursor + k) % samples.size()].mask;
      for (int i = 0; i < px; ++i) {
        probs[static_cast<int64_t>(k) * px + i] = static_cast<float>(m.v[i]);
      }
    }
    *cursor = (*cursor + n) % samples.size();
    return probs;
  };

  const MetricsReport rep = evaluate_with(oracle, samples, {});
  CHECK(rep.overall.n == 6);
  CHECK(rep.overall.miou == doctest::Approx(1.0));
  CHECK(rep.overall.msn == doctest::Approx(1.0));
  CHECK(rep.overall.msp == doctest::Approx(1.0));
  CHECK(rep.overall.mdice == doctest::Approx(1.0));
  REQUIRE(rep.overall.auc.has_value());
  CHECK(*rep.overall.auc == doctest::Approx(1.0));
  CHECK(rep.empty_predictions == 0);
}

TEST_CASE("evaluate: constant half predictor degenerates to empty predictions") {
  auto samples = dsnet::testing::make_fixture_samples(3, 32, 32, 71);
  const ForwardFn constant = [](const Tensor& images) {
    Tensor probs({images.dim(0), images.dim(1), images.dim(2), 1});
    probs.fill(0.5f);
    return probs;
  };
  const MetricsReport rep = evaluate_with(constant, samples, {});
  CHECK(rep.degenerate_thresholds == 3);
  CHECK(rep.empty_predictions == 3);
  CHECK(rep.overall.msn == doctest::Approx(0.0));
  CHECK(rep.overall.msp == doctest::Approx(1.0));
  CHECK(rep.overall.miou == doctest::Approx(0.0));
}

TEST_CASE("checkpoint round-trip reproduces the evaluation bit for bit") {
  const fs::path dir = temp_dir("ckpt_rt");
  auto samples = dsnet::testing::make_fixture_samples(3, 32, 32, 81);

  Model m = build_dsnet(tiny_spec(), 19);
  TrainingConfig cfg;
  cfg.max_epochs = 2;
  cfg.batch_size = 3;
  cfg.seed = 5;
  train(m, samples, samples, cfg);

  const MetricsReport before = evaluate(m, samples, {});
  save_checkpoint(m.net, dir / "model.dsnc");

  Model fresh = build_dsnet(tiny_spec(), 999);  // different init, then overwritten
  load_checkpoint(fresh.net, dir / "model.dsnc");
  const MetricsReport after = evaluate(fresh, samples, {});

  REQUIRE(before.per_image.size() == after.per_image.size());
  for (size_t i = 0; i < before.per_image.size(); ++i) {
    CHECK(before.per_image[i].iou == after.per_image[i].iou);
    CHECK(before.per_image[i].dice == after.per_image[i].dice);
    CHECK(before.per_image[i].sn == after.per_image[i].sn);
    CHECK(before.per_image[i].sp == after.per_image[i].sp);
  }
  CHECK(before.overall.miou == after.overall.miou);
  REQUIRE(before.overall.auc.has_value());
  REQUIRE(after.overall.auc.has_value());
  CHECK(*before.overall.auc == *after.overall.auc);
  fs::remove_all(dir);
}

TEST_CASE("evaluate refuses samples without ground truth") {
  auto samples = dsnet::testing::make_fixture_samples(2, 32, 32, 15);
  samples[1].mask.reset();
  const ForwardFn constant = [](const Tensor& images) {
    Tensor probs({images.dim(0), images.dim(1), images.dim(2), 1});
    probs.fill(0.5f);
    return probs;
  };
  CHECK_THROWS_AS(evaluate_with(constant, samples, {}), TrainingError);
}

TEST_CASE("an unwritable checkpoint path aborts training cleanly") {
  Model m = build_dsnet(tiny_spec(), 9);
  auto samples = dsnet::testing::make_fixture_samples(2, 32, 32, 16);
  TrainingConfig cfg;
  cfg.max_epochs = 1;
  cfg.batch_size = 2;
  cfg.checkpoint_path = "/nonexistent_dir_for_tests/ckpt.dsnc";
  CHECK_THROWS_AS(train(m, samples, samples, cfg), CheckpointError);
}

TEST_CASE("gradient flow reaches every trainable tensor") {
  Model m = build_dsnet(tiny_spec(), 23);
  auto samples = dsnet::testing::make_fixture_samples(2, 32, 32, 91);

  Tensor images({2, 32, 32, 3});
  Tensor masks({2, 32, 32, 1});
  for (int k = 0; k < 2; ++k) {
    std::copy(samples[k].image.data(), samples[k].image.data() + 32 * 32 * 3,
              images.data() + static_cast<int64_t>(k) * 32 * 32 * 3);
    for (int i = 0; i < 32 * 32; ++i) {
      masks[static_cast<int64_t>(k) * 32 * 32 + i] = samples[k].mask->v[i];
    }
  }

  const Tensor& probs = m.forward(images, true);
  Tensor grad(probs.dims());
  loss_value_and_grad(LossKind::combined,
                      std::span<const float>(masks.data(), (size_t)masks.numel()),
                      std::span<const float>(probs.data(), (size_t)probs.numel()),
                      std::span<float>(grad.data(), (size_t)grad.numel()));
  m.net.zero_param_grads();
  m.net.backward(grad);

  for (Param* p : m.net.params()) {
    if (!p->trainable) continue;
    double norm = 0.0;
    for (int64_t i = 0; i < p->grad.numel(); ++i) {
      norm += static_cast<double>(p->grad[i]) * p->grad[i];
    }
    INFO("parameter ", p->name);
    CHECK(norm > 0.0);
  }
}
