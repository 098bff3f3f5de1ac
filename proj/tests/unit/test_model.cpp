#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "groupface/model.hpp"
#include "groupface/objectives.hpp"
#include "oracles.hpp"

using namespace groupface;

namespace {

ModelConfig small_config(std::size_t k = 4) {
  ModelConfig cfg;
  cfg.input_dim = 6;
  cfg.shared_dim = 10;
  cfg.embed_dim = 5;
  cfg.num_groups = k;
  cfg.num_identities = 7;
  cfg.gdn_hidden_dim = 6;
  cfg.backbone_layers = {8};
  return cfg;
}

Tensor random_input(oracle::Gen& gen, std::size_t n, std::size_t d) { return Tensor({n, d}, gen.normals(n * d)); }

double max_abs_grad(const Tensor& t) {
  double m = 0.0;
  for (double v : t.grad()) m = std::max(m, std::abs(v));
  return m;
}

Tensor param(const GroupFaceModel& model, const std::string& name) {
  for (const auto& p : model.named_parameters())
    if (p.name == name) return p.tensor;
  FAIL("no parameter " << name);
  return {};
}

}  // namespace

TEST_CASE("config validation") {
  auto cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.num_groups = 1;
  CHECK_THROWS(cfg.validate());
  cfg = small_config();
  cfg.num_identities = 1;
  CHECK_THROWS(cfg.validate());
  cfg = small_config();
  cfg.embed_dim = 0;
  CHECK_THROWS(cfg.validate());
  cfg = small_config();
  CHECK(cfg.final_dim() == 5);
  cfg.fusion_mode = FusionMode::concatenate;
  CHECK(cfg.final_dim() == 10);
  CHECK(parse_ensemble_mode("hard") == EnsembleMode::hard);
  CHECK_THROWS(parse_fusion_mode("sum"));
}

TEST_CASE("model structure") {
  GroupFaceModel model(small_config(), 1);
  CHECK(model.group_heads().size() == 4);
  CHECK(model.classifier().rows() == 7);
  CHECK(model.classifier().cols() == 5);
  // The GDN reads v_x (embed_dim wide), not the shared feature.
  CHECK(param(model, "gdn.fc1.weight").shape() == Shape{5, 6});
  CHECK(param(model, "gdn.out.weight").shape() == Shape{6, 4});
  CHECK(param(model, "group_head.3.weight").shape() == Shape{10, 5});
  std::size_t count = 0;
  for (const auto& p : model.parameters()) count += p.size();
  CHECK(count == model.parameter_count());
  CHECK(model.flops_per_sample() > 0);
}

TEST_CASE("forward shapes and normalization") {
  GroupFaceModel model(small_config(4), 2);
  oracle::Gen gen(3);
  Graph g;
  const auto out = model.forward(g, random_input(gen, 3, 6), Mode::train);
  CHECK(out.group_probs.shape() == Shape{3, 4});
  CHECK(out.group_reps.size() == 4);
  CHECK(out.gdn_intermediate.shape() == Shape{3, 6});
  CHECK(out.final_rep.shape() == Shape{3, 5});
  CHECK(out.logits.shape() == Shape{3, 7});
  for (std::size_t r = 0; r < 3; ++r) {
    double total = 0;
    for (std::size_t k = 0; k < 4; ++k) total += out.group_probs.at(r, k);
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
  for (std::size_t i = 0; i < out.final_rep.size(); ++i)
    CHECK(out.final_rep[i] == out.instance[i] + out.group_rep[i]);

  CHECK_THROWS(model.forward(g, random_input(gen, 3, 5), Mode::eval));
  CHECK_THROWS(model.forward(g, random_input(gen, 1, 6), Mode::train));
}

TEST_CASE("zero group heads leave v_bar equal to v_x") {
  GroupFaceModel model(small_config(), 4);
  model.zero_group_heads();
  oracle::Gen gen(5);
  Graph g;
  const auto out = model.forward(g, random_input(gen, 6, 6), Mode::train);
  for (double v : out.group_rep.data()) CHECK(v == 0.0);
  for (std::size_t i = 0; i < out.final_rep.size(); ++i) CHECK(out.final_rep[i] == out.instance[i]);
}

TEST_CASE("zeroed GroupFace logits equal the instance-only model's") {
  oracle::Gen gen(6);
  for (int trial = 0; trial < 5; ++trial) {
    GroupFaceModel model(small_config(), 10 + trial);
    model.zero_group_heads();
    GroupFaceModel baseline = model.instance_only();
    const Tensor x = random_input(gen, 5, 6);
    for (Mode mode : {Mode::train, Mode::eval}) {
      Graph g1, g2;
      const auto a = model.forward(g1, x, mode);
      const auto b = baseline.forward(g2, x, mode);
      for (std::size_t i = 0; i < a.logits.size(); ++i) CHECK(a.logits[i] == b.logits[i]);
    }
  }
}

TEST_CASE("duplicated input rows give identical eval outputs") {
  GroupFaceModel model(small_config(), 7);
  oracle::Gen gen(8);
  auto row = gen.normals(6);
  std::vector<double> values(row);
  values.insert(values.end(), row.begin(), row.end());
  Graph g;
  const auto out = model.forward(g, Tensor({2, 6}, values), Mode::eval);
  for (std::size_t c = 0; c < out.final_rep.cols(); ++c) CHECK(out.final_rep.at(0, c) == out.final_rep.at(1, c));
  for (std::size_t c = 0; c < 4; ++c) CHECK(out.group_probs.at(0, c) == out.group_probs.at(1, c));
}

TEST_CASE("soft_ensemble examples") {
  Graph g;
  const Tensor r0 = Tensor::matrix({{2, 0}}), r1 = Tensor::matrix({{0, 2}});
  auto v = soft_ensemble(g, Tensor::matrix({{1, 0}}), {r0, r1});
  CHECK(v[0] == 2.0);
  CHECK(v[1] == 0.0);
  v = soft_ensemble(g, Tensor::matrix({{0.5, 0.5}}), {r0, r1});
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 1.0);
  const Tensor r = Tensor::matrix({{0.25, -3}});
  v = soft_ensemble(g, Tensor::matrix({{0.3, 0.7}}), {r, r});
  CHECK(v[0] == doctest::Approx(0.25));
  CHECK(v[1] == doctest::Approx(-3.0));
  CHECK_THROWS(soft_ensemble(g, Tensor::matrix({{0.3, 0.3, 0.4}}), {r0, r1}));
}

TEST_CASE("soft_ensemble stays inside the per-component envelope") {
  oracle::Gen gen(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = gen.index(2, 8), e = gen.index(1, 6);
    std::vector<Tensor> reps;
    for (std::size_t j = 0; j < k; ++j) reps.push_back(Tensor({1, e}, gen.normals(e)));
    Graph g;
    const auto v = soft_ensemble(g, Tensor({1, k}, gen.simplex(k)), reps);
    for (std::size_t c = 0; c < e; ++c) {
      double lo = reps[0][c], hi = reps[0][c];
      for (const auto& rep : reps) lo = std::min(lo, rep[c]), hi = std::max(hi, rep[c]);
      CHECK(v[c] >= lo - 1e-12);
      CHECK(v[c] <= hi + 1e-12);
    }
  }
}

TEST_CASE("hard_ensemble examples") {
  Graph g;
  const Tensor r0 = Tensor::matrix({{1, 2}}), r1 = Tensor::matrix({{3, 4}});
  auto v = hard_ensemble(g, Tensor::matrix({{0.2, 0.8}}), {r0, r1});
  CHECK(v[0] == 3.0);
  v = hard_ensemble(g, Tensor::matrix({{0.5, 0.5}}), {r0, r1});
  CHECK(v[0] == 1.0);
  CHECK_THROWS(hard_ensemble(g, Tensor::matrix({{1.0}}), {}));
}

TEST_CASE("hard_ensemble is invariant to positive scaling of the probabilities") {
  oracle::Gen gen(10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = gen.index(2, 6), n = gen.index(1, 4);
    std::vector<Tensor> reps;
    for (std::size_t j = 0; j < k; ++j) reps.push_back(Tensor({n, 3}, gen.normals(n * 3)));
    std::vector<double> probs;
    for (std::size_t r = 0; r < n; ++r) {
      auto p = gen.simplex(k);
      probs.insert(probs.end(), p.begin(), p.end());
    }
    const double c = std::pow(10.0, gen.uniform(-3, 3));
    std::vector<double> scaled(probs);
    for (auto& p : scaled) p *= c;
    Graph g;
    const auto a = hard_ensemble(g, Tensor({n, k}, probs), reps);
    const auto b = hard_ensemble(g, Tensor({n, k}, scaled), reps);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("fuse examples") {
  Graph g;
  const Tensor vx = Tensor::matrix({{1, 2}}), vg = Tensor::matrix({{3, 4}});
  auto v = fuse(g, vx, Tensor({1, 2}), FusionMode::aggregate);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 2.0);
  v = fuse(g, vx, vg, FusionMode::aggregate);
  CHECK(v[0] == 4.0);
  CHECK(v[1] == 6.0);
  v = fuse(g, vx, vg, FusionMode::concatenate);
  CHECK(v.shape() == Shape{1, 4});
  CHECK(v[2] == 3.0);
  CHECK(v[3] == 4.0);
}

TEST_CASE("identity_logits examples") {
  Graph g;
  auto c = identity_logits(g, Tensor::matrix({{2, 0}}), Tensor::matrix({{5, 0}, {0, 1}, {1, 0}}));
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == doctest::Approx(0.0));
  c = identity_logits(g, Tensor::matrix({{1, 1}}), Tensor::matrix({{1, 0}}));
  CHECK(c[0] == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK_THROWS(identity_logits(g, Tensor::matrix({{0, 0}}), Tensor::matrix({{1, 0}})));
  CHECK_THROWS(identity_logits(g, Tensor::matrix({{1, 0}}), Tensor::matrix({{0, 0}})));
}

TEST_CASE("identity logits stay within [-1, 1]") {
  oracle::Gen gen(12);
  for (int trial = 0; trial < 20; ++trial) {
    GroupFaceModel model(small_config(gen.index(2, 6)), 100 + trial);
    Graph g;
    const auto out = model.forward(g, random_input(gen, 4, 6), Mode::train);
    for (double v : out.logits.data()) {
      CHECK(v >= -1.0 - 1e-12);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("backbone gradients arrive through both the instance path and the GDN path") {
  oracle::Gen gen(13);
  const Tensor x = random_input(gen, 8, 6);
  const Labels groups{0, 1, 2, 3, 0, 1, 2, 3};
  const Labels ids{0, 1, 2, 3, 4, 5, 6, 0};

  GroupFaceModel model(small_config(), 14);
  const Tensor backbone = param(model, "backbone.0.fc.weight");

  // Instance path alone: identity loss on the instance-only model.
  GroupFaceModel baseline = model.instance_only();
  for (auto& p : baseline.parameters()) p.zero_grad();
  {
    Graph g;
    const auto out = baseline.forward(g, x, Mode::train);
    g.backward(margin_softmax_loss(g, out.logits, ids, {}));
  }
  CHECK(max_abs_grad(param(baseline, "backbone.0.fc.weight")) > 0.0);
  CHECK(max_abs_grad(param(baseline, "gdn.out.weight")) == 0.0);

  // GDN path alone: self-grouping loss.
  for (auto& p : model.parameters()) p.zero_grad();
  {
    Graph g;
    const auto out = model.forward(g, x, Mode::train);
    g.backward(self_grouping_loss(g, out.gdn_logits, groups));
  }
  CHECK(max_abs_grad(backbone) > 0.0);
  CHECK(max_abs_grad(param(model, "instance_head.weight")) > 0.0);
  CHECK(max_abs_grad(param(model, "group_head.0.weight")) == 0.0);

  // Detached GDN input: the grouping loss stops at the GDN.
  auto cfg = small_config();
  cfg.gdn_input_gradient = false;
  GroupFaceModel detached(cfg, 14);
  for (auto& p : detached.parameters()) p.zero_grad();
  {
    Graph g;
    const auto out = detached.forward(g, x, Mode::train);
    g.backward(self_grouping_loss(g, out.gdn_logits, groups));
  }
  CHECK(max_abs_grad(param(detached, "backbone.0.fc.weight")) == 0.0);
  CHECK(max_abs_grad(param(detached, "gdn.fc1.weight")) > 0.0);
}

TEST_CASE("clone is deep and same seed gives identical parameters") {
  GroupFaceModel a(small_config(), 21);
  GroupFaceModel b(small_config(), 21);
  GroupFaceModel c(small_config(), 22);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pa[i].size(); ++j) {
      CHECK(pa[i][j] == pb[i][j]);
      differs |= pa[i][j] != pc[i][j];
    }
  }
  CHECK(differs);

  GroupFaceModel copy = a.clone();
  copy.parameters().front()[0] += 1.0;
  CHECK(copy.parameters().front()[0] != a.parameters().front()[0]);
}
