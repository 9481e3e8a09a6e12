#pragma once

#include <functional>
#include <string>
#include <vector>

#include "locgan/params.hpp"
#include "locgan/tensor.hpp"

namespace locgan {

/**
 * Central-difference gradient checking.
 *
 * An op under test is wrapped as a builder that maps leaf tensors to an
 * output tensor. The harness reduces the output with a fixed random weight
 * vector (so every output coordinate influences the scalar), differentiates
 * through the tape, and compares against (L(x+h) - L(x-h)) / 2h per leaf
 * coordinate. The finite-difference reduction is accumulated in double.
 *
 * Error metric: |ad - fd| / max(1, |ad|, |fd|), i.e. relative error with a
 * unit floor so near-zero gradients are compared absolutely.
 */
struct GradCheckResult {
  double max_rel_err = 0.0;
  int64_t coords = 0;
  int64_t failed = 0;  // coords with rel err above the tolerance

  double pass_fraction() const {
    return coords == 0 ? 1.0
                       : 1.0 - static_cast<double>(failed) /
                                   static_cast<double>(coords);
  }
};

using OpBuilder = std::function<Tensor(Tape*, const std::vector<Tensor>&)>;

inline GradCheckResult check_gradients(const OpBuilder& op,
                                       std::vector<Tensor> leaves,
                                       uint64_t seed, double h = 1e-3,
                                       double tol = 1e-3) {
  // forward + backward through the tape
  Tape tape;
  Tensor out = op(&tape, leaves);
  Tensor weights(out.shape());
  Rng wrng(hash_combine(seed, 0x17efULL));
  for (int64_t i = 0; i < weights.numel(); ++i) {
    const double mag = wrng.uniform(0.5, 1.5);
    weights.data()[i] = static_cast<float>(wrng.bernoulli(0.5) ? mag : -mag);
  }
  Tensor loss = sum_all(&tape, mul(&tape, out, weights));
  tape.backward(loss);

  std::vector<std::vector<float>> ad_grads;
  for (const Tensor& leaf : leaves) {
    if (!leaf.requires_grad()) {
      ad_grads.emplace_back();
      continue;
    }
    leaf.ensure_grad();
    ad_grads.emplace_back(leaf.grad(), leaf.grad() + leaf.numel());
  }

  auto eval = [&]() {
    Tensor o = op(nullptr, leaves);
    double acc = 0.0;
    for (int64_t i = 0; i < o.numel(); ++i)
      acc += static_cast<double>(o.data()[i]) * weights.data()[i];
    return acc;
  };

  GradCheckResult result;
  for (size_t li = 0; li < leaves.size(); ++li) {
    if (!leaves[li].requires_grad()) continue;
    Tensor& leaf = leaves[li];
    for (int64_t i = 0; i < leaf.numel(); ++i) {
      const float saved = leaf.data()[i];
      leaf.data()[i] = saved + static_cast<float>(h);
      const double lp = eval();
      leaf.data()[i] = saved - static_cast<float>(h);
      const double lm = eval();
      leaf.data()[i] = saved;
      const double fd = (lp - lm) / (2.0 * h);
      const double ad = ad_grads[li][static_cast<size_t>(i)];
      const double rel =
          std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
      result.max_rel_err = std::max(result.max_rel_err, rel);
      ++result.coords;
      if (rel > tol) ++result.failed;
    }
  }
  return result;
}

/// Named gradient checks over every differentiable op, plus a composite
/// conv -> batch norm -> activation -> fully connected network.
inline std::vector<std::pair<std::string, GradCheckResult>>
standard_gradient_suite(uint64_t seed = 20240915ULL) {
  std::vector<std::pair<std::string, GradCheckResult>> results;
  Rng rng(seed);

  auto leaf = [&rng](std::vector<int> shape) {
    Tensor t(std::move(shape), true);
    fill_uniform(t, rng, -1.0, 1.0);
    return t;
  };

  {
    std::vector<Tensor> leaves{leaf({2, 3, 6, 6}), leaf({4, 3, 3, 3})};
    results.emplace_back(
        "conv2d", check_gradients(
                      [](Tape* t, const std::vector<Tensor>& l) {
                        return conv2d(t, l[0], l[1], 1, 1);
                      },
                      leaves, rng.next_u64()));
  }
  {
    std::vector<Tensor> leaves{leaf({1, 2, 7, 7}), leaf({3, 2, 3, 3}),
                               leaf({3})};
    results.emplace_back(
        "conv2d_bias_stride2",
        check_gradients(
            [](Tape* t, const std::vector<Tensor>& l) {
              return conv2d(t, l[0], l[1], 2, 1, &l[2]);
            },
            leaves, rng.next_u64()));
  }
  {
    std::vector<Tensor> leaves{leaf({3, 5}), leaf({5, 4}), leaf({4})};
    results.emplace_back(
        "fully_connected",
        check_gradients(
            [](Tape* t, const std::vector<Tensor>& l) {
              return fully_connected(t, l[0], l[1], l[2]);
            },
            leaves, rng.next_u64()));
  }
  {
    std::vector<Tensor> leaves{leaf({3, 4, 5, 5}), leaf({4}), leaf({4})};
    Tensor rm({4}), rv = Tensor::ones({4});
    results.emplace_back(
        "batch_norm",
        check_gradients(
            [rm, rv](Tape* t, const std::vector<Tensor>& l) {
              return batch_norm(t, l[0], l[1], l[2], rm, rv, BnMode::kTrain);
            },
            leaves, rng.next_u64()));
  }
  {
    std::vector<Tensor> leaves{leaf({2, 3, 4, 4})};
    results.emplace_back(
        "relu", check_gradients(
                    [](Tape* t, const std::vector<Tensor>& l) {
                      return relu(t, l[0]);
                    },
                    leaves, rng.next_u64()));
  }
  {
    std::vector<Tensor> leaves{leaf({2, 3, 4, 4})};
    results.emplace_back(
        "leaky_relu", check_gradients(
                          [](Tape* t, const std::vector<Tensor>& l) {
                            return leaky_relu(t, l[0], 0.1f);
                          },
                          leaves, rng.next_u64()));
  }
  {
    std::vector<Tensor> leaves{leaf({3, 7, 3, 3})};
    results.emplace_back(
        "sigmoid", check_gradients(
                       [](Tape* t, const std::vector<Tensor>& l) {
                         return sigmoid(t, l[0]);
                       },
                       leaves, rng.next_u64()));
  }
  {
    std::vector<Tensor> leaves{leaf({4, 10})};
    results.emplace_back(
        "softmax", check_gradients(
                       [](Tape* t, const std::vector<Tensor>& l) {
                         return softmax(t, l[0], 1);
                       },
                       leaves, rng.next_u64()));
  }
  {
    std::vector<Tensor> leaves{leaf({2, 3, 4, 4}), leaf({2, 2, 8, 8})};
    results.emplace_back(
        "upsample_concat",
        check_gradients(
            [](Tape* t, const std::vector<Tensor>& l) {
              return upsample_concat(t, l[0], l[1]);
            },
            leaves, rng.next_u64()));
  }
  {
    std::vector<Tensor> leaves{leaf({3, 6}), leaf({3, 6})};
    results.emplace_back(
        "add_mul", check_gradients(
                       [](Tape* t, const std::vector<Tensor>& l) {
                         return mul(t, add(t, l[0], l[1]), l[1]);
                       },
                       leaves, rng.next_u64()));
  }
  {
    std::vector<Tensor> leaves{leaf({2, 5, 4, 4})};
    results.emplace_back(
        "mean_spatial", check_gradients(
                            [](Tape* t, const std::vector<Tensor>& l) {
                              return mean_spatial(t, l[0]);
                            },
                            leaves, rng.next_u64()));
  }
  {
    // probabilities strictly inside (0,1) for the cross-entropy check
    Tensor p({2, 1, 5, 5}, true);
    Tensor g({2, 1, 5, 5});
    Rng prng(rng.next_u64());
    for (int64_t i = 0; i < p.numel(); ++i) {
      p.data()[i] = static_cast<float>(prng.uniform(0.05, 0.95));
      g.data()[i] = prng.bernoulli(0.3) ? 1.0f : 0.0f;
    }
    std::vector<Tensor> leaves{p};
    results.emplace_back(
        "bce", check_gradients(
                   [g](Tape* t, const std::vector<Tensor>& l) {
                     return bce_sum(t, l[0], g);
                   },
                   leaves, rng.next_u64()));
  }
  {
    Tensor logits({3, 8}, true);
    Rng prng(rng.next_u64());
    fill_uniform(logits, prng, -1.0, 1.0);
    Tensor target({3, 8});
    for (int i = 0; i < 3; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 8; ++j) {
        target.at2(i, j) = static_cast<float>(prng.uniform(0.0, 1.0));
        sum += target.at2(i, j);
      }
      for (int j = 0; j < 8; ++j)
        target.at2(i, j) = static_cast<float>(target.at2(i, j) / sum);
    }
    std::vector<Tensor> leaves{logits};
    results.emplace_back(
        "softmax_xent",
        check_gradients(
            [target](Tape* t, const std::vector<Tensor>& l) {
              return softmax_xent(t, l[0], target);
            },
            leaves, rng.next_u64()));
  }
  {
    // composite network: conv -> bn -> relu -> pool -> fc
    std::vector<Tensor> leaves{leaf({2, 2, 6, 6}), leaf({4, 2, 3, 3}),
                               leaf({4}),          leaf({4}),
                               leaf({4, 3}),       leaf({3})};
    Tensor rm({4}), rv = Tensor::ones({4});
    results.emplace_back(
        "composite_network",
        check_gradients(
            [rm, rv](Tape* t, const std::vector<Tensor>& l) {
              Tensor h = conv2d(t, l[0], l[1], 1, 1);
              h = batch_norm(t, h, l[2], l[3], rm, rv, BnMode::kTrain);
              h = relu(t, h);
              h = mean_spatial(t, h);
              return fully_connected(t, h, l[4], l[5]);
            },
            leaves, rng.next_u64()));
  }
  return results;
}

}  // namespace locgan
