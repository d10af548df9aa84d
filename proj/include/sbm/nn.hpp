#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sbm::nn {

enum class Activation { ReLU, Linear };

// Dense layer: weights[o][i], one bias per output neuron, activation
// applied to the whole layer's output.
struct Layer {
  std::vector<std::vector<double>> weights;
  std::vector<double> biases;
  Activation activation = Activation::Linear;
};

struct Network {
  std::size_t input_dim = 0;
  std::vector<std::string> labels;  // names of the final layer's outputs
  std::vector<Layer> layers;
};

// Weight file format: {"input_dim": n, "labels": [...], "layers":
// [{"weights": [[...]...], "biases": [...], "activation": "relu"|"linear"}]}.
// Shape mismatches, unknown activations and non-finite numbers are
// rejected (FormatError).
Network load_network(const std::string& path);
Network parse_network(const nlohmann::json& j);

// Post-activation output of every layer, input excluded; forward() is the
// last entry.  Throws on input dimension mismatch or non-finite input.
std::vector<std::vector<double>> forward_layers(const Network& net,
                                                const std::vector<double>& x);
std::vector<double> forward(const Network& net, const std::vector<double>& x);

// Highest-scoring label whose name is not excluded; ties resolved toward
// the earlier declaration.  Throws when everything is excluded.
std::string rank_labels(const std::vector<double>& scores,
                        const std::vector<std::string>& labels,
                        const std::set<std::string>& excluded = {});

// Numerically stable softmax over the scores, paired with the labels in
// declaration order.
std::vector<std::pair<std::string, double>> to_distribution(
    const std::vector<double>& scores, const std::vector<std::string>& labels);

}  // namespace sbm::nn
