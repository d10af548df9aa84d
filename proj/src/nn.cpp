#include "sbm/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sbm/errors.hpp"

namespace sbm::nn {

namespace {

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "linear") return Activation::Linear;
  throw FormatError("unknown activation: " + name);
}

void check_finite(const std::vector<double>& xs, const std::string& what) {
  for (double v : xs) {
    if (!std::isfinite(v)) throw FormatError(what + " contains a non-finite value");
  }
}

}  // namespace

Network parse_network(const nlohmann::json& j) {
  Network net;
  try {
    net.input_dim = j.at("input_dim").get<std::size_t>();
    net.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& layer_json : j.at("layers")) {
      Layer layer;
      layer.weights = layer_json.at("weights").get<std::vector<std::vector<double>>>();
      layer.biases = layer_json.at("biases").get<std::vector<double>>();
      layer.activation = parse_activation(layer_json.at("activation").get<std::string>());
      net.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad network file: ") + e.what());
  }
  if (net.layers.empty()) throw FormatError("network has no layers");
  std::size_t dim = net.input_dim;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const Layer& layer = net.layers[li];
    const std::string where = "layer " + std::to_string(li);
    if (layer.weights.empty()) throw FormatError(where + " has no rows");
    if (layer.biases.size() != layer.weights.size()) {
      throw FormatError(where + ": bias count does not match row count");
    }
    for (const auto& row : layer.weights) {
      if (row.size() != dim) {
        throw FormatError(where + ": row width " + std::to_string(row.size()) +
                          " does not match input dimension " + std::to_string(dim));
      }
      check_finite(row, where);
    }
    check_finite(layer.biases, where);
    dim = layer.weights.size();
  }
  if (net.labels.size() != dim) {
    throw FormatError("label count " + std::to_string(net.labels.size()) +
                      " does not match output dimension " + std::to_string(dim));
  }
  return net;
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open network file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return parse_network(j);
}

std::vector<std::vector<double>> forward_layers(const Network& net,
                                                const std::vector<double>& x) {
  if (x.size() != net.input_dim) {
    throw FormatError("input has dimension " + std::to_string(x.size()) + ", expected " +
                      std::to_string(net.input_dim));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw PayloadError("non-finite network input");
  }
  std::vector<std::vector<double>> outputs;
  std::vector<double> current = x;
  for (const Layer& layer : net.layers) {
    std::vector<double> next(layer.weights.size(), 0.0);
    for (std::size_t o = 0; o < layer.weights.size(); ++o) {
      double acc = layer.biases[o];
      const auto& row = layer.weights[o];
      for (std::size_t i = 0; i < row.size(); ++i) acc += row[i] * current[i];
      if (layer.activation == Activation::ReLU && acc < 0.0) acc = 0.0;
      next[o] = acc;
    }
    outputs.push_back(next);
    current = std::move(next);
  }
  return outputs;
}

std::vector<double> forward(const Network& net, const std::vector<double>& x) {
  return forward_layers(net, x).back();
}

std::string rank_labels(const std::vector<double>& scores,
                        const std::vector<std::string>& labels,
                        const std::set<std::string>& excluded) {
  if (scores.size() != labels.size()) {
    throw FormatError("rank_labels: score/label count mismatch");
  }
  const std::string* best = nullptr;
  double best_score = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (excluded.count(labels[i])) continue;
    if (!best || scores[i] > best_score) {
      best = &labels[i];
      best_score = scores[i];
    }
  }
  if (!best) throw SbmError("rank_labels: every label is excluded");
  return *best;
}

std::vector<std::pair<std::string, double>> to_distribution(
    const std::vector<double>& scores, const std::vector<std::string>& labels) {
  if (scores.size() != labels.size()) {
    throw FormatError("to_distribution: score/label count mismatch");
  }
  if (scores.empty()) throw FormatError("to_distribution: empty score vector");
  double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  std::vector<double> exps(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    exps[i] = std::exp(scores[i] - top);
    total += exps[i];
  }
  std::vector<std::pair<std::string, double>> dist;
  dist.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    dist.emplace_back(labels[i], exps[i] / total);
  }
  return dist;
}

}  // namespace sbm::nn
