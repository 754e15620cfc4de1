#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace mrope {

struct MlpConfig {
  std::vector<std::size_t> hidden = {512, 256, 32};
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 0.003;
  double momentum = 0.9;
  // Rescale a minibatch gradient whose Euclidean norm exceeds this; 0 disables.
  double gradient_clip = 5.0;
  std::uint64_t seed = 0;
  // Standardize inputs and the target before training; predictions are
  // mapped back to the original scale.
  bool standardize = true;
};

// Fully connected ReLU network with a scalar identity output. Inputs to the
// matrix entry points are laid out one sample per column.
class MlpRegressor {
 public:
  MlpRegressor() = default;
  // He-normal weights, zero biases.
  MlpRegressor(std::size_t input_dim, std::vector<std::size_t> hidden, std::uint64_t seed);

  std::size_t input_dim() const { return sizes_.empty() ? 0 : sizes_.front(); }
  // input, hidden..., 1
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t parameter_count() const;
  bool fitted() const { return fitted_; }

  // Flat layout: for each layer, W row-major (out x in) then b.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);

  // Raw network output, no standardization.
  Eigen::VectorXd forward(const Eigen::MatrixXd& x) const;
  // mean((f(x_i) - y_i)^2) on the raw network.
  double loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const;
  // Analytic gradient of loss() in the flat parameter layout.
  std::vector<double> gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const;

  // Prediction on the original scale.
  double predict(std::span<const double> x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

  // Trains in place; returns the mean training loss after each epoch. Zero
  // epochs leaves the initialization untouched and fitted() false.
  std::vector<double> fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const MlpConfig& config);

  nlohmann::json to_json() const;
  static MlpRegressor from_json(const nlohmann::json& j);

 private:
  Eigen::MatrixXd standardized(const Eigen::MatrixXd& x) const;

  std::vector<std::size_t> sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  Eigen::VectorXd in_mean_;
  Eigen::VectorXd in_scale_;
  double out_mean_ = 0.0;
  double out_scale_ = 1.0;
  bool fitted_ = false;
};

// Little-endian float64 array <-> base64 text.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(const std::string& text, std::size_t expected);

}  // namespace mrope
