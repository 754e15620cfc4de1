#include "mrope/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include <openssl/evp.h>

#include "mrope/errors.hpp"
#include "mrope/rng.hpp"

namespace mrope {

MlpRegressor::MlpRegressor(std::size_t input_dim, std::vector<std::size_t> hidden,
                           std::uint64_t seed) {
  if (input_dim == 0) throw ConfigurationError("mlp: input dimension must be positive");
  sizes_.push_back(input_dim);
  for (auto h : hidden) {
    if (h == 0) throw ConfigurationError("mlp: hidden layers must be nonempty");
    sizes_.push_back(h);
  }
  sizes_.push_back(1);
  Rng rng = make_rng(seed, 7);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double sd = std::sqrt(2.0 / static_cast<double>(sizes_[l]));
    Eigen::MatrixXd w(sizes_[l + 1], sizes_[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = sd * standard_normal(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes_[l + 1])));
  }
  in_mean_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input_dim));
  in_scale_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(input_dim));
}

std::size_t MlpRegressor::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) total += sizes_[l + 1] * (sizes_[l] + 1);
  return total;
}

std::vector<double> MlpRegressor::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const auto& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) flat.push_back(biases_[l](r));
  }
  return flat;
}

void MlpRegressor::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count())
    throw ConfigurationError("mlp: parameter vector has the wrong length");
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    auto& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) biases_[l](r) = flat[k++];
  }
}

Eigen::VectorXd MlpRegressor::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = weights_[l] * h;
    z.colwise() += biases_[l];
    if (l + 1 < weights_.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h.row(0).transpose();
}

double MlpRegressor::loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const {
  const Eigen::VectorXd r = forward(x) - y;
  return r.squaredNorm() / static_cast<double>(y.size());
}

std::vector<double> MlpRegressor::gradient(const Eigen::MatrixXd& x,
                                           const Eigen::VectorXd& y) const {
  if (x.cols() == 0) throw ConfigurationError("mlp: empty batch");
  const std::size_t L = weights_.size();
  std::vector<Eigen::MatrixXd> acts(L + 1);
  acts[0] = x;
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = weights_[l] * acts[l];
    z.colwise() += biases_[l];
    if (l + 1 < L) z = z.cwiseMax(0.0);
    acts[l + 1] = std::move(z);
  }
  const double n = static_cast<double>(x.cols());
  // dLoss/dOutput
  Eigen::MatrixXd delta = (2.0 / n) * (acts[L].row(0).transpose() - y).transpose();
  std::vector<Eigen::MatrixXd> gw(L);
  std::vector<Eigen::VectorXd> gb(L);
  for (std::size_t l = L; l-- > 0;) {
    gw[l] = delta * acts[l].transpose();
    gb[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = weights_[l].transpose() * delta;
      delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < L; ++l) {
    for (Eigen::Index r = 0; r < gw[l].rows(); ++r)
      for (Eigen::Index c = 0; c < gw[l].cols(); ++c) flat.push_back(gw[l](r, c));
    for (Eigen::Index r = 0; r < gb[l].size(); ++r) flat.push_back(gb[l](r));
  }
  return flat;
}

Eigen::MatrixXd MlpRegressor::standardized(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd z = x.colwise() - in_mean_;
  return in_scale_.cwiseInverse().asDiagonal() * z;
}

double MlpRegressor::predict(std::span<const double> x) const {
  Eigen::MatrixXd col(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) col(static_cast<Eigen::Index>(i), 0) = x[i];
  return predict(col)(0);
}

Eigen::VectorXd MlpRegressor::predict(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim())
    throw ConfigurationError("mlp: input has the wrong dimension");
  Eigen::VectorXd out = forward(standardized(x));
  return (out.array() * out_scale_ + out_mean_).matrix();
}

std::vector<double> MlpRegressor::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const MlpConfig& config) {
  const auto n = static_cast<std::size_t>(x.cols());
  if (n == 0) throw FitError("mlp: empty training set");
  if (static_cast<std::size_t>(x.rows()) != input_dim() || y.size() != x.cols())
    throw ConfigurationError("mlp: training data has the wrong shape");
  if (config.batch_size == 0) throw ConfigurationError("mlp: batch size must be positive");
  if (config.epochs == 0) return {};

  if (config.standardize) {
    in_mean_ = x.rowwise().mean();
    Eigen::MatrixXd centered = x.colwise() - in_mean_;
    in_scale_ = (centered.array().square().rowwise().sum() / static_cast<double>(n)).sqrt();
    for (Eigen::Index i = 0; i < in_scale_.size(); ++i)
      if (!(in_scale_(i) > 1e-12)) in_scale_(i) = 1.0;
    out_mean_ = y.mean();
    out_scale_ = std::sqrt((y.array() - out_mean_).square().mean());
    if (!(out_scale_ > 1e-12)) out_scale_ = 1.0;
  }
  const Eigen::MatrixXd xs = standardized(x);
  const Eigen::VectorXd ys = ((y.array() - out_mean_) / out_scale_).matrix();

  std::vector<double> params = parameters();
  std::vector<double> velocity(params.size(), 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(config.seed, 11);
  std::vector<double> history;
  history.reserve(config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const auto b = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd xb(xs.rows(), b);
      Eigen::VectorXd yb(b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const auto src = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(j)]);
        xb.col(j) = xs.col(src);
        yb(j) = ys(src);
      }
      auto g = gradient(xb, yb);
      if (config.gradient_clip > 0.0) {
        double norm = 0.0;
        for (double v : g) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > config.gradient_clip)
          for (double& v : g) v *= config.gradient_clip / norm;
      }
      for (std::size_t k = 0; k < params.size(); ++k) {
        velocity[k] = config.momentum * velocity[k] - config.learning_rate * g[k];
        params[k] += velocity[k];
      }
      set_parameters(params);
    }
    history.push_back(loss(xs, ys));
  }
  // Center the training residual so the regression's normal equation for
  // the intercept holds exactly.
  const double shift = (ys - forward(xs)).mean();
  biases_.back()(0) += shift;
  fitted_ = true;
  return history;
}

nlohmann::json MlpRegressor::to_json() const {
  nlohmann::json j;
  j["architecture"] = {{"layers", sizes_}, {"activation", "relu"}, {"output", "identity"}};
  j["input_mean"] = std::vector<double>(in_mean_.data(), in_mean_.data() + in_mean_.size());
  j["input_scale"] = std::vector<double>(in_scale_.data(), in_scale_.data() + in_scale_.size());
  j["output_mean"] = out_mean_;
  j["output_scale"] = out_scale_;
  j["fitted"] = fitted_;
  j["parameters"] = encode_doubles(parameters());
  return j;
}

MlpRegressor MlpRegressor::from_json(const nlohmann::json& j) {
  try {
    const auto sizes = j.at("architecture").at("layers").get<std::vector<std::size_t>>();
    if (sizes.size() < 2 || sizes.back() != 1)
      throw IngestionError("mlp json: layers must end with a scalar output");
    MlpRegressor m(sizes.front(), std::vector<std::size_t>(sizes.begin() + 1, sizes.end() - 1), 0);
    m.set_parameters(decode_doubles(j.at("parameters").get<std::string>(), m.parameter_count()));
    const auto mean = j.at("input_mean").get<std::vector<double>>();
    const auto scale = j.at("input_scale").get<std::vector<double>>();
    if (mean.size() != sizes.front() || scale.size() != sizes.front())
      throw IngestionError("mlp json: input scaling has the wrong length");
    m.in_mean_ = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    m.in_scale_ = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    m.out_mean_ = j.at("output_mean").get<double>();
    m.out_scale_ = j.at("output_scale").get<double>();
    m.fitted_ = j.value("fitted", true);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("mlp json: ") + e.what());
  }
}

std::string encode_doubles(std::span<const double> values) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  const auto bytes = values.size() * sizeof(double);
  std::string out(4 * ((bytes + 2) / 3) + 1, '\0');
  const int len = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(values.data()),
                                  static_cast<int>(bytes));
  out.resize(static_cast<std::size_t>(len));
  return out;
}

std::vector<double> decode_doubles(const std::string& text, std::size_t expected) {
  const auto bytes = expected * sizeof(double);
  if (text.size() != 4 * ((bytes + 2) / 3))
    throw IngestionError("base64 blob has the wrong length");
  std::vector<unsigned char> raw(text.size() / 4 * 3 + 1);
  const int len = EVP_DecodeBlock(raw.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
  if (len < 0 || static_cast<std::size_t>(len) < bytes) throw IngestionError("malformed base64 blob");
  std::vector<double> out(expected);
  std::memcpy(out.data(), raw.data(), bytes);
  return out;
}

}  // namespace mrope
