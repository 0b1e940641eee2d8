#include "recsim/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace recsim {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + e^m) - t*m, stable for large |m|.
double cross_entropy_from_margin(double margin, double target) {
  const double softplus =
      std::max(margin, 0.0) + std::log1p(std::exp(-std::abs(margin)));
  return softplus - target * margin;
}

void require_both_classes(const Dataset& data, const char* who) {
  bool pos = false, neg = false;
  for (const auto& [x, y] : data) (y == Label::positive ? pos : neg) = true;
  if (!pos || !neg)
    throw std::invalid_argument(std::string(who) +
                                ": both classes must be present");
}

// Inverse-frequency example weights normalized to mean 1.
Eigen::VectorXd balanced_weights(const Dataset& data, bool balanced) {
  const std::size_t n = data.size();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  if (!balanced) return w;
  std::size_t n_pos = 0;
  for (const auto& [x, y] : data) n_pos += (y == Label::positive);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return w;
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = data[i].second == Label::positive;
    w[static_cast<Eigen::Index>(i)] =
        static_cast<double>(n) / (2.0 * static_cast<double>(pos ? n_pos : n_neg));
  }
  return w;
}

}  // namespace

nlohmann::json Classifier::metadata() const {
  return {{"family", family()}, {"continuous", continuous()}};
}

// ---------------------------------------------------------------------------
// Bayes classifier

BayesClassifier::BayesClassifier(std::shared_ptr<const PosteriorModel> model)
    : model_(std::move(model)) {
  if (!model_) throw std::invalid_argument("BayesClassifier: null model");
  if (auto* tg = dynamic_cast<const TwoGaussians*>(model_.get())) {
    has_linear_ = true;
    linear_.theta = tg->theta();
    linear_.theta0 =
        tg->theta0() + std::log(tg->class_prior() / (1.0 - tg->class_prior()));
  }
  if (dynamic_cast<const DiscreteGridModel*>(model_.get())) continuous_ = false;
}

nlohmann::json BayesClassifier::metadata() const {
  auto m = Classifier::metadata();
  m["linear_boundary"] = has_linear_;
  return m;
}

ClassifierPtr bayes_classifier(std::shared_ptr<const PosteriorModel> model) {
  return std::make_shared<BayesClassifier>(std::move(model));
}

// ---------------------------------------------------------------------------
// Logistic regression: full-batch gradient descent with a backtracking line
// search on the weighted cross-entropy objective.

namespace {

ClassifierPtr fit_logistic_regression(const TrainConfig& cfg,
                                      const Dataset& data) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index d = data.front().first.size();
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = data[static_cast<std::size_t>(i)].first;
    t[i] = data[static_cast<std::size_t>(i)].second == Label::positive ? 1.0
                                                                       : 0.0;
  }
  Eigen::VectorXd w = balanced_weights(data, cfg.class_balanced);
  const double w_total = w.sum();

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  double theta0 = 0.0;

  auto objective = [&](const Eigen::VectorXd& th, double th0) {
    const Eigen::VectorXd m = (x * th).array() + th0;
    double j = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      j += w[i] * cross_entropy_from_margin(m[i], t[i]);
    j /= w_total;
    if (cfg.lr_l2 > 0.0) j += 0.5 * cfg.lr_l2 * th.squaredNorm();
    return j;
  };

  double step = 1.0;
  double j_cur = objective(theta, theta0);
  int iters = 0;
  double grad_norm = 0.0;
  for (; iters < cfg.lr_max_iters; ++iters) {
    const Eigen::VectorXd m = (x * theta).array() + theta0;
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i)
      resid[i] = w[i] * (sigmoid(m[i]) - t[i]) / w_total;
    Eigen::VectorXd g = x.transpose() * resid;
    if (cfg.lr_l2 > 0.0) g += cfg.lr_l2 * theta;
    const double g0 = resid.sum();
    grad_norm = std::sqrt(g.squaredNorm() + g0 * g0);
    if (grad_norm < cfg.lr_grad_tol) break;

    // Armijo backtracking; the accepted step seeds the next iteration.
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Eigen::VectorXd th_new = theta - step * g;
      const double th0_new = theta0 - step * g0;
      const double j_new = objective(th_new, th0_new);
      if (j_new <= j_cur - 0.25 * step * grad_norm * grad_norm) {
        theta = th_new;
        theta0 = th0_new;
        j_cur = j_new;
        step *= 1.5;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent step left at machine precision
  }

  nlohmann::json info{{"iterations", iters},
                      {"final_grad_norm", grad_norm},
                      {"converged", grad_norm < cfg.lr_grad_tol},
                      {"class_balanced", cfg.class_balanced},
                      {"l2", cfg.lr_l2}};
  return std::make_shared<LogisticRegression>(
      LinearModel{std::move(theta), theta0}, std::move(info));
}

}  // namespace

double LogisticRegression::predict_proba(const Point& x) const {
  return sigmoid(lin_.margin(x));
}

nlohmann::json LogisticRegression::metadata() const {
  auto m = Classifier::metadata();
  m["theta"] = std::vector<double>(lin_.theta.data(),
                                   lin_.theta.data() + lin_.theta.size());
  m["theta0"] = lin_.theta0;
  m["fit"] = fit_info_;
  return m;
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

namespace {

ClassifierPtr fit_gaussian_nb(const TrainConfig& cfg, const Dataset& data) {
  const Eigen::Index d = data.front().first.size();
  auto stats_for = [&](Label cls) {
    GaussianNaiveBayes::ClassStats s;
    s.mean = Eigen::VectorXd::Zero(d);
    s.var = Eigen::VectorXd::Zero(d);
    std::size_t count = 0;
    for (const auto& [x, y] : data)
      if (y == cls) {
        s.mean += x;
        ++count;
      }
    if (count < 2)
      throw std::invalid_argument("gaussian-nb: need >= 2 examples per class");
    s.mean /= static_cast<double>(count);
    for (const auto& [x, y] : data)
      if (y == cls) s.var += (x - s.mean).cwiseProduct(x - s.mean);
    s.var = s.var / static_cast<double>(count - 1);
    s.var.array() += cfg.cov_regularization;
    s.log_prior = std::log(static_cast<double>(count) /
                           static_cast<double>(data.size()));
    return s;
  };
  return std::make_shared<GaussianNaiveBayes>(stats_for(Label::positive),
                                              stats_for(Label::negative));
}

}  // namespace

double GaussianNaiveBayes::log_density(const ClassStats& s,
                                       const Point& x) const {
  double ll = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double dj = x[j] - s.mean[j];
    ll += -0.5 * std::log(2.0 * M_PI * s.var[j]) - 0.5 * dj * dj / s.var[j];
  }
  return ll;
}

double GaussianNaiveBayes::predict_proba(const Point& x) const {
  const double odds = (log_density(pos_, x) + pos_.log_prior) -
                      (log_density(neg_, x) + neg_.log_prior);
  return sigmoid(odds);
}

nlohmann::json GaussianNaiveBayes::metadata() const {
  auto m = Classifier::metadata();
  m["mean_pos"] =
      std::vector<double>(pos_.mean.data(), pos_.mean.data() + pos_.mean.size());
  m["mean_neg"] =
      std::vector<double>(neg_.mean.data(), neg_.mean.data() + neg_.mean.size());
  return m;
}

// ---------------------------------------------------------------------------
// QDA

namespace {

ClassifierPtr fit_qda(const TrainConfig& cfg, const Dataset& data) {
  const Eigen::Index d = data.front().first.size();
  bool regularized = false;
  auto stats_for = [&](Label cls) {
    Qda::ClassStats s;
    s.mean = Eigen::VectorXd::Zero(d);
    std::size_t count = 0;
    for (const auto& [x, y] : data)
      if (y == cls) {
        s.mean += x;
        ++count;
      }
    if (count < 2)
      throw std::invalid_argument("qda: need >= 2 examples per class");
    s.mean /= static_cast<double>(count);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& [x, y] : data)
      if (y == cls) {
        const Eigen::VectorXd c = x - s.mean;
        cov += c * c.transpose();
      }
    cov /= static_cast<double>(count - 1);

    double reg = cfg.cov_regularization;
    Eigen::LLT<Eigen::MatrixXd> llt;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::MatrixXd c = cov + reg * Eigen::MatrixXd::Identity(d, d);
      llt.compute(c);
      if (llt.info() == Eigen::Success) {
        if (reg > 0.0) regularized = true;
        Eigen::MatrixXd lower = llt.matrixL();
        s.log_det = 2.0 * lower.diagonal().array().log().sum();
        s.cov_inverse = llt.solve(Eigen::MatrixXd::Identity(d, d));
        s.log_prior = std::log(static_cast<double>(count) /
                               static_cast<double>(data.size()));
        return s;
      }
      reg = (reg == 0.0) ? 1e-10 : reg * 100.0;
    }
    throw std::runtime_error("qda: covariance could not be factorized");
  };
  auto pos = stats_for(Label::positive);
  auto neg = stats_for(Label::negative);
  return std::make_shared<Qda>(std::move(pos), std::move(neg), regularized);
}

}  // namespace

double Qda::predict_proba(const Point& x) const {
  const Eigen::VectorXd dp = x - pos_.mean;
  const Eigen::VectorXd dn = x - neg_.mean;
  const double lp =
      pos_.log_prior - 0.5 * pos_.log_det - 0.5 * dp.dot(pos_.cov_inverse * dp);
  const double ln =
      neg_.log_prior - 0.5 * neg_.log_det - 0.5 * dn.dot(neg_.cov_inverse * dn);
  return sigmoid(lp - ln);
}

nlohmann::json Qda::metadata() const {
  auto m = Classifier::metadata();
  m["regularized"] = regularized_;
  return m;
}

// ---------------------------------------------------------------------------
// Decision tree: greedy weighted-Gini CART to a fixed depth.

namespace {

struct TreeBuilder {
  const Dataset& data;
  const Eigen::VectorXd& weights;
  int max_depth;
  std::vector<DecisionTree::Node> nodes;

  int build(std::vector<int>& idx, int depth) {
    double w_pos = 0.0, w_total = 0.0;
    for (int i : idx) {
      const double wi = weights[i];
      w_total += wi;
      if (data[static_cast<std::size_t>(i)].second == Label::positive)
        w_pos += wi;
    }
    DecisionTree::Node node;
    node.prob_positive = w_total > 0.0 ? w_pos / w_total : 0.5;

    const bool pure = (w_pos == 0.0) || (w_pos == w_total);
    if (depth >= max_depth || pure || idx.size() < 2) {
      nodes.push_back(node);
      return static_cast<int>(nodes.size()) - 1;
    }

    const Eigen::Index d = data.front().first.size();
    double best_score = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<int> order(idx);
    for (Eigen::Index f = 0; f < d; ++f) {
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double va = data[static_cast<std::size_t>(a)].first[f];
        const double vb = data[static_cast<std::size_t>(b)].first[f];
        return va < vb || (va == vb && a < b);
      });
      double left_w = 0.0, left_pos = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const int i = order[k];
        const double wi = weights[i];
        left_w += wi;
        if (data[static_cast<std::size_t>(i)].second == Label::positive)
          left_pos += wi;
        const double v = data[static_cast<std::size_t>(i)].first[f];
        const double v_next =
            data[static_cast<std::size_t>(order[k + 1])].first[f];
        if (v == v_next) continue;
        const double right_w = w_total - left_w;
        const double right_pos = w_pos - left_pos;
        if (left_w <= 0.0 || right_w <= 0.0) continue;
        const double pl = left_pos / left_w, pr = right_pos / right_w;
        const double gini_l = 2.0 * pl * (1.0 - pl);
        const double gini_r = 2.0 * pr * (1.0 - pr);
        const double score = left_w * gini_l + right_w * gini_r;
        if (score < best_score) {
          best_score = score;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (v + v_next);
        }
      }
    }
    if (best_feature < 0) {
      nodes.push_back(node);
      return static_cast<int>(nodes.size()) - 1;
    }

    std::vector<int> left_idx, right_idx;
    for (int i : idx) {
      if (data[static_cast<std::size_t>(i)].first[best_feature] <=
          best_threshold)
        left_idx.push_back(i);
      else
        right_idx.push_back(i);
    }
    node.feature = best_feature;
    node.threshold = best_threshold;
    nodes.push_back(node);
    const int self = static_cast<int>(nodes.size()) - 1;
    nodes[self].left = build(left_idx, depth + 1);
    nodes[self].right = build(right_idx, depth + 1);
    return self;
  }
};

ClassifierPtr fit_decision_tree(const TrainConfig& cfg, const Dataset& data) {
  if (cfg.tree_max_depth < 1)
    throw std::invalid_argument("decision-tree: max_depth must be >= 1");
  Eigen::VectorXd w = balanced_weights(data, cfg.class_balanced);
  TreeBuilder builder{data, w, cfg.tree_max_depth, {}};
  std::vector<int> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  builder.build(idx, 0);
  return std::make_shared<DecisionTree>(std::move(builder.nodes),
                                        cfg.tree_max_depth);
}

}  // namespace

double DecisionTree::predict_proba(const Point& x) const {
  int cur = 0;
  while (nodes_[static_cast<std::size_t>(cur)].feature >= 0) {
    const Node& n = nodes_[static_cast<std::size_t>(cur)];
    cur = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes_[static_cast<std::size_t>(cur)].prob_positive;
}

nlohmann::json DecisionTree::metadata() const {
  auto m = Classifier::metadata();
  m["max_depth"] = max_depth_;
  m["node_count"] = nodes_.size();
  return m;
}

// ---------------------------------------------------------------------------
// MLP: tanh hidden layers, sigmoid output, mini-batch gradient descent with
// classical momentum and per-epoch reshuffling.

namespace {

ClassifierPtr fit_mlp(const TrainConfig& cfg, const Dataset& data) {
  const Eigen::Index d = data.front().first.size();
  std::vector<int> sizes;
  sizes.push_back(static_cast<int>(d));
  for (int h : cfg.mlp_hidden) sizes.push_back(h);
  sizes.push_back(1);

  RngStream rng(cfg.seed, 0x6d6c70 /* "mlp" */);
  std::vector<Mlp::Layer> layers;
  std::vector<Mlp::Layer> velocity;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l], fan_out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Mlp::Layer layer;
    layer.weights.resize(fan_out, fan_in);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
        layer.weights(r, c) = (2.0 * rng.next_double() - 1.0) * limit;
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    velocity.push_back({Eigen::MatrixXd::Zero(fan_out, fan_in),
                        Eigen::VectorXd::Zero(fan_out)});
    layers.push_back(std::move(layer));
  }

  const std::size_t n = data.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  const std::size_t n_layers = layers.size();
  for (int epoch = 0; epoch < cfg.mlp_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {  // Fisher-Yates
      const std::size_t j = rng.next_below(i);
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(cfg.mlp_batch)) {
      const std::size_t bsz =
          std::min(static_cast<std::size_t>(cfg.mlp_batch), n - start);
      Eigen::MatrixXd a0(d, static_cast<Eigen::Index>(bsz));
      Eigen::RowVectorXd target(static_cast<Eigen::Index>(bsz));
      for (std::size_t k = 0; k < bsz; ++k) {
        const auto& [x, y] = data[static_cast<std::size_t>(order[start + k])];
        a0.col(static_cast<Eigen::Index>(k)) = x;
        target[static_cast<Eigen::Index>(k)] =
            y == Label::positive ? 1.0 : 0.0;
      }

      // Forward pass, keeping activations.
      std::vector<Eigen::MatrixXd> acts;
      acts.push_back(a0);
      for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd z =
            (layers[l].weights * acts.back()).colwise() + layers[l].bias;
        if (l + 1 < n_layers)
          z = z.array().tanh();
        else
          z = z.unaryExpr([](double v) { return sigmoid(v); });
        acts.push_back(std::move(z));
      }

      // Backward pass; output delta is (p - t)/batch for cross-entropy.
      Eigen::MatrixXd delta =
          (acts.back().row(0) - target) / static_cast<double>(bsz);
      for (std::size_t l = n_layers; l-- > 0;) {
        const Eigen::MatrixXd grad_w = delta * acts[l].transpose();
        const Eigen::VectorXd grad_b = delta.rowwise().sum();
        if (l > 0) {
          Eigen::MatrixXd back = layers[l].weights.transpose() * delta;
          delta = back.cwiseProduct(
              (1.0 - acts[l].array().square()).matrix());
        }
        velocity[l].weights =
            cfg.mlp_momentum * velocity[l].weights - cfg.mlp_learning_rate * grad_w;
        velocity[l].bias =
            cfg.mlp_momentum * velocity[l].bias - cfg.mlp_learning_rate * grad_b;
        layers[l].weights += velocity[l].weights;
        layers[l].bias += velocity[l].bias;
      }
    }
  }

  nlohmann::json info{{"hidden", cfg.mlp_hidden},
                      {"learning_rate", cfg.mlp_learning_rate},
                      {"epochs", cfg.mlp_epochs},
                      {"batch", cfg.mlp_batch},
                      {"momentum", cfg.mlp_momentum},
                      {"seed", cfg.seed}};
  return std::make_shared<Mlp>(std::move(layers), std::move(info));
}

}  // namespace

double Mlp::predict_proba(const Point& x) const {
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].weights * a + layers_[l].bias;
    if (l + 1 < layers_.size())
      a = z.array().tanh();
    else
      a = z.unaryExpr([](double v) { return sigmoid(v); });
  }
  return a[0];
}

nlohmann::json Mlp::metadata() const {
  auto m = Classifier::metadata();
  m["fit"] = fit_info_;
  return m;
}

// ---------------------------------------------------------------------------

std::string TrainConfig::family_name(Family f) {
  switch (f) {
    case Family::logistic_regression: return "logistic-regression";
    case Family::gaussian_nb: return "gaussian-nb";
    case Family::qda: return "qda";
    case Family::decision_tree: return "decision-tree";
    case Family::mlp: return "mlp";
  }
  return "?";
}

TrainConfig::Family TrainConfig::family_from_name(const std::string& name) {
  if (name == "logistic-regression") return Family::logistic_regression;
  if (name == "gaussian-nb") return Family::gaussian_nb;
  if (name == "qda") return Family::qda;
  if (name == "decision-tree") return Family::decision_tree;
  if (name == "mlp") return Family::mlp;
  throw std::invalid_argument("unknown classifier family: " + name);
}

ClassifierPtr fit(const TrainConfig& config, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("fit: empty dataset");
  for (const auto& [x, y] : data)
    if (!x.allFinite()) throw std::invalid_argument("fit: non-finite feature");
  require_both_classes(data, "fit");
  switch (config.family) {
    case TrainConfig::Family::logistic_regression:
      return fit_logistic_regression(config, data);
    case TrainConfig::Family::gaussian_nb:
      return fit_gaussian_nb(config, data);
    case TrainConfig::Family::qda:
      return fit_qda(config, data);
    case TrainConfig::Family::decision_tree:
      return fit_decision_tree(config, data);
    case TrainConfig::Family::mlp:
      return fit_mlp(config, data);
  }
  throw std::logic_error("fit: unhandled family");
}

// ---------------------------------------------------------------------------
// Platt scaling: 2-parameter logistic regression on the base score, solved
// by Newton iterations.

ClassifierPtr platt_calibrate(ClassifierPtr base, const Dataset& calib_data) {
  if (!base) throw std::invalid_argument("platt_calibrate: null classifier");
  if (calib_data.empty())
    throw std::invalid_argument("platt_calibrate: empty calibration set");
  require_both_classes(calib_data, "platt_calibrate");

  const Eigen::Index n = static_cast<Eigen::Index>(calib_data.size());
  Eigen::VectorXd s(n), t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s[i] = base->score(calib_data[static_cast<std::size_t>(i)].first);
    t[i] = calib_data[static_cast<std::size_t>(i)].second == Label::positive
               ? 1.0
               : 0.0;
  }

  auto nll = [&](double a, double b) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      acc += cross_entropy_from_margin(a * s[i] + b, t[i]);
    return acc;
  };

  // Damped Newton on the calibration cross-entropy.
  double a = 1.0, b = 0.0;
  double j_cur = nll(a, b);
  for (int iter = 0; iter < 200; ++iter) {
    double ga = 0, gb = 0, haa = 0, hab = 0, hbb = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(a * s[i] + b);
      const double r = p - t[i];
      const double q = std::max(p * (1.0 - p), 1e-12);
      ga += r * s[i];
      gb += r;
      haa += q * s[i] * s[i];
      hab += q * s[i];
      hbb += q;
    }
    const double det = haa * hbb - hab * hab;
    if (std::abs(det) < 1e-300) break;
    const double da = (hbb * ga - hab * gb) / det;
    const double db = (haa * gb - hab * ga) / det;
    double step = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const double j_new = nll(a - step * da, b - step * db);
      if (j_new <= j_cur) {
        a -= step * da;
        b -= step * db;
        j_cur = j_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || step * (std::abs(da) + std::abs(db)) < 1e-12) break;
  }
  return std::make_shared<PlattCalibrated>(std::move(base), a, b);
}

double PlattCalibrated::predict_proba(const Point& x) const {
  return sigmoid(a_ * base_->score(x) + b_);
}

nlohmann::json PlattCalibrated::metadata() const {
  auto m = base_->metadata();
  m["platt_a"] = a_;
  m["platt_b"] = b_;
  m["family"] = family();
  return m;
}

// ---------------------------------------------------------------------------

double boundary_epsilon(
    const PosteriorModel& model, std::span<const Point> negatives,
    const std::function<Point(const Point&)>& recourse_map) {
  if (negatives.empty())
    throw std::invalid_argument("boundary_epsilon: empty negative set");
  double acc = 0.0;
  for (const Point& x0 : negatives)
    acc += std::abs(0.5 - model.posterior(recourse_map(x0)));
  return acc / static_cast<double>(negatives.size());
}

}  // namespace recsim
