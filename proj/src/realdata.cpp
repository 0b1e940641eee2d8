#include "recsim/realdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace recsim {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

bool is_missing(const std::string& tok) {
  if (tok.empty()) return true;
  std::string low;
  for (char c : tok) low.push_back(static_cast<char>(std::tolower(c)));
  return low == "na" || low == "nan" || low == "null";
}

bool parse_number(const std::string& tok, double& out) {
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

double TabularDataset::negative_rate() const {
  if (rows.empty()) return 0.0;
  std::size_t neg = 0;
  for (const auto& [x, y] : rows) neg += (y == Label::negative);
  return static_cast<double>(neg) / static_cast<double>(rows.size());
}

nlohmann::json TabularDataset::provenance_json() const {
  return {{"source", provenance.source_path},
          {"label_column", provenance.label_column},
          {"positive_value", provenance.positive_value},
          {"feature_names", feature_names},
          {"feature_min", provenance.feature_min},
          {"feature_max", provenance.feature_max},
          {"dropped_rows", provenance.dropped_rows},
          {"warnings", provenance.warnings}};
}

TabularDataset load_csv(const std::string& path,
                        const std::string& label_column,
                        const std::string& positive_value) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_csv: empty file " + path);
  const std::vector<std::string> header = split_csv_line(line);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end())
    throw std::runtime_error("load_csv: no column named '" + label_column +
                             "' in " + path);
  const std::size_t label_idx =
      static_cast<std::size_t>(label_it - header.begin());

  std::vector<std::vector<std::string>> raw;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("load_csv: ragged row in " + path);
    bool missing = false;
    for (const auto& f : fields) missing = missing || is_missing(f);
    if (missing) {
      ++dropped;
      continue;
    }
    raw.push_back(std::move(fields));
  }
  if (raw.empty()) throw std::runtime_error("load_csv: no usable rows");

  // Column typing: numeric if every value parses; otherwise categorical
  // with a bounded number of levels, one-hot encoded.
  const std::size_t n_cols = header.size();
  std::vector<bool> numeric(n_cols, true);
  for (std::size_t c = 0; c < n_cols; ++c) {
    if (c == label_idx) continue;
    double v;
    for (const auto& row : raw)
      if (!parse_number(row[c], v)) {
        numeric[c] = false;
        break;
      }
  }
  std::vector<std::vector<std::string>> levels(n_cols);
  for (std::size_t c = 0; c < n_cols; ++c) {
    if (c == label_idx || numeric[c]) continue;
    std::set<std::string> uniq;
    for (const auto& row : raw) uniq.insert(row[c]);
    if (uniq.size() > 64)
      throw std::runtime_error("load_csv: column '" + header[c] +
                               "' has too many levels to one-hot encode");
    levels[c].assign(uniq.begin(), uniq.end());
  }

  TabularDataset out;
  out.provenance.source_path = path;
  out.provenance.label_column = label_column;
  out.provenance.positive_value = positive_value;
  out.provenance.dropped_rows = dropped;
  if (dropped > 0)
    out.provenance.warnings.push_back(
        "dropped " + std::to_string(dropped) + " rows with missing values");

  for (std::size_t c = 0; c < n_cols; ++c) {
    if (c == label_idx) continue;
    if (numeric[c]) {
      out.feature_names.push_back(header[c]);
    } else {
      for (const auto& lv : levels[c])
        out.feature_names.push_back(header[c] + "=" + lv);
    }
  }
  const std::size_t d = out.feature_names.size();
  if (d == 0) throw std::runtime_error("load_csv: no feature columns");

  double pos_num = 0.0;
  const bool pos_is_number = parse_number(positive_value, pos_num);
  out.rows.reserve(raw.size());
  for (const auto& row : raw) {
    Point x(static_cast<Eigen::Index>(d));
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (c == label_idx) continue;
      if (numeric[c]) {
        double v;
        parse_number(row[c], v);
        x[j++] = v;
      } else {
        for (const auto& lv : levels[c]) x[j++] = (row[c] == lv) ? 1.0 : 0.0;
      }
    }
    const std::string& tok = row[label_idx];
    bool positive = tok == positive_value;
    if (!positive && pos_is_number) {
      double v;
      if (parse_number(tok, v)) positive = (v == pos_num);
    }
    out.rows.push_back({std::move(x), positive ? Label::positive : Label::negative});
  }

  // Min-max normalization to [0,1]; constant columns collapse to 0.
  out.provenance.feature_min.assign(d, 0.0);
  out.provenance.feature_max.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double lo = out.rows.front().first[static_cast<Eigen::Index>(j)];
    double hi = lo;
    for (const auto& [x, y] : out.rows) {
      lo = std::min(lo, x[static_cast<Eigen::Index>(j)]);
      hi = std::max(hi, x[static_cast<Eigen::Index>(j)]);
    }
    out.provenance.feature_min[j] = lo;
    out.provenance.feature_max[j] = hi;
    if (hi == lo) {
      out.provenance.warnings.push_back("constant feature '" +
                                        out.feature_names[j] +
                                        "' normalized to 0");
      for (auto& [x, y] : out.rows) x[static_cast<Eigen::Index>(j)] = 0.0;
    } else {
      for (auto& [x, y] : out.rows)
        x[static_cast<Eigen::Index>(j)] =
            (x[static_cast<Eigen::Index>(j)] - lo) / (hi - lo);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Splits make_splits(std::size_t dataset_size, const SplitPlan& plan) {
  const std::size_t need =
      plan.n_cond_train + plan.n_cond_calib + plan.n_train + plan.n_test;
  if (need > dataset_size)
    throw std::invalid_argument("make_splits: plan exceeds dataset size");
  if (plan.n_cond_train == 0 || plan.n_cond_calib == 0 || plan.n_train == 0 ||
      plan.n_test == 0)
    throw std::invalid_argument("make_splits: all slices must be nonempty");

  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(plan.seed, 0x73706c69 /* "spli" */);
  for (std::size_t i = dataset_size; i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(i)]);

  Splits s;
  auto take = [&](std::size_t offset, std::size_t count) {
    return std::vector<std::size_t>(order.begin() + offset,
                                    order.begin() + offset + count);
  };
  std::size_t at = 0;
  s.cond_train = take(at, plan.n_cond_train);
  at += plan.n_cond_train;
  s.cond_calib = take(at, plan.n_cond_calib);
  at += plan.n_cond_calib;
  s.train = take(at, plan.n_train);
  at += plan.n_train;
  s.test = take(at, plan.n_test);
  return s;
}

Dataset take_rows(const TabularDataset& dataset,
                  const std::vector<std::size_t>& indices) {
  Dataset out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(dataset.rows[i]);
  return out;
}

nlohmann::json split_manifest(const TabularDataset& dataset,
                              const SplitPlan& plan, const Splits& splits) {
  return {{"plan",
           {{"n_cond_train", plan.n_cond_train},
            {"n_cond_calib", plan.n_cond_calib},
            {"n_train", plan.n_train},
            {"n_test", plan.n_test},
            {"seed", plan.seed}}},
          {"indices",
           {{"cond_train", splits.cond_train},
            {"cond_calib", splits.cond_calib},
            {"train", splits.train},
            {"test", splits.test}}},
          {"normalization", dataset.provenance_json()}};
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees

namespace {

// Least-squares regression tree on residuals; leaves carry the Newton step
// for log-loss.
struct GbtTreeBuilder {
  const Dataset& data;
  const std::vector<double>& residual;   // t - p
  const std::vector<double>& hessian;    // p (1 - p)
  int max_depth;
  std::vector<GradientBoostedTrees::Node> nodes;

  int build(std::vector<int>& idx, int depth) {
    double sum_r = 0.0, sum_h = 0.0;
    for (int i : idx) {
      sum_r += residual[static_cast<std::size_t>(i)];
      sum_h += hessian[static_cast<std::size_t>(i)];
    }
    GradientBoostedTrees::Node node;
    node.value = sum_r / std::max(sum_h, 1e-12);

    if (depth >= max_depth || idx.size() < 2) {
      nodes.push_back(node);
      return static_cast<int>(nodes.size()) - 1;
    }

    const Eigen::Index d = data.front().first.size();
    const double parent_gain = sum_r * sum_r / static_cast<double>(idx.size());
    double best_gain = parent_gain + 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<int> order(idx);
    for (Eigen::Index f = 0; f < d; ++f) {
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double va = data[static_cast<std::size_t>(a)].first[f];
        const double vb = data[static_cast<std::size_t>(b)].first[f];
        return va < vb || (va == vb && a < b);
      });
      double left_r = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left_r += residual[static_cast<std::size_t>(order[k])];
        const double v = data[static_cast<std::size_t>(order[k])].first[f];
        const double v_next =
            data[static_cast<std::size_t>(order[k + 1])].first[f];
        if (v == v_next) continue;
        const double right_r = sum_r - left_r;
        const double nl = static_cast<double>(k + 1);
        const double nr = static_cast<double>(order.size() - k - 1);
        const double gain = left_r * left_r / nl + right_r * right_r / nr;
        if (gain > best_gain) {
          best_gain = gain;
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
      if (data[static_cast<std::size_t>(i)].first[best_feature] <= best_threshold)
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

}  // namespace

double GradientBoostedTrees::Tree::eval(const Point& x) const {
  int cur = 0;
  while (nodes[static_cast<std::size_t>(cur)].feature >= 0) {
    const Node& n = nodes[static_cast<std::size_t>(cur)];
    cur = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(cur)].value;
}

double GradientBoostedTrees::score(const Point& x) const {
  double s = bias_;
  for (const auto& tree : trees_) s += config_.learning_rate * tree.eval(x);
  return s;
}

double GradientBoostedTrees::predict_proba(const Point& x) const {
  return sigmoid(score(x));
}

nlohmann::json GradientBoostedTrees::metadata() const {
  auto m = Classifier::metadata();
  m["learning_rate"] = config_.learning_rate;
  m["n_estimators"] = config_.n_estimators;
  m["subsample"] = config_.subsample;
  m["max_depth"] = config_.max_depth;
  return m;
}

ClassifierPtr fit_gbt(const GbtConfig& config, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("fit_gbt: empty dataset");
  const std::size_t n = data.size();
  std::vector<double> target(n);
  double mean_t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    target[i] = data[i].second == Label::positive ? 1.0 : 0.0;
    mean_t += target[i];
  }
  mean_t /= static_cast<double>(n);
  mean_t = std::min(std::max(mean_t, 1e-6), 1.0 - 1e-6);
  const double bias = std::log(mean_t / (1.0 - mean_t));

  std::vector<double> score(n, bias);
  std::vector<double> residual(n), hessian(n);
  std::vector<GradientBoostedTrees::Tree> trees;
  RngStream rng(config.seed, 0x676274 /* "gbt" */);

  const std::size_t sub_n = std::max<std::size_t>(
      2, static_cast<std::size_t>(config.subsample * static_cast<double>(n)));
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);

  for (int m = 0; m < config.n_estimators; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(score[i]);
      residual[i] = target[i] - p;
      hessian[i] = std::max(p * (1.0 - p), 1e-12);
    }
    std::vector<int> idx;
    if (sub_n < n) {
      // Partial Fisher-Yates draw without replacement.
      std::vector<int> pool(rows);
      idx.reserve(sub_n);
      for (std::size_t k = 0; k < sub_n; ++k) {
        const std::size_t j = k + rng.next_below(n - k);
        std::swap(pool[k], pool[j]);
        idx.push_back(pool[k]);
      }
      std::sort(idx.begin(), idx.end());
    } else {
      idx = rows;
    }

    GbtTreeBuilder builder{data, residual, hessian, config.max_depth, {}};
    builder.build(idx, 0);
    GradientBoostedTrees::Tree tree{std::move(builder.nodes)};
    for (std::size_t i = 0; i < n; ++i)
      score[i] += config.learning_rate * tree.eval(data[i].first);
    trees.push_back(std::move(tree));
  }
  return std::make_shared<GradientBoostedTrees>(bias, std::move(trees), config);
}

// ---------------------------------------------------------------------------
// Oracle training: cross-validated grid search, then Platt calibration.

namespace {

double cv_log_loss(const GbtConfig& config, const Dataset& data, int folds) {
  const std::size_t n = data.size();
  double total = 0.0;
  std::size_t count = 0;
  for (int fold = 0; fold < folds; ++fold) {
    Dataset train_fold, valid_fold;
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<int>(i % static_cast<std::size_t>(folds)) == fold)
        valid_fold.push_back(data[i]);
      else
        train_fold.push_back(data[i]);
    }
    GbtConfig fold_config = config;
    fold_config.seed = config.seed + static_cast<std::uint64_t>(fold);
    const auto model = fit_gbt(fold_config, train_fold);
    for (const auto& [x, y] : valid_fold) {
      const double p = Loss::clamp_prob(model->predict_proba(x));
      total += (y == Label::positive) ? -std::log(p) : -std::log(1.0 - p);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace

ConditionalOracle train_oracle(const TabularDataset& dataset,
                               const SplitPlan& plan,
                               const OracleSearchGrid& grid, Exec exec) {
  const Splits splits = make_splits(dataset.size(), plan);
  const Dataset cond_train = take_rows(dataset, splits.cond_train);
  const Dataset cond_calib = take_rows(dataset, splits.cond_calib);

  auto has_both = [](const Dataset& d) {
    bool pos = false, neg = false;
    for (const auto& [x, y] : d) (y == Label::positive ? pos : neg) = true;
    return pos && neg;
  };
  if (!has_both(cond_train) || !has_both(cond_calib))
    throw std::invalid_argument("train_oracle: one-class conditioning slice");

  std::vector<GbtConfig> candidates;
  for (double lr : grid.learning_rates)
    for (int est : grid.n_estimators)
      for (double sub : grid.subsamples)
        for (int depth : grid.max_depths)
          candidates.push_back(GbtConfig{lr, est, sub, depth, plan.seed});

  std::vector<double> scores(candidates.size());
  parallel_for(exec, candidates.size(), [&](std::size_t i) {
    scores[i] = cv_log_loss(candidates[i], cond_train, grid.cv_folds);
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] < scores[best]) best = i;

  auto base = fit_gbt(candidates[best], cond_train);
  auto calibrated = platt_calibrate(base, cond_calib);

  ConditionalOracle oracle;
  oracle.model = calibrated;
  oracle.provenance = {
      {"chosen",
       {{"learning_rate", candidates[best].learning_rate},
        {"n_estimators", candidates[best].n_estimators},
        {"subsample", candidates[best].subsample},
        {"max_depth", candidates[best].max_depth}}},
      {"cv_log_loss", scores[best]},
      {"cv_folds", grid.cv_folds},
      {"grid_size", candidates.size()},
      {"platt",
       {{"a", std::static_pointer_cast<const PlattCalibrated>(calibrated)->slope()},
        {"b", std::static_pointer_cast<const PlattCalibrated>(calibrated)->offset()}}}};
  return oracle;
}

// ---------------------------------------------------------------------------

nlohmann::json ReplayReport::to_json() const {
  nlohmann::json j = risks.to_json();
  j["high_variance_flag"] = high_variance_flag;
  j["oracle"] = oracle_provenance;
  j["classifier"] = classifier_metadata;
  return j;
}

ReplayReport replay_experiment(const TabularDataset& dataset,
                               const SplitPlan& plan,
                               const TrainConfig& classifier_config,
                               const RecoursePolicy& policy,
                               const ResponseModel& response, RngStream rng,
                               Exec exec) {
  const Splits splits = make_splits(dataset.size(), plan);
  const ConditionalOracle oracle = train_oracle(dataset, plan, {}, exec);
  const Dataset train_data = take_rows(dataset, splits.train);
  const Dataset test_data = take_rows(dataset, splits.test);

  const ClassifierPtr classifier = fit(classifier_config, train_data);
  const Loss loss = Loss::zero_one();

  const OraclePosterior posterior(oracle.model,
                                  static_cast<int>(dataset.feature_names.size()));
  PreparedPolicy prepared(policy, classifier, train_data, exec);
  const auto samples =
      apply_recourse(prepared, posterior, response, test_data, rng.fork(1), exec);

  ReplayReport report;
  report.risks.r_p = estimate_risk(*classifier, loss, test_data, exec);
  report.risks.r_q = estimate_risk_post(*classifier, loss, samples, exec);
  report.risks.decomposition = decompose(test_data, samples, *classifier);
  report.high_variance_flag = dataset.imbalanced();
  report.oracle_provenance = oracle.provenance;
  report.classifier_metadata = classifier->metadata();
  return report;
}

}  // namespace recsim
