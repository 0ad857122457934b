#ifndef GEOPROBE_PROBE_H_
#define GEOPROBE_PROBE_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "geoprobe/gold.h"
#include "geoprobe/tensor_io.h"

namespace geoprobe {

enum class Objective { kDistance, kContrastive };

std::string ToString(Objective objective);
Objective ParseObjective(const std::string& name);

// Probe hyperparameters. A batch is `sets_per_batch` sets; a set is either
// one of the structure's groups (set_size == 0, sentences) or `set_size`
// elements drawn from the training pool. Contrastive batches on pooled
// structures hold `sets_per_batch` anchors instead.
struct TrainConfig {
  double learning_rate = 1e-5;
  int probe_dim = 200;
  int epochs = 2;
  double init_scale = 1e-5;
  int sets_per_batch = 300;
  int set_size = 0;
  uint64_t seed = 0;
  Objective objective = Objective::kDistance;
  int negatives_per_anchor = 50;

  void Validate() const;

  // Defaults per structure, taken from the reference probing setup.
  static TrainConfig Preset(StructureKind kind, Objective objective);
};

nlohmann::json ToJson(const TrainConfig& config);
// Missing keys keep the values already in `base`.
TrainConfig TrainConfigFromJson(const nlohmann::json& j, TrainConfig base);

struct Probe {
  Eigen::MatrixXd weights;  // k x p
  TrainConfig config;
  double train_loss = 0;
  double validation_loss = 0;

  int input_dim() const { return static_cast<int>(weights.rows()); }
  int probe_dim() const { return static_cast<int>(weights.cols()); }
};

// Entries i.i.d. uniform on [-scale, scale].
Probe InitProbe(int k, int p, uint64_t seed, double scale = 1e-5);

// Unscaled random Gaussian projection, the untrained baseline.
Eigen::MatrixXd RandomProbe(int k, int p, uint64_t seed);

// A gold distance between two rows of the activation matrix.
struct PairTarget {
  int a = 0;
  int b = 0;
  double distance = 0;
};

// mean over pairs of | ||(h_a - h_b) B||^2 - d |.
double DistanceLoss(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h,
                    const std::vector<PairTarget>& pairs);
// Subgradient of DistanceLoss; zero residuals contribute nothing.
Eigen::MatrixXd DistanceLossGradient(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h,
                                     const std::vector<PairTarget>& pairs);

// -log( sum_P exp(-D(i,j)) / sum_N exp(-D(i,k)) ) with D the squared
// projected distance, evaluated with log-sum-exp.
double ContrastiveLoss(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h, int anchor,
                       const std::vector<int>& positives, const std::vector<int>& negatives);
Eigen::MatrixXd ContrastiveLossGradient(const Eigen::MatrixXd& weights,
                                        const Eigen::MatrixXd& h, int anchor,
                                        const std::vector<int>& positives,
                                        const std::vector<int>& negatives);

struct AmsGradOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  Eigen::MatrixXd first_moment;
  Eigen::MatrixXd second_moment;
  Eigen::MatrixXd max_second_moment;
  int64_t step = 0;

  static OptimizerState Zeros(Eigen::Index rows, Eigen::Index cols);
};

// Adam with the running maximum of the second moment in the denominator.
void AmsGradStep(OptimizerState& state, Eigen::MatrixXd& weights, const Eigen::MatrixXd& grad,
                 double learning_rate, const AmsGradOptions& options = {});

enum class Role : uint8_t { kTrain, kValidation, kTest, kUnused };

std::string ToString(Role role);
Role ParseRole(const std::string& name);

// One role per gold element.
struct ElementSplit {
  std::vector<Role> roles;

  std::vector<int> Members(Role role) const;
};

// Syntax splits whole sentences; pooled structures split elements.
ElementSplit MakeRandomSplit(const GoldStructure& gold, double validation_fraction,
                             double test_fraction, uint64_t seed);

// Rows of `acts` reordered to match the gold element order. Throws
// InvalidArgument listing (up to 10) missing ids.
Eigen::MatrixXd AlignActivations(const ActivationMatrix& acts, const GoldStructure& gold);

struct TrainResult {
  Probe probe;  // best validation loss across epochs
  Eigen::MatrixXd initial_weights;
  std::vector<double> train_loss;       // per epoch
  std::vector<double> validation_loss;  // per epoch
  int best_epoch = 0;                   // 1-based
};

TrainResult TrainProbe(const TrainConfig& config, const Eigen::MatrixXd& h,
                       const GoldStructure& gold, const ElementSplit& split);

// Linearly (or log-) spaced learning rates between the given bounds.
std::vector<double> LearningRateGrid(int count = 20, double lowest = 1e-7,
                                     double highest = 1e-2, bool log_spaced = false);

struct GridEntry {
  double learning_rate = 0;
  double validation_score = 0;  // higher is better
  double validation_loss = 0;
  std::string error;            // non-empty when that run failed
};

struct GridResult {
  TrainConfig best_config;
  std::vector<GridEntry> entries;
  TrainResult best_run;
};

// Validation metric: mean Spearman for distance probes, negative validation
// loss for contrastive ones. Ties go to the smaller learning rate.
double ValidationScore(const TrainResult& run, const Eigen::MatrixXd& h,
                       const GoldStructure& gold, const ElementSplit& split);

GridResult GridSearch(const TrainConfig& base, const Eigen::MatrixXd& h,
                      const GoldStructure& gold, const ElementSplit& split,
                      const std::vector<double>& learning_rates, int jobs = 1);

}  // namespace geoprobe

#endif  // GEOPROBE_PROBE_H_
