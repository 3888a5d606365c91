#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace ser {

// Fixed-length feature vectors with class indices in [0, n_classes).
struct LabeledVectors {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    int n_classes = 0;

    std::size_t size() const { return x.size(); }
    std::size_t dim() const { return x.empty() ? 0 : x[0].size(); }
};

// Common face of the baseline models. predict() is argmax of
// predict_proba() with ties broken toward the lowest class id.
class Classifier {
public:
    virtual ~Classifier() = default;
    virtual std::string kind() const = 0;
    virtual std::vector<double> predict_proba(const std::vector<double>& x) const = 0;
    int predict(const std::vector<double>& x) const;
};

int argmax_lowest(const std::vector<double>& scores);

// ---- decision tree ----------------------------------------------------

struct TreeNode {
    bool is_leaf = true;
    int feature = 0;
    double threshold = 0.0;
    std::vector<std::size_t> histogram;  // leaf class counts
    std::unique_ptr<TreeNode> left, right;
};

class DecisionTree : public Classifier {
public:
    std::string kind() const override { return "dt"; }
    std::vector<double> predict_proba(const std::vector<double>& x) const override;
    const TreeNode& root() const { return *root_; }

    // CART with Gini impurity. Candidate thresholds are midpoints of sorted
    // unique feature values; ties go to the lowest feature index, then the
    // lowest threshold. Recursion stops at purity, max_depth or min_leaf.
    static DecisionTree fit(const LabeledVectors& data, int max_depth, int min_leaf);

    std::unique_ptr<TreeNode> root_;
    int n_classes_ = 0;
};

// Exhaustive-search helper shared with the oracle tests: best (feature,
// threshold, gini) for one node over the given rows, optionally restricted
// to a feature subset.
struct SplitChoice {
    bool found = false;
    int feature = 0;
    double threshold = 0.0;
    double impurity = 0.0;  // weighted Gini of the two children
};
SplitChoice best_gini_split(const LabeledVectors& data, const std::vector<std::size_t>& rows,
                            const std::vector<int>& features);

// ---- Gaussian naive Bayes ----------------------------------------------

class GaussianNB : public Classifier {
public:
    std::string kind() const override { return "nb"; }
    std::vector<double> predict_proba(const std::vector<double>& x) const override;

    // Per-class feature means/variances (variance floor 1e-9) and priors.
    // Throws FitError if any class has fewer than 2 samples.
    static GaussianNB fit(const LabeledVectors& data);

    std::vector<double> log_prior_;
    std::vector<std::vector<double>> mean_;  // [class][feature]
    std::vector<std::vector<double>> var_;
};

// ---- random forest -------------------------------------------------------

class RandomForest : public Classifier {
public:
    std::string kind() const override { return "rf"; }
    std::vector<double> predict_proba(const std::vector<double>& x) const override;

    // Seeded bootstrap per tree and sqrt(d) feature subsets per split.
    // bootstrap=false with n_trees=1 reduces to DecisionTree::fit.
    static RandomForest fit(const LabeledVectors& data, int n_trees, std::uint64_t seed,
                            int max_depth = 32, int min_leaf = 1, bool bootstrap = true);

    std::vector<DecisionTree> trees_;
    int n_classes_ = 0;
};

// ---- linear SVM (one-vs-rest) --------------------------------------------

class LinearSvm : public Classifier {
public:
    std::string kind() const override { return "svm"; }
    std::vector<double> predict_proba(const std::vector<double>& x) const override;
    // Raw margins, one per class; prediction is their argmax.
    std::vector<double> margins(const std::vector<double>& x) const;

    // One binary hinge-loss classifier per class, trained by a seeded
    // Pegasos-style schedule with tail-iterate averaging. The bias rides as
    // an augmented constant feature. Throws FitError on single-class data.
    static LinearSvm fit(const LabeledVectors& data, double lambda, int epochs,
                         std::uint64_t seed);

    std::vector<std::vector<double>> w_;  // [class][dim + 1]
};

// ---- k-nearest neighbours --------------------------------------------

// Euclidean distances; distance ties keep input order, vote ties go to the
// lowest class id.
int knn_predict(const LabeledVectors& train, const std::vector<double>& query, int k);
std::vector<double> knn_proba(const LabeledVectors& train, const std::vector<double>& query,
                              int k);

class KnnClassifier : public Classifier {
public:
    KnnClassifier(LabeledVectors train, int k) : train_(std::move(train)), k_(k) {}
    std::string kind() const override { return "knn"; }
    std::vector<double> predict_proba(const std::vector<double>& x) const override {
        return knn_proba(train_, x, k_);
    }

    LabeledVectors train_;
    int k_ = 5;
};

// ---- ensembles ---------------------------------------------------------

// Modal label; ties go to the lowest class id.
int majority_vote(const std::vector<int>& predictions);

struct ClassifierSpec {
    std::string kind;  // svm | rf | dt | nb | knn
    // knobs; unused fields ignored per kind
    int max_depth = 32;
    int min_leaf = 1;
    int n_trees = 25;
    double svm_lambda = 1e-3;
    int svm_epochs = 200;
    int knn_k = 5;
};

std::unique_ptr<Classifier> fit_classifier(const ClassifierSpec& spec, const LabeledVectors& data,
                                           std::uint64_t seed);

// Majority voting over independently fit base models.
class VotingEnsemble : public Classifier {
public:
    std::string kind() const override { return "mv"; }
    std::vector<double> predict_proba(const std::vector<double>& x) const override;

    static VotingEnsemble fit(const LabeledVectors& data, const std::vector<ClassifierSpec>& bases,
                              std::uint64_t seed);

    std::vector<std::unique_ptr<Classifier>> members_;
    int n_classes_ = 0;
};

// Two-level stack: out-of-fold base-model class probabilities feed a
// multinomial logistic regression meta-learner; the final model uses bases
// refit on the full training set.
class StackingEnsemble : public Classifier {
public:
    std::string kind() const override { return "stck"; }
    std::vector<double> predict_proba(const std::vector<double>& x) const override;

    // Throws FitError if any training fold is missing a class.
    static StackingEnsemble fit(const LabeledVectors& data,
                                const std::vector<ClassifierSpec>& bases, int folds,
                                std::uint64_t seed);

    std::vector<std::unique_ptr<Classifier>> members_;
    std::vector<std::vector<double>> meta_w_;  // [class][n_base * n_classes + 1]
    int n_classes_ = 0;
};

// Multinomial logistic regression by full-batch gradient descent; used as
// the stacking meta-learner and exposed for its own tests.
std::vector<std::vector<double>> fit_multinomial_logistic(const LabeledVectors& data,
                                                          double learning_rate, int iterations,
                                                          double l2);
std::vector<double> multinomial_logistic_proba(const std::vector<std::vector<double>>& w,
                                               const std::vector<double>& x);

// ---- model files ---------------------------------------------------------

// SERM container with a classical-model JSON header; numeric payloads are
// float32 blobs. Only the model kinds above are supported.
void save_classical_model(const std::filesystem::path& path, const Classifier& model);
std::unique_ptr<Classifier> load_classical_model(const std::filesystem::path& path);

}  // namespace ser
