#include "ser/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "ser/errors.hpp"
#include "ser/rng.hpp"
#include "ser/serm.hpp"

using nlohmann::json;

namespace ser {

namespace {

constexpr double kTwoPi = 6.283185307179586;

double gini_from_counts(const std::vector<std::size_t>& counts, std::size_t total) {
    if (total == 0) return 0.0;
    double acc = 0.0;
    for (auto c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        acc += p * p;
    }
    return 1.0 - acc;
}

std::vector<std::size_t> class_histogram(const LabeledVectors& data,
                                         const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> hist(static_cast<std::size_t>(data.n_classes), 0);
    for (auto r : rows) ++hist[static_cast<std::size_t>(data.y[r])];
    return hist;
}

void check_labels(const LabeledVectors& data) {
    if (data.n_classes < 1) throw FitError("n_classes must be >= 1");
    if (data.x.size() != data.y.size()) throw FitError("feature/label count mismatch");
    for (int label : data.y) {
        if (label < 0 || label >= data.n_classes) {
            throw FitError("label " + std::to_string(label) + " outside [0, n_classes)");
        }
    }
}

std::unique_ptr<TreeNode> grow_tree(const LabeledVectors& data, std::vector<std::size_t> rows,
                                    int depth, int max_depth, int min_leaf, Rng* feature_rng,
                                    int subset_size) {
    auto node = std::make_unique<TreeNode>();
    node->histogram = class_histogram(data, rows);

    const std::size_t positive_classes =
        static_cast<std::size_t>(std::count_if(node->histogram.begin(), node->histogram.end(),
                                               [](std::size_t c) { return c > 0; }));
    if (positive_classes <= 1 || depth >= max_depth ||
        rows.size() < 2 * static_cast<std::size_t>(min_leaf)) {
        return node;
    }

    std::vector<int> features;
    const int d = static_cast<int>(data.dim());
    if (feature_rng && subset_size < d) {
        // Sample-without-replacement, then sort so tie-breaking stays by
        // lowest feature index.
        std::set<int> picked;
        while (static_cast<int>(picked.size()) < subset_size) {
            picked.insert(static_cast<int>(feature_rng->bounded(static_cast<std::uint64_t>(d))));
        }
        features.assign(picked.begin(), picked.end());
    } else {
        features.resize(static_cast<std::size_t>(d));
        std::iota(features.begin(), features.end(), 0);
    }

    SplitChoice choice = best_gini_split(data, rows, features);
    if (!choice.found) return node;

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows) {
        (data.x[r][static_cast<std::size_t>(choice.feature)] < choice.threshold ? left_rows
                                                                                : right_rows)
            .push_back(r);
    }
    if (left_rows.size() < static_cast<std::size_t>(min_leaf) ||
        right_rows.size() < static_cast<std::size_t>(min_leaf)) {
        return node;
    }

    node->is_leaf = false;
    node->feature = choice.feature;
    node->threshold = choice.threshold;
    node->left = grow_tree(data, std::move(left_rows), depth + 1, max_depth, min_leaf,
                           feature_rng, subset_size);
    node->right = grow_tree(data, std::move(right_rows), depth + 1, max_depth, min_leaf,
                            feature_rng, subset_size);
    return node;
}

const TreeNode* descend(const TreeNode* node, const std::vector<double>& x) {
    while (!node->is_leaf) {
        node = x[static_cast<std::size_t>(node->feature)] < node->threshold ? node->left.get()
                                                                            : node->right.get();
    }
    return node;
}

std::vector<double> histogram_proba(const std::vector<std::size_t>& hist) {
    const double total = static_cast<double>(
        std::accumulate(hist.begin(), hist.end(), std::size_t{0}));
    std::vector<double> p(hist.size(), 0.0);
    if (total > 0) {
        for (std::size_t c = 0; c < hist.size(); ++c) p[c] = static_cast<double>(hist[c]) / total;
    }
    return p;
}

std::vector<double> softmax(const std::vector<double>& scores) {
    std::vector<double> p(scores.size());
    const double mx = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(scores[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

}  // namespace

int argmax_lowest(const std::vector<double>& scores) {
    int best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

int Classifier::predict(const std::vector<double>& x) const {
    return argmax_lowest(predict_proba(x));
}

SplitChoice best_gini_split(const LabeledVectors& data, const std::vector<std::size_t>& rows,
                            const std::vector<int>& features) {
    SplitChoice best;
    const std::size_t n = rows.size();
    std::vector<std::size_t> sorted = rows;
    std::vector<std::size_t> left_counts(static_cast<std::size_t>(data.n_classes));
    const auto total_counts = class_histogram(data, rows);

    for (int f : features) {
        const std::size_t fi = static_cast<std::size_t>(f);
        std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
            if (data.x[a][fi] != data.x[b][fi]) return data.x[a][fi] < data.x[b][fi];
            return a < b;
        });
        std::fill(left_counts.begin(), left_counts.end(), std::size_t{0});
        for (std::size_t i = 1; i < n; ++i) {
            ++left_counts[static_cast<std::size_t>(data.y[sorted[i - 1]])];
            const double prev = data.x[sorted[i - 1]][fi];
            const double cur = data.x[sorted[i]][fi];
            if (prev == cur) continue;
            const double threshold = (prev + cur) / 2.0;

            std::vector<std::size_t> right_counts(total_counts);
            for (std::size_t c = 0; c < right_counts.size(); ++c) right_counts[c] -= left_counts[c];
            const double impurity =
                (static_cast<double>(i) * gini_from_counts(left_counts, i) +
                 static_cast<double>(n - i) * gini_from_counts(right_counts, n - i)) /
                static_cast<double>(n);
            // Features ascend and thresholds ascend within a feature, so a
            // strict comparison implements the documented tie-breaks.
            if (!best.found || impurity < best.impurity) {
                best.found = true;
                best.feature = f;
                best.threshold = threshold;
                best.impurity = impurity;
            }
        }
    }
    return best;
}

std::vector<double> DecisionTree::predict_proba(const std::vector<double>& x) const {
    return histogram_proba(descend(root_.get(), x)->histogram);
}

DecisionTree DecisionTree::fit(const LabeledVectors& data, int max_depth, int min_leaf) {
    check_labels(data);
    if (data.size() == 0) throw FitError("cannot fit a tree on an empty dataset");
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    DecisionTree tree;
    tree.n_classes_ = data.n_classes;
    tree.root_ = grow_tree(data, std::move(rows), 0, max_depth, min_leaf, nullptr, 0);
    return tree;
}

std::vector<double> GaussianNB::predict_proba(const std::vector<double>& x) const {
    std::vector<double> log_post(log_prior_.size());
    for (std::size_t c = 0; c < log_prior_.size(); ++c) {
        double acc = log_prior_[c];
        for (std::size_t f = 0; f < x.size(); ++f) {
            const double var = var_[c][f];
            const double d = x[f] - mean_[c][f];
            acc += -0.5 * std::log(kTwoPi * var) - d * d / (2.0 * var);
        }
        log_post[c] = acc;
    }
    return softmax(log_post);
}

GaussianNB GaussianNB::fit(const LabeledVectors& data) {
    check_labels(data);
    const std::size_t d = data.dim();
    const std::size_t k = static_cast<std::size_t>(data.n_classes);

    std::vector<std::size_t> counts(k, 0);
    for (int label : data.y) ++counts[static_cast<std::size_t>(label)];
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] < 2) {
            throw FitError("gaussian NB needs >= 2 samples per class; class " + std::to_string(c) +
                           " has " + std::to_string(counts[c]));
        }
    }

    GaussianNB nb;
    nb.log_prior_.resize(k);
    nb.mean_.assign(k, std::vector<double>(d, 0.0));
    nb.var_.assign(k, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t c = static_cast<std::size_t>(data.y[i]);
        for (std::size_t f = 0; f < d; ++f) nb.mean_[c][f] += data.x[i][f];
    }
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t f = 0; f < d; ++f) nb.mean_[c][f] /= static_cast<double>(counts[c]);
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t c = static_cast<std::size_t>(data.y[i]);
        for (std::size_t f = 0; f < d; ++f) {
            const double diff = data.x[i][f] - nb.mean_[c][f];
            nb.var_[c][f] += diff * diff;
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        nb.log_prior_[c] = std::log(static_cast<double>(counts[c]) /
                                    static_cast<double>(data.size()));
        for (std::size_t f = 0; f < d; ++f) {
            nb.var_[c][f] = std::max(nb.var_[c][f] / static_cast<double>(counts[c]), 1e-9);
        }
    }
    return nb;
}

std::vector<double> RandomForest::predict_proba(const std::vector<double>& x) const {
    std::vector<double> votes(static_cast<std::size_t>(n_classes_), 0.0);
    for (const auto& tree : trees_) {
        votes[static_cast<std::size_t>(tree.predict(x))] += 1.0;
    }
    for (auto& v : votes) v /= static_cast<double>(trees_.size());
    return votes;
}

RandomForest RandomForest::fit(const LabeledVectors& data, int n_trees, std::uint64_t seed,
                               int max_depth, int min_leaf, bool bootstrap) {
    check_labels(data);
    if (n_trees < 1) throw FitError("random forest needs n_trees >= 1");
    if (data.size() == 0) throw FitError("cannot fit a forest on an empty dataset");

    RandomForest forest;
    forest.n_classes_ = data.n_classes;
    const int d = static_cast<int>(data.dim());
    const int subset = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(d))));

    for (int t = 0; t < n_trees; ++t) {
        Rng rng = Rng::substream(seed, 0xf0000 + static_cast<std::uint64_t>(t));
        std::vector<std::size_t> rows;
        if (bootstrap) {
            rows.reserve(data.size());
            for (std::size_t i = 0; i < data.size(); ++i) {
                rows.push_back(static_cast<std::size_t>(rng.bounded(data.size())));
            }
        } else {
            rows.resize(data.size());
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        DecisionTree tree;
        tree.n_classes_ = data.n_classes;
        // bootstrap=false degrades to plain CART: all rows, all features.
        tree.root_ = grow_tree(data, std::move(rows), 0, max_depth, min_leaf,
                               bootstrap ? &rng : nullptr, bootstrap ? subset : d);
        forest.trees_.push_back(std::move(tree));
    }
    return forest;
}

std::vector<double> LinearSvm::margins(const std::vector<double>& x) const {
    std::vector<double> out(w_.size());
    for (std::size_t c = 0; c < w_.size(); ++c) {
        double acc = w_[c].back();  // bias on the augmented constant feature
        for (std::size_t f = 0; f < x.size(); ++f) acc += w_[c][f] * x[f];
        out[c] = acc;
    }
    return out;
}

std::vector<double> LinearSvm::predict_proba(const std::vector<double>& x) const {
    return softmax(margins(x));
}

LinearSvm LinearSvm::fit(const LabeledVectors& data, double lambda, int epochs,
                         std::uint64_t seed) {
    check_labels(data);
    std::set<int> present(data.y.begin(), data.y.end());
    if (present.size() < 2) throw FitError("linear SVM needs at least 2 classes present");
    if (lambda <= 0.0 || epochs < 1) throw FitError("svm needs lambda > 0 and epochs >= 1");

    const std::size_t d = data.dim();
    const std::size_t n = data.size();
    LinearSvm svm;
    svm.w_.assign(static_cast<std::size_t>(data.n_classes), std::vector<double>(d + 1, 0.0));

    for (int c = 0; c < data.n_classes; ++c) {
        Rng rng = Rng::substream(seed, 0x57b0 + static_cast<std::uint64_t>(c));
        std::vector<double> w(d + 1, 0.0);
        std::vector<double> w_sum(d + 1, 0.0);
        const std::size_t total_steps = static_cast<std::size_t>(epochs) * n;
        std::size_t averaged = 0;
        for (std::size_t t = 1; t <= total_steps; ++t) {
            const std::size_t i = static_cast<std::size_t>(rng.bounded(n));
            const double y = data.y[i] == c ? 1.0 : -1.0;
            double margin = w[d];
            for (std::size_t f = 0; f < d; ++f) margin += w[f] * data.x[i][f];

            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const double shrink = 1.0 - eta * lambda;
            for (auto& v : w) v *= shrink;
            if (y * margin < 1.0) {
                for (std::size_t f = 0; f < d; ++f) w[f] += eta * y * data.x[i][f];
                w[d] += eta * y;
            }
            if (t > total_steps / 2) {
                for (std::size_t f = 0; f <= d; ++f) w_sum[f] += w[f];
                ++averaged;
            }
        }
        for (std::size_t f = 0; f <= d; ++f) {
            svm.w_[static_cast<std::size_t>(c)][f] = w_sum[f] / static_cast<double>(averaged);
        }
    }
    return svm;
}

std::vector<double> knn_proba(const LabeledVectors& train, const std::vector<double>& query,
                              int k) {
    if (k < 1 || static_cast<std::size_t>(k) > train.size()) {
        throw ConfigError("knn: k must be in [1, train size]");
    }
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        double acc = 0.0;
        for (std::size_t f = 0; f < query.size(); ++f) {
            const double diff = train.x[i][f] - query[f];
            acc += diff * diff;
        }
        dist.emplace_back(acc, i);
    }
    // Stable sort on distance alone keeps input order for exact ties.
    std::stable_sort(dist.begin(), dist.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<double> votes(static_cast<std::size_t>(train.n_classes), 0.0);
    for (int i = 0; i < k; ++i) {
        votes[static_cast<std::size_t>(train.y[dist[static_cast<std::size_t>(i)].second])] += 1.0;
    }
    for (auto& v : votes) v /= static_cast<double>(k);
    return votes;
}

int knn_predict(const LabeledVectors& train, const std::vector<double>& query, int k) {
    return argmax_lowest(knn_proba(train, query, k));
}

int majority_vote(const std::vector<int>& predictions) {
    if (predictions.empty()) throw ConfigError("majority_vote needs at least one vote");
    int max_label = *std::max_element(predictions.begin(), predictions.end());
    std::vector<double> counts(static_cast<std::size_t>(max_label) + 1, 0.0);
    for (int p : predictions) {
        if (p < 0) throw ConfigError("majority_vote: negative label");
        counts[static_cast<std::size_t>(p)] += 1.0;
    }
    return argmax_lowest(counts);
}

std::unique_ptr<Classifier> fit_classifier(const ClassifierSpec& spec, const LabeledVectors& data,
                                           std::uint64_t seed) {
    if (spec.kind == "dt") {
        return std::make_unique<DecisionTree>(DecisionTree::fit(data, spec.max_depth,
                                                                spec.min_leaf));
    }
    if (spec.kind == "nb") {
        return std::make_unique<GaussianNB>(GaussianNB::fit(data));
    }
    if (spec.kind == "rf") {
        return std::make_unique<RandomForest>(
            RandomForest::fit(data, spec.n_trees, seed, spec.max_depth, spec.min_leaf));
    }
    if (spec.kind == "svm") {
        return std::make_unique<LinearSvm>(
            LinearSvm::fit(data, spec.svm_lambda, spec.svm_epochs, seed));
    }
    if (spec.kind == "knn") {
        return std::make_unique<KnnClassifier>(data, spec.knn_k);
    }
    throw ConfigError("unknown classifier kind '" + spec.kind + "'");
}

std::vector<double> VotingEnsemble::predict_proba(const std::vector<double>& x) const {
    std::vector<double> votes(static_cast<std::size_t>(n_classes_), 0.0);
    for (const auto& m : members_) votes[static_cast<std::size_t>(m->predict(x))] += 1.0;
    for (auto& v : votes) v /= static_cast<double>(members_.size());
    return votes;
}

VotingEnsemble VotingEnsemble::fit(const LabeledVectors& data,
                                   const std::vector<ClassifierSpec>& bases, std::uint64_t seed) {
    if (bases.size() < 2) throw FitError("voting ensemble needs >= 2 base learners");
    VotingEnsemble mv;
    mv.n_classes_ = data.n_classes;
    for (std::size_t b = 0; b < bases.size(); ++b) {
        mv.members_.push_back(fit_classifier(bases[b], data, seed + 101 * (b + 1)));
    }
    return mv;
}

std::vector<std::vector<double>> fit_multinomial_logistic(const LabeledVectors& data,
                                                          double learning_rate, int iterations,
                                                          double l2) {
    check_labels(data);
    const std::size_t d = data.dim();
    const std::size_t k = static_cast<std::size_t>(data.n_classes);
    const std::size_t n = data.size();
    std::vector<std::vector<double>> w(k, std::vector<double>(d + 1, 0.0));
    std::vector<std::vector<double>> grad(k, std::vector<double>(d + 1, 0.0));

    for (int it = 0; it < iterations; ++it) {
        for (auto& row : grad) std::fill(row.begin(), row.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> scores(k);
            for (std::size_t c = 0; c < k; ++c) {
                double acc = w[c][d];
                for (std::size_t f = 0; f < d; ++f) acc += w[c][f] * data.x[i][f];
                scores[c] = acc;
            }
            const auto p = softmax(scores);
            for (std::size_t c = 0; c < k; ++c) {
                const double err = p[c] - (static_cast<std::size_t>(data.y[i]) == c ? 1.0 : 0.0);
                for (std::size_t f = 0; f < d; ++f) grad[c][f] += err * data.x[i][f];
                grad[c][d] += err;
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t f = 0; f <= d; ++f) {
                w[c][f] -= learning_rate * (grad[c][f] / static_cast<double>(n) + l2 * w[c][f]);
            }
        }
    }
    return w;
}

std::vector<double> multinomial_logistic_proba(const std::vector<std::vector<double>>& w,
                                               const std::vector<double>& x) {
    std::vector<double> scores(w.size());
    const std::size_t d = x.size();
    for (std::size_t c = 0; c < w.size(); ++c) {
        double acc = w[c][d];
        for (std::size_t f = 0; f < d; ++f) acc += w[c][f] * x[f];
        scores[c] = acc;
    }
    return softmax(scores);
}

std::vector<double> StackingEnsemble::predict_proba(const std::vector<double>& x) const {
    std::vector<double> meta_in;
    meta_in.reserve(members_.size() * static_cast<std::size_t>(n_classes_));
    for (const auto& m : members_) {
        const auto p = m->predict_proba(x);
        meta_in.insert(meta_in.end(), p.begin(), p.end());
    }
    return multinomial_logistic_proba(meta_w_, meta_in);
}

StackingEnsemble StackingEnsemble::fit(const LabeledVectors& data,
                                       const std::vector<ClassifierSpec>& bases, int folds,
                                       std::uint64_t seed) {
    check_labels(data);
    if (folds < 2) throw ConfigError("stacking needs folds >= 2");
    if (bases.empty()) throw FitError("stacking needs at least one base learner");
    const std::size_t k = static_cast<std::size_t>(data.n_classes);
    const std::size_t n = data.size();

    // Stratified fold assignment: per class, shuffle then deal round-robin.
    std::vector<int> fold_of(n, 0);
    for (int c = 0; c < data.n_classes; ++c) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i) {
            if (data.y[i] == c) rows.push_back(i);
        }
        Rng rng = Rng::substream(seed, 0xf01d + static_cast<std::uint64_t>(c));
        rng.shuffle(rows);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            fold_of[rows[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
        }
    }

    LabeledVectors meta;
    meta.n_classes = data.n_classes;
    meta.x.assign(n, std::vector<double>(bases.size() * k, 0.0));
    meta.y = data.y;

    for (int f = 0; f < folds; ++f) {
        LabeledVectors fold_train;
        fold_train.n_classes = data.n_classes;
        std::vector<std::size_t> held_out;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[i] == f) {
                held_out.push_back(i);
            } else {
                fold_train.x.push_back(data.x[i]);
                fold_train.y.push_back(data.y[i]);
            }
        }
        std::set<int> train_classes(fold_train.y.begin(), fold_train.y.end());
        if (static_cast<int>(train_classes.size()) != data.n_classes) {
            throw FitError("stacking fold " + std::to_string(f) +
                           " is missing a class in its training part");
        }
        for (std::size_t b = 0; b < bases.size(); ++b) {
            auto model = fit_classifier(bases[b], fold_train,
                                        seed + 733 * (b + 1) + static_cast<std::uint64_t>(f));
            for (auto i : held_out) {
                const auto p = model->predict_proba(data.x[i]);
                std::copy(p.begin(), p.end(), meta.x[i].begin() + static_cast<std::ptrdiff_t>(b * k));
            }
        }
    }

    StackingEnsemble stack;
    stack.n_classes_ = data.n_classes;
    stack.meta_w_ = fit_multinomial_logistic(meta, 0.5, 300, 1e-4);
    for (std::size_t b = 0; b < bases.size(); ++b) {
        stack.members_.push_back(fit_classifier(bases[b], data, seed + 733 * (b + 1)));
    }
    return stack;
}

// ---- serialization -------------------------------------------------------

namespace {

json tree_to_json(const TreeNode& node) {
    json j;
    if (node.is_leaf) {
        j["leaf"] = node.histogram;
    } else {
        j["feature"] = node.feature;
        j["threshold"] = node.threshold;
        j["left"] = tree_to_json(*node.left);
        j["right"] = tree_to_json(*node.right);
    }
    return j;
}

std::unique_ptr<TreeNode> tree_from_json(const json& j) {
    auto node = std::make_unique<TreeNode>();
    if (j.contains("leaf")) {
        node->histogram = j.at("leaf").get<std::vector<std::size_t>>();
    } else {
        node->is_leaf = false;
        node->feature = j.at("feature").get<int>();
        node->threshold = j.at("threshold").get<double>();
        node->left = tree_from_json(j.at("left"));
        node->right = tree_from_json(j.at("right"));
        // leaves carry the histograms; internal nodes only route
        node->histogram.clear();
    }
    return node;
}

std::vector<float> to_f32(const std::vector<double>& v) {
    return {v.begin(), v.end()};
}

std::vector<double> to_f64(const std::vector<float>& v) {
    return {v.begin(), v.end()};
}

json model_to_json(const Classifier& model, std::vector<std::vector<float>>& blobs);

json members_to_json(const std::vector<std::unique_ptr<Classifier>>& members,
                     std::vector<std::vector<float>>& blobs) {
    json arr = json::array();
    for (const auto& m : members) arr.push_back(model_to_json(*m, blobs));
    return arr;
}

json model_to_json(const Classifier& model, std::vector<std::vector<float>>& blobs) {
    json j;
    j["kind"] = model.kind();
    if (const auto* dt = dynamic_cast<const DecisionTree*>(&model)) {
        j["n_classes"] = dt->n_classes_;
        j["tree"] = tree_to_json(*dt->root_);
    } else if (const auto* nb = dynamic_cast<const GaussianNB*>(&model)) {
        const std::size_t k = nb->log_prior_.size();
        const std::size_t d = k ? nb->mean_[0].size() : 0;
        j["n_classes"] = k;
        j["dim"] = d;
        blobs.push_back(to_f32(nb->log_prior_));
        std::vector<double> means, vars;
        for (std::size_t c = 0; c < k; ++c) {
            means.insert(means.end(), nb->mean_[c].begin(), nb->mean_[c].end());
            vars.insert(vars.end(), nb->var_[c].begin(), nb->var_[c].end());
        }
        blobs.push_back(to_f32(means));
        blobs.push_back(to_f32(vars));
    } else if (const auto* rf = dynamic_cast<const RandomForest*>(&model)) {
        j["n_classes"] = rf->n_classes_;
        json trees = json::array();
        for (const auto& t : rf->trees_) trees.push_back(tree_to_json(*t.root_));
        j["trees"] = trees;
    } else if (const auto* svm = dynamic_cast<const LinearSvm*>(&model)) {
        j["n_classes"] = svm->w_.size();
        j["dim"] = svm->w_.empty() ? 0 : svm->w_[0].size() - 1;
        std::vector<double> flat;
        for (const auto& row : svm->w_) flat.insert(flat.end(), row.begin(), row.end());
        blobs.push_back(to_f32(flat));
    } else if (const auto* knn = dynamic_cast<const KnnClassifier*>(&model)) {
        j["n_classes"] = knn->train_.n_classes;
        j["dim"] = knn->train_.dim();
        j["k"] = knn->k_;
        j["labels"] = knn->train_.y;
        std::vector<double> flat;
        for (const auto& row : knn->train_.x) flat.insert(flat.end(), row.begin(), row.end());
        blobs.push_back(to_f32(flat));
    } else if (const auto* mv = dynamic_cast<const VotingEnsemble*>(&model)) {
        j["n_classes"] = mv->n_classes_;
        j["members"] = members_to_json(mv->members_, blobs);
    } else if (const auto* st = dynamic_cast<const StackingEnsemble*>(&model)) {
        j["n_classes"] = st->n_classes_;
        j["members"] = members_to_json(st->members_, blobs);
        j["meta_dim"] = st->meta_w_.empty() ? 0 : st->meta_w_[0].size();
        std::vector<double> flat;
        for (const auto& row : st->meta_w_) flat.insert(flat.end(), row.begin(), row.end());
        blobs.push_back(to_f32(flat));
    } else {
        throw ConfigError("cannot serialize classifier kind '" + model.kind() + "'");
    }
    return j;
}

std::unique_ptr<Classifier> model_from_json(const json& j,
                                            const std::vector<std::vector<float>>& blobs,
                                            std::size_t& blob_i);

std::vector<std::unique_ptr<Classifier>> members_from_json(
    const json& arr, const std::vector<std::vector<float>>& blobs, std::size_t& blob_i) {
    std::vector<std::unique_ptr<Classifier>> out;
    for (const auto& jm : arr) out.push_back(model_from_json(jm, blobs, blob_i));
    return out;
}

std::unique_ptr<Classifier> model_from_json(const json& j,
                                            const std::vector<std::vector<float>>& blobs,
                                            std::size_t& blob_i) {
    const std::string kind = j.at("kind").get<std::string>();
    auto next_blob = [&]() -> const std::vector<float>& {
        if (blob_i >= blobs.size()) throw ParseError("classical model: missing payload blob");
        return blobs[blob_i++];
    };

    if (kind == "dt") {
        auto dt = std::make_unique<DecisionTree>();
        dt->n_classes_ = j.at("n_classes").get<int>();
        dt->root_ = tree_from_json(j.at("tree"));
        return dt;
    }
    if (kind == "nb") {
        auto nb = std::make_unique<GaussianNB>();
        const std::size_t k = j.at("n_classes").get<std::size_t>();
        const std::size_t d = j.at("dim").get<std::size_t>();
        nb->log_prior_ = to_f64(next_blob());
        const auto means = to_f64(next_blob());
        const auto vars = to_f64(next_blob());
        if (means.size() != k * d || vars.size() != k * d || nb->log_prior_.size() != k) {
            throw ParseError("nb payload size mismatch");
        }
        for (std::size_t c = 0; c < k; ++c) {
            nb->mean_.emplace_back(means.begin() + static_cast<std::ptrdiff_t>(c * d),
                                   means.begin() + static_cast<std::ptrdiff_t>((c + 1) * d));
            nb->var_.emplace_back(vars.begin() + static_cast<std::ptrdiff_t>(c * d),
                                  vars.begin() + static_cast<std::ptrdiff_t>((c + 1) * d));
        }
        return nb;
    }
    if (kind == "rf") {
        auto rf = std::make_unique<RandomForest>();
        rf->n_classes_ = j.at("n_classes").get<int>();
        for (const auto& jt : j.at("trees")) {
            DecisionTree tree;
            tree.n_classes_ = rf->n_classes_;
            tree.root_ = tree_from_json(jt);
            rf->trees_.push_back(std::move(tree));
        }
        return rf;
    }
    if (kind == "svm") {
        auto svm = std::make_unique<LinearSvm>();
        const std::size_t k = j.at("n_classes").get<std::size_t>();
        const std::size_t cols = j.at("dim").get<std::size_t>() + 1;
        const auto flat = to_f64(next_blob());
        if (flat.size() != k * cols) throw ParseError("svm payload size mismatch");
        for (std::size_t c = 0; c < k; ++c) {
            svm->w_.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(c * cols),
                                 flat.begin() + static_cast<std::ptrdiff_t>((c + 1) * cols));
        }
        return svm;
    }
    if (kind == "knn") {
        LabeledVectors train;
        train.n_classes = j.at("n_classes").get<int>();
        train.y = j.at("labels").get<std::vector<int>>();
        const std::size_t d = j.at("dim").get<std::size_t>();
        const auto flat = to_f64(next_blob());
        if (flat.size() != train.y.size() * d) throw ParseError("knn payload size mismatch");
        for (std::size_t i = 0; i < train.y.size(); ++i) {
            train.x.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(i * d),
                                 flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
        }
        return std::make_unique<KnnClassifier>(std::move(train), j.at("k").get<int>());
    }
    if (kind == "mv") {
        auto mv = std::make_unique<VotingEnsemble>();
        mv->n_classes_ = j.at("n_classes").get<int>();
        mv->members_ = members_from_json(j.at("members"), blobs, blob_i);
        return mv;
    }
    if (kind == "stck") {
        auto st = std::make_unique<StackingEnsemble>();
        st->n_classes_ = j.at("n_classes").get<int>();
        st->members_ = members_from_json(j.at("members"), blobs, blob_i);
        const std::size_t cols = j.at("meta_dim").get<std::size_t>();
        const auto flat = to_f64(next_blob());
        if (cols == 0 || flat.size() % cols != 0) throw ParseError("stacking payload size mismatch");
        for (std::size_t c = 0; c < flat.size() / cols; ++c) {
            st->meta_w_.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(c * cols),
                                     flat.begin() + static_cast<std::ptrdiff_t>((c + 1) * cols));
        }
        return st;
    }
    throw ParseError("unknown classical model kind '" + kind + "'");
}

}  // namespace

void save_classical_model(const std::filesystem::path& path, const Classifier& model) {
    std::vector<std::vector<float>> blobs;
    json header;
    header["schema_version"] = 1;
    header["kind"] = "classical-model";
    header["model"] = model_to_json(model, blobs);
    write_serm(path, header, blobs);
}

std::unique_ptr<Classifier> load_classical_model(const std::filesystem::path& path) {
    auto [header, blobs] = read_serm(path);
    if (header.value("kind", "") != "classical-model") {
        throw ParseError(path.string() + " is not a classical model file");
    }
    std::size_t blob_i = 0;
    return model_from_json(header.at("model"), blobs, blob_i);
}

}  // namespace ser
