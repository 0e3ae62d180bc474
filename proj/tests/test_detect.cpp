#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "labeltrust/dataset.hpp"
#include "labeltrust/detect.hpp"
#include "labeltrust/features.hpp"
#include "test_util.hpp"

using namespace labeltrust;

namespace {

// Straight-line recomputation of trust scores from the per-model confidence
// matrices a detector retained in its diagnostics. Kept deliberately dumb and
// separate from the library code path.
std::vector<double> recompute_scores(const TrustScores& scores, const std::vector<int>& y,
                                     Probe probe, EnsembleKind ensemble) {
    const DetectorDiagnostics& diag = *scores.diagnostics;
    const std::size_t n = y.size();
    const bool negate = probe == Probe::Loss;

    auto probe_one = [&](const Eigen::MatrixXd& conf, std::size_t i) {
        const int label = y[i];
        const int C = static_cast<int>(conf.cols());
        double value = 0.0;
        if (probe == Probe::Margin) {
            double best_other = -1e300;
            for (int c = 0; c < C; ++c)
                if (c != label) best_other = std::max(best_other, conf(i, c));
            value = conf(i, label) - best_other;
        } else if (probe == Probe::Confidence) {
            value = conf(i, label);
        } else if (probe == Probe::Accuracy) {
            int best = 0;
            for (int c = 1; c < C; ++c)
                if (conf(i, c) > conf(i, best)) best = c;
            value = best == label ? 1.0 : 0.0;
        } else {
            value = -std::log(std::clamp(conf(i, label), 1e-15, 1.0 - 1e-15));
        }
        return negate ? -value : value;
    };

    std::vector<double> out(n, 0.0);
    if (ensemble == EnsembleKind::Independent) {
        std::vector<int> counts(n, 0);
        for (std::size_t b = 0; b < diag.model_confidences.size(); ++b) {
            for (std::size_t i = 0; i < n; ++i) {
                if (diag.in_bag[b][i]) continue;
                out[i] += probe_one(diag.model_confidences[b], i);
                counts[i]++;
            }
        }
        std::vector<double> defined;
        for (std::size_t i = 0; i < n; ++i)
            if (counts[i] > 0) defined.push_back(out[i] /= counts[i]);
        std::sort(defined.begin(), defined.end());
        const double median = defined.size() % 2 == 1
                                  ? defined[defined.size() / 2]
                                  : 0.5 * (defined[defined.size() / 2 - 1] +
                                           defined[defined.size() / 2]);
        for (std::size_t i = 0; i < n; ++i)
            if (counts[i] == 0) out[i] = median;
    } else {
        for (const auto& conf : diag.model_confidences)
            for (std::size_t i = 0; i < n; ++i) out[i] += probe_one(conf, i);
        for (std::size_t i = 0; i < n; ++i)
            out[i] /= static_cast<double>(diag.model_confidences.size());
    }
    return out;
}

struct ToyProblem {
    Eigen::MatrixXd X;
    std::vector<int> y;
    CalibrationData cal;
    int C = 2;
};

ToyProblem toy_problem(int n, std::uint64_t seed, int C = 2) {
    std::vector<double> priors(C, 1.0 / C);
    const Dataset train = make_blobs(n, priors, 1.2, seed, 2, 2.0);
    const Dataset noisy =
        apply_transition_noise(train, NoiseTransitionMatrix::uniform_flip(C, 0.2), seed + 1);
    const Dataset cal_ds = make_blobs(std::max(4 * C, n / 2), priors, 1.2, seed + 2, 2, 2.0);
    ToyProblem problem;
    problem.X = noisy.features;
    problem.y = noisy.observed_labels;
    problem.cal = {cal_ds.features, cal_ds.observed_labels, false};
    problem.C = C;
    return problem;
}

}  // namespace

TEST_CASE("probe values follow their definitions") {
    Eigen::RowVectorXd row(2);
    row << 0.9, 0.1;
    REQUIRE(probe_confidence_row(row, 0, Probe::Margin) == Catch::Approx(0.8));
    REQUIRE(probe_confidence_row(row, 0, Probe::Confidence) == Catch::Approx(0.9));
    REQUIRE(probe_confidence_row(row, 0, Probe::Accuracy) == 1.0);
    REQUIRE(probe_confidence_row(row, 0, Probe::Loss) == Catch::Approx(0.1053605).margin(1e-6));

    Eigen::RowVectorXd uniform(4);
    uniform.setConstant(0.25);
    REQUIRE(probe_confidence_row(uniform, 2, Probe::Margin) == Catch::Approx(0.0));
    REQUIRE(probe_confidence_row(uniform, 2, Probe::Confidence) == Catch::Approx(0.25));
    REQUIRE(probe_confidence_row(uniform, 2, Probe::Loss) == Catch::Approx(std::log(4.0)));

    Eigen::RowVectorXd wrong(2);
    wrong << 0.2, 0.8;
    REQUIRE(probe_confidence_row(wrong, 0, Probe::Margin) == Catch::Approx(-0.6));
    REQUIRE(probe_confidence_row(wrong, 0, Probe::Accuracy) == 0.0);
}

TEST_CASE("probe_example agrees with the matrix path") {
    LinearModel model;
    model.weights = test_util::random_matrix(3, 2, 5);
    model.bias = test_util::random_matrix(3, 1, 6).col(0);
    const Eigen::MatrixXd X = test_util::random_matrix(4, 2, 7);
    const Eigen::MatrixXd probs = model.predict_confidences(X);
    const std::vector<int> y = {0, 1, 2, 1};
    const auto values = probe_confidence_matrix(probs, y, Probe::Margin);
    for (int i = 0; i < 4; ++i)
        REQUIRE(probe_example(model, X.row(i), y[i], Probe::Margin) == Catch::Approx(values[i]));
}

TEST_CASE("aum mean over checkpoints from crafted margins") {
    // Two checkpoint confidence matrices with known margins 0.8 then 0.4:
    // the aggregated score is their mean, 0.6.
    TrustScores scores;
    auto diag = std::make_shared<DetectorDiagnostics>();
    Eigen::MatrixXd t1(1, 2), t2(1, 2);
    t1 << 0.9, 0.1;
    t2 << 0.7, 0.3;
    diag->model_confidences = {t1, t2};
    scores.diagnostics = diag;
    const auto recomputed = recompute_scores(scores, {0}, Probe::Margin, EnsembleKind::Progressive);
    REQUIRE(recomputed[0] == Catch::Approx(0.6));

    // Single checkpoint: the score is the margin itself.
    diag->model_confidences = {t1};
    const auto single = recompute_scores(scores, {0}, Probe::Margin, EnsembleKind::Progressive);
    REQUIRE(single[0] == Catch::Approx(0.8));
}

TEST_CASE("out-of-bag mean and fallback behavior") {
    // Example 0: out of bag in models 0 and 1 with confidences 0.7 and 0.5
    // -> 0.6. Example 1: in every bag -> median fallback.
    std::vector<std::vector<double>> per_model = {{0.7, 0.9}, {0.5, 0.8}, {0.1, 0.2}};
    std::vector<std::vector<std::uint8_t>> in_bag = {{0, 1}, {0, 1}, {1, 1}};
    TrustScores out;
    labeltrust::detail::aggregate_out_of_bag(per_model, in_bag, out);
    REQUIRE(out.scores[0] == Catch::Approx(0.6));
    REQUIRE(out.oob_counts[0] == 2);
    REQUIRE(out.flags[0] == 0);
    REQUIRE(out.scores[1] == Catch::Approx(0.6));  // median of the single defined score
    REQUIRE(out.oob_counts[1] == 0);
    REQUIRE(out.flags[1] == kTrustFlagMedianFallback);
}

TEST_CASE("expected out-of-bag count matches the sampling fraction") {
    const ToyProblem problem = toy_problem(1000, 50);
    DetectorSpec spec = DetectorSpec::cleanlab();
    spec.bags = 5;
    spec.bag_fraction = 0.632;
    spec.train.epochs = 2;
    const TrustScores scores = run_detector(problem.X, problem.y, problem.C, nullptr, spec);
    double mean_oob = 0.0;
    for (int c : scores.oob_counts) mean_oob += c;
    mean_oob /= scores.oob_counts.size();
    REQUIRE(mean_oob == Catch::Approx(5 * 0.368).margin(0.15));
}

TEST_CASE("named detectors match their spec wrappers") {
    const ToyProblem problem = toy_problem(60, 77);
    DetectorSpec spec = DetectorSpec::aum();
    spec.train.epochs = 4;
    spec.seed = 9;
    const TrustScores via_run = run_detector(problem.X, problem.y, problem.C, nullptr, spec);
    const TrustScores via_wrapper = score_aum(problem.X, problem.y, problem.C, nullptr, spec);
    REQUIRE(via_run.scores == via_wrapper.scores);

    DetectorSpec cl = DetectorSpec::cleanlab();
    cl.train.epochs = 3;
    cl.seed = 10;
    REQUIRE(run_detector(problem.X, problem.y, problem.C, nullptr, cl).scores ==
            score_cleanlab(problem.X, problem.y, problem.C, nullptr, cl).scores);
    DetectorSpec cons = DetectorSpec::consensus();
    cons.train.epochs = 3;
    cons.seed = 11;
    REQUIRE(run_detector(problem.X, problem.y, problem.C, nullptr, cons).scores ==
            score_consensus(problem.X, problem.y, problem.C, nullptr, cons).scores);
    DetectorSpec sl = DetectorSpec::small_loss();
    sl.train.epochs = 3;
    sl.seed = 12;
    REQUIRE(run_detector(problem.X, problem.y, problem.C, nullptr, sl).scores ==
            score_small_loss(problem.X, problem.y, problem.C, nullptr, sl).scores);
}

TEST_CASE("small loss ranking equals confidence ranking on the same model") {
    const ToyProblem problem = toy_problem(80, 91);
    DetectorSpec loss_spec = DetectorSpec::small_loss();
    loss_spec.train.epochs = 6;
    loss_spec.seed = 4;
    DetectorSpec conf_spec = loss_spec;
    conf_spec.probe = Probe::Confidence;
    conf_spec.custom = true;
    const TrustScores by_loss =
        run_detector(problem.X, problem.y, problem.C, nullptr, loss_spec);
    const TrustScores by_conf =
        run_detector(problem.X, problem.y, problem.C, nullptr, conf_spec);

    auto ranking = [](const std::vector<double>& scores) {
        std::vector<int> order(scores.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (scores[a] != scores[b]) return scores[a] < scores[b];
            return a < b;
        });
        return order;
    };
    REQUIRE(ranking(by_loss.scores) == ranking(by_conf.scores));
}

TEST_CASE("loss probe analytic values") {
    Eigen::MatrixXd conf(2, 2);
    conf << 1.0, 0.0,
            0.5, 0.5;
    const auto values = probe_confidence_matrix(conf, {0, 0}, Probe::Loss);
    REQUIRE(values[0] == Catch::Approx(-std::log(1.0 - 1e-15)).margin(1e-12));
    REQUIRE(values[1] == Catch::Approx(std::log(2.0)));
}

TEST_CASE("every named scorer matches its straight-line recomputation") {
    const ToyProblem problem = toy_problem(30, 13, 3);
    struct Case {
        DetectorSpec spec;
        Probe probe;
        EnsembleKind ensemble;
    };
    std::vector<Case> cases;
    {
        DetectorSpec aum = DetectorSpec::aum();
        aum.train.epochs = 3;  // T = 3 checkpoints
        cases.push_back({aum, Probe::Margin, EnsembleKind::Progressive});
        DetectorSpec cl = DetectorSpec::cleanlab();
        cl.bags = 4;
        cl.train.epochs = 2;
        cases.push_back({cl, Probe::Confidence, EnsembleKind::Independent});
        DetectorSpec cons = DetectorSpec::consensus();
        cons.bags = 4;
        cons.train.epochs = 2;
        cases.push_back({cons, Probe::Accuracy, EnsembleKind::Independent});
        DetectorSpec sl = DetectorSpec::small_loss();
        sl.train.epochs = 2;
        cases.push_back({sl, Probe::Loss, EnsembleKind::None});
    }
    for (auto& c : cases) {
        for (Addon addon : {Addon::Baseline, Addon::Adjust, Addon::Isotonic, Addon::Sigmoid}) {
            c.spec.addon = addon;
            c.spec.keep_diagnostics = true;
            c.spec.seed = 21;
            const TrustScores scores =
                run_detector(problem.X, problem.y, problem.C, &problem.cal, c.spec);
            const auto expect = recompute_scores(scores, problem.y, c.probe, c.ensemble);
            REQUIRE(scores.scores.size() == expect.size());
            for (std::size_t i = 0; i < expect.size(); ++i)
                REQUIRE(scores.scores[i] == Catch::Approx(expect[i]).margin(1e-12));
        }
    }
}

TEST_CASE("all detectors return n finite scores under every addon") {
    const ToyProblem problem = toy_problem(50, 29);
    for (const std::string name : {"aum", "cleanlab", "consensus", "small_loss"}) {
        for (Addon addon : {Addon::Baseline, Addon::Adjust, Addon::Isotonic, Addon::Sigmoid}) {
            DetectorSpec spec = DetectorSpec::named(name);
            spec.addon = addon;
            spec.train.epochs = 3;
            spec.bags = 3;
            const TrustScores scores =
                run_detector(problem.X, problem.y, problem.C, &problem.cal, spec);
            REQUIRE(scores.n() == 50);
            for (double v : scores.scores) REQUIRE(std::isfinite(v));
        }
    }
}

TEST_CASE("dispatch and custom combinations") {
    const ToyProblem problem = toy_problem(40, 37);

    // Calibration addon without a calibration set is a configuration error.
    DetectorSpec iso = DetectorSpec::aum();
    iso.addon = Addon::Isotonic;
    iso.train.epochs = 2;
    REQUIRE_THROWS_AS(run_detector(problem.X, problem.y, problem.C, nullptr, iso), ConfigError);

    // Custom (confidence, progressive, sum) with a single checkpoint equals
    // the confidence probe of the final model.
    DetectorSpec custom;
    custom.probe = Probe::Confidence;
    custom.ensemble = EnsembleKind::Progressive;
    custom.aggregation = Aggregation::Sum;
    custom.custom = true;
    custom.train.epochs = 5;
    custom.train.checkpoint_every = 5;  // exactly one snapshot
    custom.seed = 3;
    const TrustScores progressive =
        run_detector(problem.X, problem.y, problem.C, nullptr, custom);

    TrainConfig cfg = custom.train;
    cfg.seed = derive_seed(custom.seed, 0);
    const SgdResult fit = train_sgd(problem.X, problem.y, problem.C, cfg);
    const Eigen::MatrixXd conf = fit.model.predict_confidences(problem.X);
    for (int i = 0; i < 40; ++i)
        REQUIRE(progressive.scores[i] == Catch::Approx(conf(i, problem.y[i])).margin(1e-12));

    // Invalid combination without the custom flag.
    DetectorSpec invalid;
    invalid.probe = Probe::Confidence;
    invalid.ensemble = EnsembleKind::Progressive;
    invalid.aggregation = Aggregation::Sum;
    REQUIRE_THROWS_AS(run_detector(problem.X, problem.y, problem.C, nullptr, invalid),
                      ConfigError);

    // mean_oob requires an independent ensemble.
    DetectorSpec bad;
    bad.probe = Probe::Confidence;
    bad.ensemble = EnsembleKind::Progressive;
    bad.aggregation = Aggregation::MeanOutOfBag;
    bad.custom = true;
    REQUIRE_THROWS_AS(run_detector(problem.X, problem.y, problem.C, nullptr, bad), ConfigError);
}

TEST_CASE("baseline detectors never read the calibration set") {
    const ToyProblem problem = toy_problem(50, 43);
    CalibrationData poisoned = problem.cal;
    poisoned.X.setConstant(std::numeric_limits<double>::quiet_NaN());

    for (const std::string name : {"aum", "cleanlab", "consensus", "small_loss"}) {
        DetectorSpec spec = DetectorSpec::named(name);
        spec.train.epochs = 3;
        spec.bags = 3;
        spec.seed = 8;
        const TrustScores without =
            run_detector(problem.X, problem.y, problem.C, nullptr, spec);
        const TrustScores with_poison =
            run_detector(problem.X, problem.y, problem.C, &poisoned, spec);
        REQUIRE(without.scores == with_poison.scores);
    }
}

TEST_CASE("detector runs are deterministic in the seed") {
    const ToyProblem problem = toy_problem(60, 61);
    DetectorSpec spec = DetectorSpec::cleanlab();
    spec.train.epochs = 3;
    spec.seed = 123;
    const TrustScores a = run_detector(problem.X, problem.y, problem.C, nullptr, spec);
    const TrustScores b = run_detector(problem.X, problem.y, problem.C, nullptr, spec);
    REQUIRE(a.scores == b.scores);
    spec.seed = 124;
    const TrustScores c = run_detector(problem.X, problem.y, problem.C, nullptr, spec);
    REQUIRE(a.scores != c.scores);
}

TEST_CASE("detector spec json round trip") {
    DetectorSpec spec = DetectorSpec::consensus();
    spec.addon = Addon::Sigmoid;
    spec.bags = 7;
    spec.bag_fraction = 0.5;
    spec.train.epochs = 11;
    spec.train.learning_rate = 0.03;
    spec.seed = 99;
    const nlohmann::json doc = spec;
    const DetectorSpec back = doc.get<DetectorSpec>();
    REQUIRE(back.probe == spec.probe);
    REQUIRE(back.ensemble == spec.ensemble);
    REQUIRE(back.aggregation == spec.aggregation);
    REQUIRE(back.addon == spec.addon);
    REQUIRE(back.bags == spec.bags);
    REQUIRE(back.bag_fraction == spec.bag_fraction);
    REQUIRE(back.train.epochs == spec.train.epochs);
    REQUIRE(back.seed == spec.seed);
}

TEST_CASE("flipped examples earn lower margins than clean ones") {
    // Imbalanced two-moons with planted flips: the mean trust of flipped
    // examples must sit below the mean trust of clean examples.
    const Dataset moons = make_two_moons(100, 0.1, 0.15, 5);
    const Dataset flipped = flip_labels(moons, 5, 6);
    FeatureConfig fc;
    fc.use_rff = true;
    fc.rff_dim = 100;
    fc.seed = 2;
    const FeaturePipeline features = fit_feature_pipeline(flipped, fc);
    const Eigen::MatrixXd X = features.transform(flipped);

    DetectorSpec spec = DetectorSpec::aum();
    spec.train.epochs = 15;
    spec.train.learning_rate = 0.5;
    spec.seed = 7;
    const TrustScores scores = run_detector(X, flipped.observed_labels, 2, nullptr, spec);

    double flipped_mean = 0.0, clean_mean = 0.0;
    int flipped_count = 0, clean_count = 0;
    for (int i = 0; i < 100; ++i) {
        if ((*flipped.mislabel_mask)[i]) {
            flipped_mean += scores.scores[i];
            flipped_count++;
        } else {
            clean_mean += scores.scores[i];
            clean_count++;
        }
    }
    REQUIRE(flipped_mean / flipped_count < clean_mean / clean_count);
}
