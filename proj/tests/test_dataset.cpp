#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "labeltrust/dataset.hpp"
#include "labeltrust/io.hpp"
#include "test_util.hpp"

using namespace labeltrust;
using test_util::TempFile;

TEST_CASE("load_csv maps labels lexicographically") {
    TempFile csv("x,label\n1.0,a\n2.0,b\n3.0,a\n4.0,b\n");
    const Dataset ds = load_csv(csv.path(), "label");
    REQUIRE(ds.num_classes == 2);
    REQUIRE(ds.observed_labels == std::vector<int>{0, 1, 0, 1});
    REQUIRE(ds.label_names == std::vector<std::string>{"a", "b"});
    REQUIRE(ds.n() == 4);
    REQUIRE(ds.has_numeric_features());
}

TEST_CASE("load_csv orders 3-class labels by value, not appearance") {
    TempFile csv("x,label\n1,z\n2,y\n3,x\n");
    const Dataset ds = load_csv(csv.path(), "label");
    REQUIRE(ds.label_names == std::vector<std::string>{"x", "y", "z"});
    REQUIRE(ds.observed_labels == std::vector<int>{2, 1, 0});
}

TEST_CASE("load_csv accepts constant numeric columns") {
    TempFile csv("x,y,label\n5,1,a\n5,2,b\n5,3,a\n");
    const Dataset ds = load_csv(csv.path(), "label");
    REQUIRE(ds.columns[0].kind == ColumnKind::Numeric);
    REQUIRE(ds.columns[0].numeric == std::vector<double>{5, 5, 5});
}

TEST_CASE("load_csv detects categorical columns") {
    TempFile csv("color,label\nred,a\nblue,b\nred,a\n");
    const Dataset ds = load_csv(csv.path(), "label");
    REQUIRE(ds.columns[0].kind == ColumnKind::Categorical);
    REQUIRE_FALSE(ds.has_numeric_features());
}

TEST_CASE("load_csv error paths") {
    REQUIRE_THROWS_AS(load_csv("/nonexistent/file.csv", "label"), DataError);

    TempFile missing_label("x,y\n1,2\n");
    REQUIRE_THROWS_AS(load_csv(missing_label.path(), "label"), DataError);

    TempFile one_class("x,label\n1,a\n2,a\n");
    REQUIRE_THROWS_AS(load_csv(one_class.path(), "label"), DataError);

    TempFile ragged("x,label\n1,a\n2\n3,b\n");
    try {
        load_csv(ragged.path(), "label");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        REQUIRE(std::string(e.what()).find("row 2") != std::string::npos);
    }

    TempFile missing_cell("x,label\n1,a\n,b\n");
    REQUIRE_THROWS_AS(load_csv(missing_cell.path(), "label"), DataError);
}

TEST_CASE("csv round trip preserves labels and features") {
    const Dataset ds = make_two_moons(40, 0.25, 0.1, 3);
    TempFile out("", ".csv");
    write_dataset_csv(ds, out.path());
    const Dataset back = load_csv(out.path(), "label", {}, std::string("true_label"));
    REQUIRE(back.n() == ds.n());
    REQUIRE(back.observed_labels == ds.observed_labels);
    REQUIRE(back.has_true_labels());
    REQUIRE(*back.true_labels == *ds.true_labels);
    for (int i = 0; i < ds.n(); ++i)
        for (int j = 0; j < 2; ++j)
            REQUIRE(back.features(i, j) == Catch::Approx(ds.features(i, j)).margin(1e-12));
}

TEST_CASE("two moons honors the minority fraction") {
    const Dataset ds = make_two_moons(100, 0.1, 0.1, 7);
    auto counts = ds.class_counts();
    REQUIRE(counts[0] == 10);
    REQUIRE(counts[1] == 90);
    REQUIRE(*ds.true_labels == ds.observed_labels);
}

TEST_CASE("two moons with zero jitter lies on the arcs") {
    const Dataset ds = make_two_moons(4, 0.25, 0.0, 1);
    for (int i = 0; i < ds.n(); ++i) {
        const double x = ds.features(i, 0), y = ds.features(i, 1);
        if (ds.observed_labels[i] == 1) {
            REQUIRE(x * x + y * y == Catch::Approx(1.0).margin(1e-12));
            REQUIRE(y >= -1e-12);
        } else {
            const double dx = x - 1.0, dy = y - 0.5;
            REQUIRE(dx * dx + dy * dy == Catch::Approx(1.0).margin(1e-12));
            REQUIRE(y <= 0.5 + 1e-12);
        }
    }
}

TEST_CASE("two moons is deterministic in the seed") {
    const Dataset a = make_two_moons(60, 0.2, 0.3, 99);
    const Dataset b = make_two_moons(60, 0.2, 0.3, 99);
    REQUIRE(a.features == b.features);
    REQUIRE(a.observed_labels == b.observed_labels);
    const Dataset c = make_two_moons(60, 0.2, 0.3, 100);
    REQUIRE(a.features != c.features);
}

TEST_CASE("two moons rejects bad fractions") {
    REQUIRE_THROWS_AS(make_two_moons(100, 0.0, 0.1, 0), ConfigError);
    REQUIRE_THROWS_AS(make_two_moons(100, 0.6, 0.1, 0), ConfigError);
    REQUIRE_THROWS_AS(make_two_moons(100, 0.001, 0.1, 0), ConfigError);  // rounds to 0
}

TEST_CASE("make_blobs apportions classes by priors") {
    const Dataset ds = make_blobs(10, {0.7, 0.3}, 1.0, 5);
    const auto counts = ds.class_counts();
    REQUIRE(counts[0] == 7);
    REQUIRE(counts[1] == 3);
    const Dataset again = make_blobs(10, {0.7, 0.3}, 1.0, 5);
    REQUIRE(ds.features == again.features);
}

TEST_CASE("flip_labels plants the exact number of flips") {
    const Dataset ds = make_two_moons(100, 0.1, 0.1, 11);
    const Dataset flipped = flip_labels(ds, 5, 42);
    int total = 0;
    std::vector<int> per_class(2, 0);
    for (int i = 0; i < flipped.n(); ++i) {
        if ((*flipped.mislabel_mask)[i]) {
            total++;
            per_class[(*flipped.true_labels)[i]]++;
        }
    }
    REQUIRE(total == 10);
    REQUIRE(per_class[0] == 5);
    REQUIRE(per_class[1] == 5);
    REQUIRE(*flipped.true_labels == *ds.true_labels);
}

TEST_CASE("flip_labels with zero count is the identity") {
    const Dataset ds = make_two_moons(50, 0.2, 0.1, 1);
    const Dataset same = flip_labels(ds, 0, 9);
    REQUIRE(same.observed_labels == ds.observed_labels);
    for (auto m : *same.mislabel_mask) REQUIRE(m == 0);
}

TEST_CASE("flip_labels is deterministic and flips to other classes") {
    const Dataset ds = make_blobs(30, {0.34, 0.33, 0.33}, 1.0, 2);
    const Dataset a = flip_labels(ds, 1, 5);
    const Dataset b = flip_labels(ds, 1, 5);
    REQUIRE(a.observed_labels == b.observed_labels);
    int flips = 0;
    for (int i = 0; i < a.n(); ++i) {
        if ((*a.mislabel_mask)[i]) {
            flips++;
            REQUIRE(a.observed_labels[i] != (*a.true_labels)[i]);
        }
    }
    REQUIRE(flips == 3);
}

TEST_CASE("flip_labels rejects counts above the class size") {
    const Dataset ds = make_two_moons(20, 0.1, 0.1, 1);  // 2 minority examples
    REQUIRE_THROWS_AS(flip_labels(ds, 3, 0), ConfigError);
}

TEST_CASE("identity transition matrix leaves labels unchanged") {
    const Dataset ds = make_blobs(50, {0.5, 0.5}, 1.0, 3);
    const Dataset noisy = apply_transition_noise(ds, NoiseTransitionMatrix::identity(2), 17);
    REQUIRE(noisy.observed_labels == ds.observed_labels);
    for (auto m : *noisy.mislabel_mask) REQUIRE(m == 0);
}

TEST_CASE("deterministic transition column relabels a whole class") {
    const Dataset ds = make_blobs(40, {0.5, 0.5}, 1.0, 3);
    NoiseTransitionMatrix T;
    T.entries.resize(2, 2);
    // Every class-0 example becomes observed class 1; class 1 stays put.
    T.entries << 0.0, 0.0,
                 1.0, 1.0;
    const Dataset noisy = apply_transition_noise(ds, T, 5);
    for (int i = 0; i < noisy.n(); ++i) {
        if ((*noisy.true_labels)[i] == 0) {
            REQUIRE(noisy.observed_labels[i] == 1);
            REQUIRE((*noisy.mislabel_mask)[i] == 1);
        } else {
            REQUIRE((*noisy.mislabel_mask)[i] == 0);
        }
    }
}

TEST_CASE("uniform flip noise hits the expected rate") {
    const Dataset ds = make_blobs(10000, {0.5, 0.5}, 1.0, 1);
    const auto T = NoiseTransitionMatrix::uniform_flip(2, 0.25);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Dataset noisy = apply_transition_noise(ds, T, seed);
        int flips = 0;
        for (auto m : *noisy.mislabel_mask) flips += m;
        const double fraction = static_cast<double>(flips) / noisy.n();
        REQUIRE(fraction == Catch::Approx(0.25).margin(0.02));
    }
}

TEST_CASE("transition noise empirical conditionals match the matrix columns") {
    // Chi-square goodness of fit per true class at the 1% level, n = 1e5.
    const int n = 100000;
    const Dataset ds = make_blobs(n, {0.4, 0.35, 0.25}, 1.0, 21);
    NoiseTransitionMatrix T;
    T.entries.resize(3, 3);
    T.entries << 0.8, 0.1, 0.05,
                 0.15, 0.7, 0.15,
                 0.05, 0.2, 0.8;
    const Dataset noisy = apply_transition_noise(ds, T, 31);
    const double chi2_crit_dof2 = 9.210340372;  // chi-square(2) at 1%
    for (int c = 0; c < 3; ++c) {
        std::vector<int> counts(3, 0);
        int total = 0;
        for (int i = 0; i < n; ++i) {
            if ((*noisy.true_labels)[i] != c) continue;
            counts[noisy.observed_labels[i]]++;
            total++;
        }
        double chi2 = 0.0;
        for (int r = 0; r < 3; ++r) {
            const double expected = total * T.entries(r, c);
            chi2 += (counts[r] - expected) * (counts[r] - expected) / expected;
        }
        REQUIRE(chi2 < chi2_crit_dof2);
    }
}

TEST_CASE("transition noise validates dimensions and stochasticity") {
    const Dataset ds = make_blobs(20, {0.5, 0.5}, 1.0, 0);
    REQUIRE_THROWS_AS(apply_transition_noise(ds, NoiseTransitionMatrix::identity(3), 0),
                      ConfigError);
    NoiseTransitionMatrix bad;
    bad.entries = Matrix::Constant(2, 2, 0.4);  // columns sum to 0.8
    REQUIRE_THROWS_AS(apply_transition_noise(ds, bad, 0), ConfigError);
}

TEST_CASE("feature-dependent transition noise uses the per-example matrix") {
    const Dataset ds = make_blobs(200, {0.5, 0.5}, 1.0, 9);
    // Flip everything on the right half plane, keep the left half clean.
    auto transition = [](const Eigen::RowVectorXd& x) {
        NoiseTransitionMatrix T;
        T.entries.resize(2, 2);
        if (x(0) >= 0.0)
            T.entries << 0.0, 1.0, 1.0, 0.0;
        else
            T.entries << 1.0, 0.0, 0.0, 1.0;
        return T;
    };
    const Dataset noisy = apply_transition_noise(ds, transition, 4);
    for (int i = 0; i < noisy.n(); ++i) {
        const bool flipped = (*noisy.mislabel_mask)[i] != 0;
        REQUIRE(flipped == (ds.features(i, 0) >= 0.0));
    }
}

TEST_CASE("noise ratio derives from priors and the transition matrix") {
    const auto T = NoiseTransitionMatrix::uniform_flip(2, 0.3);
    REQUIRE(T.noise_ratio({0.9, 0.1}) == Catch::Approx(0.3));
    NoiseTransitionMatrix skew;
    skew.entries.resize(2, 2);
    skew.entries << 1.0, 0.5,
                    0.0, 0.5;
    REQUIRE(skew.noise_ratio({0.8, 0.2}) == Catch::Approx(0.1));
}

TEST_CASE("a perfect rule reproduces the true labels") {
    Dataset ds;
    ds.num_classes = 2;
    ds.label_names = {"0", "1"};
    ds.features = Matrix::Ones(6, 1);
    ds.observed_labels = std::vector<int>(6, 1);
    ds.true_labels = ds.observed_labels;
    ds.refresh_mask();
    LabelingRule rule;
    rule.kind = LabelingRule::Kind::Threshold;
    rule.feature_index = 0;
    rule.threshold = 0.0;  // always fires
    rule.emitted_label = 1;
    const Dataset labeled = aggregate_rules(ds, {rule}, {});
    REQUIRE(labeled.observed_labels == std::vector<int>(6, 1));
    for (auto m : *labeled.mislabel_mask) REQUIRE(m == 0);
}

TEST_CASE("tied rules fall back to the global majority class") {
    Dataset ds;
    ds.num_classes = 2;
    ds.label_names = {"0", "1"};
    ds.features = Matrix::Ones(5, 1);
    ds.observed_labels = {1, 1, 1, 0, 1};  // majority class 1
    LabelingRule yes, no;
    yes.feature_index = 0;
    yes.threshold = 0.0;
    yes.emitted_label = 1;
    no.feature_index = 0;
    no.threshold = 0.0;
    no.emitted_label = 0;
    FallbackPolicy majority{FallbackPolicy::Kind::GlobalMajority, 0};
    const Dataset labeled = aggregate_rules(ds, {yes, no}, majority);
    REQUIRE(labeled.observed_labels == std::vector<int>(5, 1));
}

TEST_CASE("rule aggregation matches a hand-enumerated vote table") {
    // 6 examples, feature values 0..5, three threshold rules:
    //   r1: x >= 2 -> class 1,  r2: x >= 4 -> class 0,  r3: x >= 0 -> class 0.
    // Votes per example (x = 0..5):
    //   x=0,1: {0}            -> 0
    //   x=2,3: {1, 0}         -> tie -> fallback (majority of observed = 0)
    //   x=4,5: {1, 0, 0}      -> 0
    Dataset ds;
    ds.num_classes = 2;
    ds.label_names = {"0", "1"};
    ds.features.resize(6, 1);
    for (int i = 0; i < 6; ++i) ds.features(i, 0) = i;
    ds.observed_labels = {0, 0, 0, 0, 0, 1};  // majority observed = 0
    LabelingRule r1, r2, r3;
    r1.feature_index = 0; r1.threshold = 2.0; r1.emitted_label = 1;
    r2.feature_index = 0; r2.threshold = 4.0; r2.emitted_label = 0;
    r3.feature_index = 0; r3.threshold = 0.0; r3.emitted_label = 0;
    FallbackPolicy majority{FallbackPolicy::Kind::GlobalMajority, 0};
    const Dataset labeled = aggregate_rules(ds, {r1, r2, r3}, majority);
    REQUIRE(labeled.observed_labels == std::vector<int>{0, 0, 0, 0, 0, 0});
}

TEST_CASE("abstaining rules fall back uniformly at random, deterministically") {
    Dataset ds;
    ds.num_classes = 3;
    ds.label_names = {"0", "1", "2"};
    ds.features = Matrix::Zero(30, 1);
    ds.observed_labels = std::vector<int>(30, 0);
    LabelingRule never;
    never.feature_index = 0;
    never.threshold = 1.0;  // never fires on zeros
    never.emitted_label = 1;
    FallbackPolicy uniform{FallbackPolicy::Kind::UniformRandom, 123};
    const Dataset a = aggregate_rules(ds, {never}, uniform);
    const Dataset b = aggregate_rules(ds, {never}, uniform);
    REQUIRE(a.observed_labels == b.observed_labels);
    std::set<int> seen(a.observed_labels.begin(), a.observed_labels.end());
    REQUIRE(seen.size() > 1);  // 30 uniform draws over 3 classes
}

TEST_CASE("split sizes follow the validation and calibration fractions") {
    const Dataset ds = make_blobs(100, {0.5, 0.5}, 1.0, 8);
    SplitSpec spec;
    spec.train_fraction = 0.8;
    spec.validation_fraction = 0.2;
    spec.test_fraction = 0.0;
    spec.calibration_fraction_of_validation = 0.5;
    spec.seed = 3;
    const Split split = split_dataset(ds, spec);
    REQUIRE(split.validation.n() == 10);
    REQUIRE(split.calibration.n() == 10);
    REQUIRE(split.train.n() == 80);
    REQUIRE(split.test.n() == 0);
}

TEST_CASE("split partitions are disjoint and cover the dataset") {
    const Dataset ds = make_blobs(173, {0.6, 0.25, 0.15}, 1.0, 12);
    SplitSpec spec;
    spec.train_fraction = 0.64;
    spec.validation_fraction = 0.16;
    spec.test_fraction = 0.2;
    spec.seed = 7;
    const Split split = split_dataset(ds, spec);
    std::set<int> all;
    std::size_t total = 0;
    for (const auto* part : {&split.train_indices, &split.validation_indices,
                             &split.calibration_indices, &split.test_indices}) {
        for (int i : *part) all.insert(i);
        total += part->size();
    }
    REQUIRE(total == static_cast<std::size_t>(ds.n()));
    REQUIRE(all.size() == total);  // disjoint
    REQUIRE(*all.begin() == 0);
    REQUIRE(*all.rbegin() == ds.n() - 1);
}

TEST_CASE("stratified split keeps the minority fraction in every part") {
    const Dataset ds = make_blobs(200, {0.9, 0.1}, 1.0, 4);
    SplitSpec spec;
    spec.train_fraction = 0.6;
    spec.validation_fraction = 0.2;
    spec.test_fraction = 0.2;
    spec.seed = 15;
    const Split split = split_dataset(ds, spec);
    for (const Dataset* part :
         {&split.train, &split.validation, &split.calibration, &split.test}) {
        if (part->n() == 0) continue;
        int minority = 0;
        for (int y : part->observed_labels) minority += y == 1;
        const double expected = 0.1 * part->n();
        REQUIRE(std::abs(minority - expected) <= 1.0);
    }
}

TEST_CASE("split is deterministic in the seed") {
    const Dataset ds = make_blobs(120, {0.5, 0.5}, 1.0, 2);
    SplitSpec spec;
    spec.seed = 77;
    const Split a = split_dataset(ds, spec);
    const Split b = split_dataset(ds, spec);
    REQUIRE(a.train_indices == b.train_indices);
    REQUIRE(a.calibration_indices == b.calibration_indices);
    spec.seed = 78;
    const Split c = split_dataset(ds, spec);
    REQUIRE(a.train_indices != c.train_indices);
}

TEST_CASE("split warns when a tiny class misses a part") {
    Dataset ds = make_blobs(60, {0.5, 0.5}, 1.0, 2);
    // Shrink class 1 to two members.
    std::vector<int> keep;
    int kept_ones = 0;
    for (int i = 0; i < ds.n(); ++i) {
        if (ds.observed_labels[i] == 1 && kept_ones >= 2) continue;
        kept_ones += ds.observed_labels[i] == 1;
        keep.push_back(i);
    }
    const Dataset small = ds.subset(keep);
    SplitSpec spec;
    spec.seed = 5;
    const Split split = split_dataset(small, spec);
    REQUIRE_FALSE(split.warnings.empty());
}

TEST_CASE("dataset validate catches inconsistent masks") {
    Dataset ds = make_two_moons(10, 0.2, 0.1, 1);
    ds.validate();
    (*ds.mislabel_mask)[0] = 1;  // observed == true but mask says mislabeled
    REQUIRE_THROWS_AS(ds.validate(), DataError);
}

TEST_CASE("class priors sum to one") {
    const Dataset ds = make_blobs(97, {0.5, 0.3, 0.2}, 1.0, 6);
    const auto priors = ds.class_priors();
    double sum = 0.0;
    for (double p : priors) sum += p;
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
}
