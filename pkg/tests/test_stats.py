import math

import numpy as np
import pytest
from scipy.stats import linregress

from conftest import planted_rows
from latdyn.model import ValidationError
from latdyn.stats import (
    RegressionSpec,
    correlations,
    grouped_fit,
    lexical_diversity,
    ols_fit,
    stars,
    sweep_aggregate,
)


class TestOLS:
    def test_exact_line(self):
        x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        report = ols_fit(x, 2.0 * x, names=["slope"])
        coef = report.coefficients["slope"]
        assert abs(coef.estimate - 2.0) < 1e-12
        assert report.rss < 1e-20
        assert np.abs(report.residuals).max() < 1e-12

    def test_noisy_slope_recovered(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=120)
        y = 3.0 * x + rng.normal(0.0, 0.1, size=120)
        coef = ols_fit(x, y, names=["slope"]).coefficients["slope"]
        assert 2.9 <= coef.estimate <= 3.1
        assert coef.p_value < 1e-10 and coef.stars == "***"

    def test_matches_linregress(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=40)
        y = 1.0 + 0.5 * x + rng.normal(0.0, 0.3, size=40)
        design = np.column_stack([np.ones(40), x])
        report = ols_fit(design, y, names=["intercept", "slope"])
        ref = linregress(x, y)
        slope = report.coefficients["slope"]
        assert abs(slope.estimate - ref.slope) < 1e-10
        assert abs(slope.std_error - ref.stderr) < 1e-10
        assert abs(slope.p_value - ref.pvalue) < 1e-10
        assert abs(report.coefficients["intercept"].estimate - ref.intercept) < 1e-10

    def test_duplicate_column_named(self):
        x = np.random.default_rng(0).normal(size=10)
        design = np.column_stack([x, x])
        with pytest.raises(ValidationError, match="collinear.*dup"):
            ols_fit(design, 2 * x, names=["base", "dup"])

    def test_validation(self):
        x = np.arange(3.0)
        with pytest.raises(ValidationError):
            ols_fit(np.ones((2, 3)), np.ones(2))
        with pytest.raises(ValidationError):
            ols_fit(x, x, names=["a", "b"])
        with pytest.raises(ValidationError):
            ols_fit(x, np.ones(4))


class TestGroupedFit:
    def test_planted_slope_and_variance(self):
        rows = planted_rows(4, {"C": -0.03}, group_sd=0.05, noise_sd=0.005)
        report = grouped_fit(RegressionSpec(response="log_ppl", predictors=("C",)), rows)
        assert report.n == 120 and report.n_groups == 40
        beta = report.coefficients["C"].estimate
        assert abs(beta + 0.03) <= 0.1 * 0.03
        assert abs(report.group_variance - 0.05 ** 2) <= 0.25 * 0.05 ** 2

    def test_zero_group_effects(self):
        rows = planted_rows(8, {"C": -0.03}, group_sd=0.0, noise_sd=0.005)
        report = grouped_fit(RegressionSpec(response="log_ppl", predictors=("C",)), rows)
        assert report.group_variance < 0.005 ** 2

    def test_constant_response(self):
        rows = planted_rows(1, {"C": 0.0}, group_sd=0.0, noise_sd=0.0)
        report = grouped_fit(RegressionSpec(response="log_ppl", predictors=("C",)), rows)
        assert report.coefficients["C"].estimate == 0.0
        assert report.group_variance == 0.0

    def test_sign_pattern_recovered(self):
        betas = {"C": -0.031, "Q": 0.081, "P": 0.009}
        rows = planted_rows(0, betas)
        report = grouped_fit(RegressionSpec(response="log_ppl"), rows)
        for key, planted in betas.items():
            assert report.coefficients[key].estimate * planted > 0

    def test_single_group_falls_back_to_ols(self):
        rows = planted_rows(3, {"C": -0.03}, n_groups=1, per_group=30)
        report = grouped_fit(RegressionSpec(response="log_ppl", predictors=("C",)), rows)
        assert report.method == "ols" and report.warning is not None
        assert report.n_groups == 1 and report.group_variance == 0.0

    def test_agrees_with_ols_when_groups_flat(self):
        # With no group effects and a noise-free response both estimators
        # must land on the planted coefficients.
        rows = planted_rows(5, {"C": -0.5, "Q": 0.2}, group_sd=0.0, noise_sd=0.0)
        grouped = grouped_fit(
            RegressionSpec(response="log_ppl", predictors=("C", "Q")), rows)
        design = np.column_stack([
            np.ones(len(rows)),
            [r["C"] for r in rows],
            [r["silhouette"] for r in rows],
        ])
        y = np.array([r["log_ppl"] for r in rows])
        plain = ols_fit(design, y, names=["intercept", "C", "Q"])
        for key, want in (("C", -0.5), ("Q", 0.2)):
            a = grouped.coefficients[key].estimate
            b = plain.coefficients[key].estimate
            assert abs(a - b) < 1e-6
            assert abs(a - want) < 1e-9

    def test_small_group_rejected(self):
        rows = planted_rows(2, {"C": -0.03}, n_groups=3, per_group=2)
        rows.append({"temperature": 9.9, "top_p": 1.0, "log_ppl": 1.0, "C": 0.5})
        with pytest.raises(ValidationError, match="fewer than 2 rows"):
            grouped_fit(RegressionSpec(response="log_ppl", predictors=("C",)), rows)

    def test_missing_field_named(self):
        rows = planted_rows(2, {"C": -0.03}, n_groups=3, per_group=3)
        del rows[4]["log_ppl"]
        with pytest.raises(ValidationError, match="log_ppl"):
            grouped_fit(RegressionSpec(response="log_ppl", predictors=("C",)), rows)

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            RegressionSpec(response="log_ppl", predictors=())
        with pytest.raises(ValidationError, match="unknown predictors"):
            RegressionSpec(response="log_ppl", predictors=("C", "Z"))


class TestCorrelations:
    def test_identity(self):
        x = np.arange(10.0)
        report = correlations(x, x)
        assert abs(report.pearson - 1.0) < 1e-12
        assert abs(report.spearman - 1.0) < 1e-12

    def test_monotone_nonlinear(self):
        x = np.linspace(-2.0, 2.0, 50)
        report = correlations(x, -x ** 3)
        assert -1.0 < report.pearson < 0.0
        assert abs(report.spearman + 1.0) < 1e-12

    def test_shuffled_pairs_decorrelate(self):
        rng = np.random.default_rng(17)
        x = rng.normal(size=400)
        y = rng.permutation(x)
        assert abs(correlations(x, y).spearman) < 0.15

    def test_validation(self):
        with pytest.raises(ValidationError):
            correlations([1.0, 2.0], [1.0, 2.0])
        with pytest.raises(ValidationError, match="zero variance"):
            correlations([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(ValidationError):
            correlations(np.ones((3, 2)), np.ones((3, 2)))


class TestLexicalDiversity:
    def test_all_distinct(self):
        assert lexical_diversity(range(10)) == 1.0

    def test_single_type(self):
        assert lexical_diversity(["a", "a", "a", "a"]) == 0.0

    def test_four_types_sixteen_tokens(self):
        tokens = list(range(4)) * 4
        assert abs(lexical_diversity(tokens) - 0.5) < 1e-12

    def test_relabeling_invariance(self):
        tokens = [1, 1, 2, 3, 3, 3, 4]
        renamed = [{1: "w", 2: "x", 3: "y", 4: "z"}[t] for t in tokens]
        assert lexical_diversity(tokens) == lexical_diversity(renamed)

    def test_too_short(self):
        with pytest.raises(ValidationError):
            lexical_diversity(["only"])


class TestSweepAggregate:
    ROWS = [
        {"temperature": 0.5, "top_p": 1.0, "C": 1.0, "silhouette": 0.5,
         "total_persistence": 2.0, "log_ppl": 1.0, "lttr": 0.9, "spelling": 1.0,
         "grammar": 0.8, "coherence": 0.7},
        {"temperature": 0.5, "top_p": 1.0, "C": 3.0, "silhouette": 0.7,
         "total_persistence": 4.0, "log_ppl": 2.0, "lttr": 0.8, "spelling": 0.9,
         "grammar": 0.7, "coherence": 0.6},
        {"temperature": 1.0, "top_p": 0.6, "C": 5.0, "silhouette": 0.9,
         "total_persistence": 6.0},
    ]

    def test_cells_and_means(self):
        table = sweep_aggregate(self.ROWS)
        assert [(r.temperature, r.top_p) for r in table.rows] == [(0.5, 1.0), (1.0, 0.6)]
        first = table.rows[0]
        assert first.n == 2 and not first.flagged
        assert first.means["C"] == 2.0 and first.stds["C"] == 1.0
        assert abs(first.means["log_ppl"] - 1.5) < 1e-15

    def test_single_sample_flagged(self):
        table = sweep_aggregate(self.ROWS)
        lone = table.rows[1]
        assert lone.n == 1 and lone.flagged
        assert lone.means["C"] == 5.0
        assert "log_ppl" not in lone.means

    def test_matches_direct_recompute(self):
        rng = np.random.default_rng(9)
        rows = []
        for temp in (0.1, 0.7):
            for top_p in (0.3, 1.0):
                for _ in range(5):
                    rows.append({"temperature": temp, "top_p": top_p,
                                 "C": float(rng.normal()),
                                 "silhouette": float(rng.uniform()),
                                 "total_persistence": float(rng.uniform())})
        table = sweep_aggregate(rows)
        assert len(table.rows) == 4
        for cell in table.rows:
            members = [r["C"] for r in rows
                       if (r["temperature"], r["top_p"]) == (cell.temperature, cell.top_p)]
            assert cell.means["C"] == np.mean(members)
            assert cell.stds["C"] == np.std(members)

    def test_empty(self):
        with pytest.raises(ValidationError):
            sweep_aggregate([])


class TestStars:
    def test_thresholds(self):
        assert stars(0.0005) == "***"
        assert stars(0.001) == "**"
        assert stars(0.005) == "**"
        assert stars(0.03) == "*"
        assert stars(0.05) == ""
        assert stars(0.2) == ""


def test_lttr_matches_log_ratio_for_random_sequences():
    rng = np.random.default_rng(3)
    for _ in range(10):
        tokens = rng.integers(0, 20, size=int(rng.integers(2, 60))).tolist()
        got = lexical_diversity(tokens)
        want = math.log(len(set(tokens))) / math.log(len(tokens))
        assert got == want and 0.0 <= got <= 1.0
