"""Ridge model tests: solver oracles, clamping, feedback updates, transfer."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fontadapt.errors import InsufficientData, SingularSystem
from fontadapt.labels import LabelTree, ScenarioLabel
from fontadapt.modeling import (
    FEATURE_ORDER,
    FONT_PARAM_RANGES,
    GROUP_SCENARIO,
    N_FEATURES,
    FeedbackEvent,
    FontParams,
    ScenarioModel,
    ScenarioStore,
    fit_ridge,
    transfer_model,
    update_with_feedback,
    vector_from_raw,
)
from fontadapt.sensing import MotionState

VIB_X = FEATURE_ORDER.index("vib_x")


def base_vec(vib_x=0.0):
    v = [0.0] * N_FEATURES
    v[VIB_X] = vib_x
    v[FEATURE_ORDER.index("distance_cm")] = 31.0
    v[FEATURE_ORDER.index("log_lux")] = 2.0
    return v


def params(size=20.0, weight=1.0, line=0.3, letter=0.1):
    return FontParams(size, weight, line, letter)


def rand_group_rows(rng, n=497):
    """Synthetic seed corpus with plausible feature spreads and a linear-ish
    size response; used for weighting/convergence tests that must not depend
    on the shipped fixture."""
    rows = []
    for _ in range(n):
        lux = float(rng.uniform(0, 50000))
        vx, vy, vz = rng.uniform(0.05, 1.8, size=3)
        dist = float(rng.uniform(20, 45))
        vec = vector_from_raw(lux, float(vx), float(vy), float(vz), dist)
        size = 16 + 2.2 * vx + 1.5 * vz + 0.12 * dist + rng.normal(0, 2.0)
        weight = 0.4 + 0.15 * math.log10(1 + lux) + rng.normal(0, 0.3)
        rows.append(
            (
                vec,
                FontParams.clamped(size, weight, 0.25 + rng.normal(0, 0.05), 0.1),
            )
        )
    return rows


class TestFontParams:
    def test_ranges_enforced(self):
        with pytest.raises(ValueError):
            FontParams(50.0, 1.0, 0.3, 0.1)
        with pytest.raises(ValueError):
            FontParams(20.0, 1.0, 0.3, math.nan)

    def test_clamped(self):
        p = FontParams.clamped(80.0, -1.0, 2.0, 0.1)
        assert p.size_sp == 40.0
        assert p.weight_px == 0.0
        assert p.line_spacing_em == 1.0

    def test_round_trip(self):
        p = params()
        assert FontParams.from_dict(p.to_dict()) == p


class TestFitRidge:
    def test_noiseless_linear_recovery_at_lambda_zero(self):
        # y_size = 2 * vib_x + 20, everything else constant
        rows = [(base_vec(vib_x=x), params(size=2.0 * x + 20.0)) for x in
                [0.0, 0.5, 1.0, 1.5, 2.0, 3.0]]
        model = fit_ridge(rows, lam=0.0)
        raw = model.raw_coefficients()[0]  # size output
        assert raw[0] == pytest.approx(20.0, abs=1e-9)
        assert raw[1 + VIB_X] == pytest.approx(2.0, abs=1e-9)
        for j, name in enumerate(FEATURE_ORDER):
            if name != "vib_x":
                assert raw[1 + j] == pytest.approx(0.0, abs=1e-9)

    def test_hand_solved_two_by_two_normal_equations(self):
        # one varying feature, three points, lambda = 0.1
        xs = [0.0, 1.0, 2.0]
        ys = [21.0, 23.0, 25.0]
        rows = [(base_vec(vib_x=x), params(size=y)) for x, y in zip(xs, ys)]
        lam = 0.1
        model = fit_ridge(rows, lam=lam)

        # independent closed-form oracle on standardized x
        mean_x = sum(xs) / 3.0
        sd_x = math.sqrt(sum((x - mean_x) ** 2 for x in xs) / 3.0)
        z = [(x - mean_x) / sd_x for x in xs]
        # normal equations [[n, sum z], [sum z, sum z^2 + lam]] (sum z = 0)
        beta0 = sum(ys) / 3.0
        beta1 = sum(zi * yi for zi, yi in zip(z, ys)) / (sum(zi * zi for zi in z) + lam)

        coef = model.coefficients[0]
        assert coef[0] == pytest.approx(beta0, abs=1e-12)
        assert coef[1 + VIB_X] == pytest.approx(beta1, abs=1e-12)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            fit_ridge([(base_vec(), params())], lam=1.0)

    def test_collinear_features_singular_at_lambda_zero(self):
        # vib_x and vib_y exactly collinear and varying
        rows = []
        for x in [0.0, 1.0, 2.0, 3.0]:
            v = base_vec(vib_x=x)
            v[FEATURE_ORDER.index("vib_y")] = 2.0 * x
            rows.append((v, params(size=20 + x)))
        with pytest.raises(SingularSystem):
            fit_ridge(rows, lam=0.0)
        fit_ridge(rows, lam=1.0)  # regularized solve is fine

    def test_shrinkage_monotone_in_lambda(self):
        rng = np.random.default_rng(7)
        rows = []
        for _ in range(60):
            vec = [float(v) for v in rng.normal(0, 1, size=N_FEATURES)]
            vec = [abs(v) for v in vec]
            rows.append(
                (vec, FontParams.clamped(rng.uniform(15, 30), rng.uniform(0, 2),
                                         rng.uniform(0.1, 0.5), rng.uniform(0, 0.2)))
            )
        norms = []
        for lam in [0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1e4]:
            model = fit_ridge(rows, lam=lam)
            penalized = [row[1:] for row in model.coefficients]
            norms.append(math.sqrt(sum(b * b for row in penalized for b in row)))
        for a, b in zip(norms, norms[1:]):
            assert b <= a + 1e-9

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        rows = rand_group_rows(rng, n=50)
        m1 = fit_ridge(rows, lam=1.0)
        m2 = fit_ridge(rows, lam=1.0)
        assert m1.coefficients == m2.coefficients


class TestPredict:
    def test_constant_model_returns_clamped_intercepts(self):
        model = ScenarioModel(
            scenario="GROUP",
            version=1,
            sample_count=10,
            feature_means=tuple([0.0] * N_FEATURES),
            feature_sds=tuple([1.0] * N_FEATURES),
            coefficients=(
                (80.0,) + (0.0,) * N_FEATURES,  # size intercept far above range
                (1.0,) + (0.0,) * N_FEATURES,
                (0.3,) + (0.0,) * N_FEATURES,
                (0.1,) + (0.0,) * N_FEATURES,
            ),
        )
        p = model.predict(base_vec())
        assert p.size_sp == 40.0
        assert p.weight_px == 1.0

    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=N_FEATURES,
                    max_size=N_FEATURES))
    @settings(max_examples=200)
    def test_never_out_of_range(self, vec):
        rng = np.random.default_rng(11)
        rows = rand_group_rows(rng, n=40)
        model = fit_ridge(rows, lam=1.0)
        p = model.predict(vec)
        for name, (lo, hi) in FONT_PARAM_RANGES.items():
            assert lo <= getattr(p, name) <= hi

    def test_json_round_trip(self):
        rng = np.random.default_rng(5)
        model = fit_ridge(rand_group_rows(rng, n=30), lam=1.0)
        back = ScenarioModel.from_dict(model.to_dict())
        assert back == model


def make_store(rng=None, **kwargs):
    rng = rng or np.random.default_rng(42)
    group_rows = rand_group_rows(rng)
    group_model = fit_ridge(group_rows, lam=1.0, scenario=GROUP_SCENARIO, version=1)
    return ScenarioStore(group_rows, group_model, **kwargs)


class TestFeedbackUpdates:
    def test_version_counts_events(self):
        store = make_store()
        vec = tuple(base_vec(vib_x=0.2))
        ev = FeedbackEvent(vec, "Still-Office", params(size=24.0), 1000)
        model = update_with_feedback(store, ev)
        assert model.version == 1
        assert model.sample_count == len(store.group_rows) + 1
        model2 = update_with_feedback(
            store, FeedbackEvent(vec, "Still-Office", params(size=24.0), 2000)
        )
        assert model2.version == 2

    def test_convergence_to_confirmed_params(self):
        store = make_store()
        vec = tuple(vector_from_raw(100.0, 0.2, 0.1, 0.3, 33.0))
        target = FontParams(24.0, 1.5, 0.4, 0.1)
        start = store.group_model.predict(vec)
        distances = []
        for i in range(10):
            update_with_feedback(
                store, FeedbackEvent(vec, "Still-Office", target, 1000 + i)
            )
            got = store.model_for("Still-Office").predict(vec)
            distances.append(got.l1_distance(target))
        final = store.model_for("Still-Office").predict(vec)
        assert abs(final.size_sp - target.size_sp) <= 1.0
        assert abs(final.weight_px - target.weight_px) <= 0.2
        assert abs(final.line_spacing_em - target.line_spacing_em) <= 0.05
        assert abs(final.letter_spacing_em - target.letter_spacing_em) <= 0.05
        assert final.l1_distance(target) < start.l1_distance(target)
        # monotone non-increasing over the last 5 events
        tail = distances[-5:]
        for a, b in zip(tail, tail[1:]):
            assert b <= a + 1e-9

    def test_refit_failure_keeps_prior_model(self):
        store = make_store()
        vec = tuple(base_vec(vib_x=0.2))
        ev = FeedbackEvent(vec, "Still-Office", params(), 1)
        served = update_with_feedback(store, ev)
        # poison the refit
        good_lam = store.lam
        store.lam = -1.0
        try:
            result = update_with_feedback(
                store, FeedbackEvent(vec, "Still-Office", params(), 2)
            )
        finally:
            store.lam = good_lam
        # event was recorded but the served model did not change
        assert store.row_count("Still-Office") == 2
        assert result == served
        assert store.model_for("Still-Office") == served

    def test_replay_determinism(self):
        events = [
            FeedbackEvent(tuple(base_vec(vib_x=0.1 * i)), "Walking-Park",
                          params(size=20 + i % 3), 100 * i)
            for i in range(6)
        ]
        coeffs = []
        for _ in range(2):
            store = make_store(rng=np.random.default_rng(42))
            for ev in events:
                update_with_feedback(store, ev)
            coeffs.append(store.model_for("Walking-Park").coefficients)
        assert coeffs[0] == coeffs[1]

    def test_single_refit_equals_incremental(self):
        events = [
            FeedbackEvent(tuple(base_vec(vib_x=0.3)), "Still-Office",
                          params(size=22 + i % 2), i)
            for i in range(4)
        ]
        incremental = make_store(rng=np.random.default_rng(42))
        for ev in events:
            update_with_feedback(incremental, ev)
        bulk = make_store(rng=np.random.default_rng(42))
        bulk.load_events("Still-Office", events)
        a = incremental.model_for("Still-Office")
        b = bulk.model_for("Still-Office")
        assert a.coefficients == b.coefficients
        assert a.version == b.version


class TestTransfer:
    def feed(self, store, scenario, n, vib=0.2, size=24.0):
        for i in range(n):
            update_with_feedback(
                store,
                FeedbackEvent(tuple(base_vec(vib_x=vib)), scenario,
                              params(size=size), i),
            )

    def test_empty_store_serves_group(self):
        store = make_store()
        tree = LabelTree()
        target = ScenarioLabel(MotionState.RUNNING, "Park")
        assert transfer_model(tree, store, target) is store.group_model

    def test_own_model_when_enough_rows(self):
        store = make_store()
        tree = LabelTree()
        label = ScenarioLabel(MotionState.RUNNING, "Park")
        tree.insert(label, confirmed=True)
        self.feed(store, "Running-Park", 3)
        model = transfer_model(tree, store, label)
        assert model.scenario == "Running-Park"

    def test_most_similar_label_wins(self):
        store = make_store()
        tree = LabelTree()
        playground = ScenarioLabel(MotionState.RUNNING, "Playground")
        office = ScenarioLabel(MotionState.STILL, "Office")
        tree.insert(playground, confirmed=True)
        tree.insert(office, confirmed=True)
        self.feed(store, "Running-Playground", 3)
        self.feed(store, "Still-Office", 5)
        target = ScenarioLabel(MotionState.RUNNING, "Park")
        model = transfer_model(tree, store, target)
        assert model.scenario == "Running-Playground"

    def test_tie_breaks_lexicographic(self):
        store = make_store()
        tree = LabelTree()
        a = ScenarioLabel(MotionState.RUNNING, "Beach")
        b = ScenarioLabel(MotionState.RUNNING, "Alley")
        for label in (a, b):
            tree.insert(label, confirmed=True)
        self.feed(store, "Running-Beach", 3)
        self.feed(store, "Running-Alley", 3)
        # equalize usage counts
        for e in tree.entries():
            e.usage_count = 1
        target = ScenarioLabel(MotionState.RUNNING, "Park")
        model = transfer_model(tree, store, target)
        assert model.scenario == "Running-Alley"

    def test_under_min_rows_falls_back(self):
        store = make_store()
        tree = LabelTree()
        label = ScenarioLabel(MotionState.RUNNING, "Park")
        tree.insert(label, confirmed=True)
        self.feed(store, "Running-Park", 2)  # below min_rows=3
        model = transfer_model(tree, store, label)
        assert model is store.group_model
