import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rksurv.data import Dataset, SplitSpec
from rksurv.evaluation import (EmptyRiskSet, LandmarkContender, Loss, Protocol, ProtocolBlock, RkContender,
                               fixed_base_protocol, fixed_window_protocol, make_grid, n_at_risk, prediction_error,
                               run_protocols, write_curves_csv)
from rksurv.kernels import KernelModel
from rksurv.simulate import random_walk

from conftest import make_subject


def constant(p):
    return lambda subject, t, u, lower: p


def outcomes(rows):
    return Dataset([make_subject(i, T, e) for i, (T, e) in enumerate(rows)], (), (), "")


def test_perfect_prediction_is_zero():
    assert prediction_error(constant(1.0), outcomes([(5, True), (6, False), (9, True)]), 1.0, 4.0) == 0.0


def test_coin_flip_is_quarter():
    test = outcomes([(5, True), (2, True), (9, False), (3, True)])
    assert prediction_error(constant(0.5), test, 1.0, 4.0) == pytest.approx(0.25, abs=1e-15)


def test_censored_term_by_hand():
    def predict(subject, t, u, lower):
        return 0.8 if lower == t else 0.9

    value = prediction_error(predict, outcomes([(2.0, False)]), 1.0, 4.0)
    assert value == pytest.approx(0.9 * 0.04 + 0.1 * 0.64, abs=1e-12)
    assert value == pytest.approx(0.1, abs=1e-12)


def test_absolute_loss():
    test = outcomes([(5, True), (2, True)])
    assert prediction_error(constant(0.7), test, 1.0, 4.0, Loss.ABSOLUTE) == pytest.approx((0.3 + 0.7) / 2)


def test_divides_by_risk_set_at_t():
    test = outcomes([(0.5, True), (5, False), (2, True)])
    assert n_at_risk(test, 1.0) == 2
    assert prediction_error(constant(0.0), test, 1.0, 4.0) == pytest.approx(0.5)


def test_errors():
    with pytest.raises(EmptyRiskSet):
        prediction_error(constant(0.5), outcomes([(1.0, True)]), 2.0, 3.0)
    with pytest.raises(ValueError):
        prediction_error(constant(0.5), outcomes([(5.0, True)]), 2.0, 1.0)


rows = st.lists(st.tuples(st.floats(0.1, 10), st.booleans(), st.floats(0, 1), st.floats(0, 1)), min_size=1,
                max_size=25)


def table_predictor(table):
    def predict(subject, t, u, lower):
        pi_t, pi_c = table[subject.id]
        return pi_t if lower == t else max(pi_t, pi_c)
    return predict


@settings(max_examples=60, deadline=None)
@given(rows=rows, seed=st.integers(0, 1000))
def test_bounded_and_order_invariant(rows, seed):
    data = outcomes([(T, e) for T, e, _, _ in rows])
    table = {str(i): (a, b) for i, (_, _, a, b) in enumerate(rows)}
    t = 0.05
    value = prediction_error(table_predictor(table), data, t, 5.0)
    assert 0.0 <= value <= 1.0
    order = np.random.default_rng(seed).permutation(len(data))
    shuffled = Dataset([data.subjects[i] for i in order], (), (), "")
    assert prediction_error(table_predictor(table), shuffled, t, 5.0) == pytest.approx(value, rel=1e-14, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(rows=rows)
def test_reduces_to_brier_without_censoring(rows):
    data = outcomes([(T, True) for T, _, _, _ in rows])
    table = {str(i): (a, b) for i, (_, _, a, b) in enumerate(rows)}
    expected = np.mean([((1.0 if T >= 5.0 else 0.0) - a) ** 2 for T, _, a, _ in rows])
    assert prediction_error(table_predictor(table), data, 0.05, 5.0) == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_grid_arithmetic():
    grid = make_grid(3, 8, 0.2)
    assert len(grid) == 26 and grid[0] == 3.0 and grid[-1] == 8.0
    assert len(make_grid(0, 9, 0.2)) == 46
    with pytest.raises(ValueError):
        make_grid(0, 1, 0)


def test_block_validation():
    with pytest.raises(ValueError):
        ProtocolBlock(Protocol.FIXED_WINDOW, 0.0, (0, 1))
    with pytest.raises(ValueError):
        ProtocolBlock(Protocol.FIXED_BASE, 3.0, (2.0, 4.0))
    with pytest.raises(ValueError):
        ProtocolBlock(Protocol.FIXED_BASE, 3.0, ())
    with pytest.raises(ValueError):
        ProtocolBlock(Protocol.FIXED_BASE, 3.0, (4.0, 4.0))
    assert ProtocolBlock(Protocol.FIXED_WINDOW, 6, (0, 2, 6, 12)).pairs() == [(0, 6), (2, 8), (6, 12), (12, 18)]


@pytest.fixture(scope="module")
def sim():
    return random_walk(80, p=1, q=1, seed=5)


CONTENDERS = (RkContender(KernelModel.A), RkContender(KernelModel.B), LandmarkContender())


def test_fixed_base_curves(sim):
    curves = fixed_base_protocol(CONTENDERS, sim, SplitSpec(seed=1, n_splits=3), 1.0, make_grid(1.0, 4.0, 0.5))
    assert set(curves) == {"RK-A", "RK-B", "landmark"}
    for c in curves.values():
        assert c.protocol is Protocol.FIXED_BASE and c.per_split.shape == (3, 7)
        assert np.all((c.values >= 0) & (c.values <= 1))
        assert c.values[0] == pytest.approx(0.0, abs=1e-15)  # u = t
        np.testing.assert_allclose(c.values, c.per_split.mean(axis=0), rtol=1e-14)


def test_single_point_grid(sim):
    curves = fixed_base_protocol(CONTENDERS[:1], sim, SplitSpec(seed=1, n_splits=2), 1.0, [1.001])
    assert curves["RK-A"].values.shape == (1,)


def test_fixed_window_records_gaps(sim):
    far = float(sim.event_times.max()) + 1.0
    curves = fixed_window_protocol(CONTENDERS, sim, SplitSpec(seed=3, n_splits=2), 1.0, (0.0, 1.0, far))
    for c in curves.values():
        assert np.isfinite(c.values[:2]).all()
        assert np.isnan(c.values[2]) and c.split_counts[2] == 0
        assert (c.n_at_risk[:, 2] == 0).all()


def test_failed_landmark_fits_are_recorded(sim):
    # beyond the last training event no landmark model can be fitted
    last_event = float(sim.event_times[sim.events].max())
    t = float(np.sort(sim.event_times)[-2]) if last_event < sim.event_times.max() else last_event
    curves = fixed_base_protocol((LandmarkContender(),), sim, SplitSpec(seed=0, n_splits=2), t, (t + 0.5,))
    c = curves["landmark"]
    assert c.split_counts[0] + len(c.failures) >= 1


def test_jobs_do_not_change_results(sim, tmp_path):
    blocks = [ProtocolBlock(Protocol.FIXED_BASE, 1.0, make_grid(1.0, 3.0, 0.5)),
              ProtocolBlock(Protocol.FIXED_WINDOW, 1.0, (0.0, 1.0))]
    outputs = []
    for jobs in (1, 2):
        curves = run_protocols(CONTENDERS, sim, SplitSpec(seed=2, n_splits=3), blocks, jobs=jobs)
        path = tmp_path / f"pe_{jobs}.csv"
        write_curves_csv([c for block in curves for c in block.values()], path, {"config_digest": "x"})
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]
    with open(tmp_path / "pe_1.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 3 * (5 + 2)
