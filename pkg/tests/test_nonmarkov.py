import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvnonmarkov.channels import DampingModel, QbmModel, damping_x
from cvnonmarkov.exceptions import ValidationError
from cvnonmarkov.gaussian import (
    make_mts,
    make_sts,
    mean_excitations,
    mts_at_energy,
    random_state,
    standard_form_matrix,
    sts_at_energy,
)
from cvnonmarkov.gip import gip_general, gip_reduced
from cvnonmarkov.nonmarkov import (
    ProbeFamily,
    divisibility_eigenvalues,
    divisibility_G,
    divisibility_ND,
    gip_trajectory,
    measure,
    time_grid,
    witness,
    witness_batch,
)

PI = np.pi


def damped_gip(model, a, b, c, sign, t):
    """GIP of an evolved standard-form probe through the reduced formula."""
    x = damping_x(model, t)
    return gip_reduced(a * np.exp(-x) + 1 - np.exp(-x), b, c * np.exp(-x / 2), sign)


def test_time_grid_includes_endpoint():
    t = time_grid(1.0, 0.25)
    assert t[0] == 0.0 and t[-1] == 1.0 and len(t) == 5
    assert time_grid(1.0, 0.3)[-1] <= 1.0
    with pytest.raises(ValidationError):
        time_grid(1.0, 0.0)


def test_product_probe_has_zero_witness():
    r = witness(DampingModel(alpha=0.4), standard_form_matrix(3.0, 2.0, 0.0, 0.0))
    assert r.NQ_sigma == 0.0 and len(r.intervals) == 0


def test_markovian_damping_has_zero_witness():
    model = DampingModel.constant(alpha=0.3, gamma=1.0)
    assert witness(model, make_mts(1.0, 0.5)).NQ_sigma == 0.0
    assert divisibility_ND(model).ND == 0.0


def test_gip_extrema_track_x():
    model = DampingModel(alpha=0.3)
    times, q = gip_trajectory(model, make_sts(1.0, 0.6))
    inside = (times > 0.5) & (times < 3 * PI)
    i_min = np.argmin(np.where(inside, q, np.inf))
    i_max = np.argmax(np.where(inside & (times > PI + 0.1), q, -np.inf))
    assert times[i_min] == pytest.approx(PI, abs=0.01)
    assert times[i_max] == pytest.approx(2 * PI, abs=0.01)


def test_mts_witness_against_reduced_oracle():
    model = DampingModel(alpha=0.1)
    k, r = 1.0, 0.5
    m = make_mts(k, r)
    res = witness(model, m)
    want = damped_gip(model, m[0, 0], m[2, 2], m[0, 2], -1, 2 * PI) - damped_gip(model, m[0, 0], m[2, 2], m[0, 2], -1, PI)
    assert res.NQ_sigma == pytest.approx(want, rel=1e-9)
    assert len(res.intervals) == 1
    assert res.intervals[0].t_start == pytest.approx(PI, abs=1e-6)
    assert res.intervals[0].t_end == pytest.approx(2 * PI, abs=1e-6)


@settings(max_examples=20)
@given(r=st.floats(0.01, 2.0), alpha=st.floats(0.05, 1.0))
def test_mts_witness_positive_under_damping(r, alpha):
    assert witness(DampingModel(alpha=alpha), make_mts(1.0, r)).NQ_sigma > 0


@settings(max_examples=20)
@given(seed=st.integers(0, 2**31), nbar=st.floats(0.1, 4.0))
def test_witness_nonnegative_and_batch_agrees(seed, nbar):
    model = DampingModel(alpha=0.2)
    sigma = random_state(nbar, seed)
    single = witness(model, sigma).NQ_sigma
    assert single >= 0
    batch = witness_batch(model, sigma[None])[0]
    assert batch == pytest.approx(single, rel=1e-7, abs=1e-12)


def test_batch_matches_single_on_qbm():
    model = QbmModel(alpha=0.5, T=0.0, omega0=4.0, lambda2_literal=True)
    probes = [sts_at_energy(2.5), mts_at_energy(2.5), random_state(2.5, 3)]
    batch = witness_batch(model, np.stack(probes))
    single = [witness(model, s).NQ_sigma for s in probes]
    assert np.allclose(batch, single, rtol=1e-7, atol=1e-12)


def test_literal_noise_qbm_mts_beats_sts():
    # alternative Lambda2 normalisation: the MTS probe detects memory at w0 = 4 while STS does not
    model = QbmModel(alpha=0.5, T=0.0, omega0=4.0, lambda2_literal=True)
    sts, mts = witness_batch(model, np.stack([sts_at_energy(2.5), mts_at_energy(2.5)]))
    assert sts == 0.0
    assert mts > 1e-4


def test_measure_ordering_and_log():
    res = measure(DampingModel(alpha=0.2), 1.0, n_random=20, pattern_iters=30)
    values = [v for _, _, v in res.log]
    assert res.NQ == max(values)
    assert {f for f, _, _ in res.log} >= {ProbeFamily.STS, ProbeFamily.MTS, ProbeFamily.RANDOM}
    # every probe in the log sits on the energy shell
    for _, (a, b, c, d), _ in res.log:
        assert a + b == pytest.approx(4.0 + 2.0, abs=1e-9)
    assert mean_excitations(res.argmax_probe.to_matrix()).nbar == pytest.approx(1.0, abs=1e-9)
    sts_pure = witness(DampingModel(alpha=0.2), sts_at_energy(1.0)).NQ_sigma
    assert res.NQ >= sts_pure


def test_measure_is_deterministic():
    a = measure(DampingModel(alpha=0.2), 0.5, n_random=5, pattern_iters=5)
    b = measure(DampingModel(alpha=0.2), 0.5, n_random=5, pattern_iters=5)
    assert a.NQ == b.NQ and a.argmax_probe == b.argmax_probe


def test_measure_vanishes_with_energy():
    lo = measure(DampingModel(alpha=0.2), 1e-4, n_random=5, pattern_iters=10).NQ
    hi = measure(DampingModel(alpha=0.2), 1.0, n_random=5, pattern_iters=10).NQ
    assert lo < 1e-3 * hi


def test_divisibility_damping_closed_form():
    alpha = 0.1
    model = DampingModel(alpha=alpha)
    res = divisibility_ND(model)
    # G equals -dx/dt where gamma < 0, so ND = x(pi) - x(2 pi)
    want = damping_x(model, PI) - damping_x(model, 2 * PI)
    assert res.ND == pytest.approx(want, rel=1e-4)
    assert len(res.intervals) == 1
    assert res.intervals[0].t_start == pytest.approx(PI, abs=1e-4)
    assert res.intervals[0].t_end == pytest.approx(2 * PI, abs=1e-4)


def test_divisibility_eigenvalues_and_G_signs():
    model = DampingModel(alpha=0.3)
    assert divisibility_G(model, 1.0) == 0.0
    nu = divisibility_eigenvalues(model, 1.5 * PI)
    assert nu.min() < 0
    assert divisibility_G(model, 1.5 * PI) == pytest.approx(-2 * 0.3 * (-0.5 * np.exp(-0.15 * PI)), rel=1e-4)


def test_divisibility_eps_robustness():
    model = DampingModel(alpha=0.1)
    values = [divisibility_ND(model, eps=e).ND for e in (1e-4, 1e-5, 1e-6)]
    assert max(values) - min(values) < 1e-3 * values[1]


@pytest.mark.parametrize("alpha", [0.05, 0.3, 1.0])
def test_witness_implies_divisibility_breaking(alpha):
    model = DampingModel(alpha=alpha)
    nq = witness(model, make_mts(1.0, 0.5)).NQ_sigma
    nd = divisibility_ND(model).ND
    assert nq > 0 and nd > 0


def test_qbm_divisibility_detects_memory():
    model = QbmModel(alpha=0.5, T=0.0, omega0=4.0)
    assert divisibility_ND(model).ND > 0


def test_gip_trajectory_matches_pointwise_gip():
    model = DampingModel(alpha=0.4)
    sigma = random_state(1.2, 8)
    times, q = gip_trajectory(model, sigma, t_max=6.0, dt=0.5)
    direct = [gip_general(model.evolve(sigma, t)) for t in times]
    assert np.allclose(q, direct, rtol=1e-8, atol=1e-12)
