import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from diffgrn import dynamics
from diffgrn.dynamics import GrnState, compute_signatures, influence, reset, run, step
from diffgrn.genome import Genome

from conftest import make_genome


def genome_from_tags(tags, n_in, n_out, beta=1.0, delta=1.0):
    t = np.asarray(tags, dtype=float).reshape(-1, 3)
    return Genome(t[:, 0], t[:, 1], t[:, 2], n_in, n_out, beta, delta)


# --- signatures ---


def test_single_protein_signature():
    g = genome_from_tags([[0.3, 0.3, 0.8]], 0, 0, beta=1.0)
    sig = compute_signatures(g)
    assert sig.a_plus[0, 0] == 0.0
    assert sig.a_minus[0, 0] == pytest.approx(-0.5, abs=1e-15)
    assert sig.s[0, 0] == pytest.approx(1 - math.exp(-0.5), abs=1e-15)
    assert sig.s[0, 0] == pytest.approx(0.393469, abs=1e-6)


@pytest.mark.parametrize("beta", [0.05, 0.7, 2.0])
def test_matching_tags_give_zero_affinity(beta):
    # enh_1 == id_0
    g = genome_from_tags([[0.42, 0.1, 0.9], [0.8, 0.42, 0.2]], 0, 0, beta=beta)
    assert compute_signatures(g).a_plus[0, 1] == 0.0


def test_signatures_match_scalar_loop():
    g = Genome.random(2, 1, 3, np.random.default_rng(7)).replace(beta=1.37)
    sig = compute_signatures(g)
    n = g.n_proteins
    for i in range(n):
        for j in range(n):
            ap = -1.37 * abs(g.enh[j] - g.ids[i])
            am = -1.37 * abs(g.inh[j] - g.ids[i])
            assert abs(sig.a_plus[i, j] - ap) <= 1e-15
            assert abs(sig.a_minus[i, j] - am) <= 1e-15
            assert abs(sig.s[i, j] - (math.exp(ap) - math.exp(am))) <= 1e-15
    ref = dynamics.signatures_reference(g)
    np.testing.assert_allclose(sig.s, ref.s, rtol=0, atol=1e-15)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12))
def test_signature_invariants(seed, n):
    g = Genome.random(0, 0, n, np.random.default_rng(seed))
    sig = compute_signatures(g)
    assert np.all(sig.a_plus <= 0) and np.all(sig.a_minus <= 0)
    assert np.array_equal(sig.s, np.exp(sig.a_plus) - np.exp(sig.a_minus))
    assert np.all(np.abs(sig.s) < 1)


@given(seed=st.integers(0, 2**32 - 1))
def test_tag_match_is_the_affinity_maximum(seed):
    rng = np.random.default_rng(seed)
    g = Genome.random(0, 0, 4, rng)
    a = compute_signatures(g).a_plus
    diff = g.enh[None, :] - g.ids[:, None]
    assert np.array_equal(a == 0, diff == 0)


@given(d=st.floats(1e-3, 1.0), b1=st.floats(0.05, 2.0), b2=st.floats(0.05, 2.0))
def test_beta_monotonicity(d, b1, b2):
    lo, hi = sorted((b1, b2))
    g_lo = genome_from_tags([[0.0, d, 0.0]], 0, 0, beta=lo)
    g_hi = genome_from_tags([[0.0, d, 0.0]], 0, 0, beta=hi)
    assert np.exp(compute_signatures(g_hi).a_plus[0, 0]) <= np.exp(compute_signatures(g_lo).a_plus[0, 0])


# --- influence ---


def test_influence_single_protein():
    g = genome_from_tags([[0.3, 0.3, 0.8]], 0, 0)
    gv, hv = influence(GrnState(np.array([1.0])), compute_signatures(g), 1)
    assert gv[0] == 1.0


def test_influence_zero_concentrations():
    g = make_genome(1, 1, 3)
    gv, hv = influence(GrnState(np.zeros(5)), compute_signatures(g), 5)
    assert not gv.any() and not hv.any()


def test_influence_matches_brute_force(rng):
    g = Genome.random(0, 0, 5, rng)
    c = rng.uniform(size=5)
    sig = compute_signatures(g)
    gv, hv = influence(GrnState(c), sig, 5)
    for i in range(5):
        gi = sum(c[j] * math.exp(-g.beta * abs(g.enh[j] - g.ids[i])) for j in range(5)) / 5
        hi = sum(c[j] * math.exp(-g.beta * abs(g.inh[j] - g.ids[i])) for j in range(5)) / 5
        assert abs(gv[i] - gi) <= 1e-15
        assert abs(hv[i] - hi) <= 1e-15


# --- reset / step / run ---


@pytest.mark.parametrize("n_out, n_reg, value", [(1, 3, 0.25), (1, 0, 1.0), (2, 2, 0.25)])
def test_reset_is_uniform(n_out, n_reg, value):
    g = make_genome(2, n_out, n_reg)
    c = reset(g).concentrations
    assert np.all(c[:2] == 0)
    assert np.all(c[2:] == value)
    assert c[2:].sum() == pytest.approx(1.0, abs=1e-15)


def test_lone_regulatory_protein_stays_at_one(rng):
    g = Genome.random(0, 0, 1, rng)
    state = reset(g)
    for _ in range(5):
        state = step(g, state, [])
        assert state.concentrations[0] == 1.0


def test_normalization_is_proportional():
    # zero input and no regulatory sources: g = h = 0, so raw = (1, 3)
    g = genome_from_tags([[0.5, 0.5, 0.5], [0.1, 0.2, 0.3], [0.4, 0.5, 0.6]], 1, 2)
    out = step(g, GrnState(np.array([0.0, 1.0, 3.0])), [0.0])
    np.testing.assert_allclose(out.concentrations[1:], [0.25, 0.75], atol=1e-15)


def test_inputs_overwrite_state(rng):
    g = make_genome(3, 1, 2)
    out = step(g, reset(g), [0.1, 0.2, 0.3])
    np.testing.assert_array_equal(out.concentrations[:3], [0.1, 0.2, 0.3])


def test_outputs_do_not_act_as_sources():
    g = make_genome(1, 2, 2, seed=4)
    c = reset(g).concentrations.copy()
    a = step(g, GrnState(c), [0.7])
    c2 = c.copy()
    c2[1:3] = [0.9, 0.05]  # change only output concentrations
    b = step(g, GrnState(c2), [0.7])
    # regulatory raw values ignore outputs; after renormalising the output block differs
    sig = compute_signatures(g)
    src = dynamics.source_mask(g)
    assert not src[1] and not src[2]
    ga, ha = influence(GrnState(c), sig, g.n_proteins, src)
    gb, hb = influence(GrnState(c2), sig, g.n_proteins, src)
    np.testing.assert_array_equal(ga, gb)
    np.testing.assert_array_equal(ha, hb)
    assert not np.array_equal(a.concentrations, b.concentrations)


def test_step_matches_scalar_reference_trajectory():
    g = Genome.random(2, 1, 3, np.random.default_rng(11))
    x = [0.3, 0.9]
    ref = dynamics.run_reference(g, x, 4)
    state = reset(g)
    for t in range(4):
        state = step(g, state, x)
        np.testing.assert_allclose(state.concentrations, ref[t], rtol=0, atol=1e-12)


def test_degenerate_normalization_resets_to_uniform():
    # output starts at 0 and receives net inhibition -> every raw value is 0
    g = genome_from_tags([[0.5, 1.0, 0.0], [0.0, 0.0, 0.0]], 1, 1)
    assert compute_signatures(g).s[1, 0] < 0
    out = step(g, GrnState(np.array([0.0, 0.0])), [1.0])
    assert out.concentrations[1] == 1.0
    assert out.degenerate == 1


def test_unroll_counts_degenerate_rows():
    g = genome_from_tags([[0.5, 1.0, 0.0], [0.0, 0.0, 0.0]], 1, 1, delta=100.0)
    rec = []
    out = dynamics.unroll(g, np.array([[1.0], [0.0]]), 2, record=rec)
    assert rec[0].degenerate.tolist() == [True, False]
    assert np.all(np.isfinite(out))


def test_run_single_step_equals_step_after_reset(rng):
    g = make_genome(2, 2, 3)
    x = [0.4, 0.6]
    out = step(g, reset(g), x).concentrations[2:4]
    np.testing.assert_allclose(run(g, x, 1), out, rtol=0, atol=1e-15)


def test_run_is_deterministic():
    g = make_genome(2, 1, 4, seed=9)
    assert np.array_equal(run(g, [0.2, 0.5], 3), run(g, [0.2, 0.5], 3))


def test_run_equals_three_manual_steps():
    g = make_genome(3, 1, 4, seed=5)
    x = [0.1, 0.5, 0.9]
    s = reset(g)
    for _ in range(3):
        s = step(g, s, x)
    np.testing.assert_allclose(run(g, x, 3), s.concentrations[3:4], rtol=0, atol=1e-14)


def test_batched_rows_are_independent(rng):
    g = make_genome(2, 1, 3)
    x = rng.uniform(size=(6, 2))
    batch = dynamics.run_batch(g, x, 3)
    for k in range(6):
        np.testing.assert_allclose(batch[k], run(g, x[k], 3), rtol=0, atol=1e-15)


@given(seed=st.integers(0, 2**32 - 1), n_in=st.integers(1, 4), n_out=st.integers(1, 3), n_reg=st.integers(0, 8))
def test_conservation(seed, n_in, n_out, n_reg):
    rng = np.random.default_rng(seed)
    g = Genome.random(n_in, n_out, n_reg, rng)
    s = reset(g)
    for _ in range(10):
        s = step(g, s, rng.uniform(size=n_in))
        assert np.all(s.concentrations >= 0)
        assert abs(s.concentrations[n_in:].sum() - 1.0) <= 1e-9


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 20), steps=st.integers(1, 10))
def test_matrix_form_matches_scalar_reference(seed, n, steps):
    rng = np.random.default_rng(seed)
    n_in = int(rng.integers(1, n))
    n_out = int(rng.integers(1, n - n_in + 1))
    g = Genome.random(n_in, n_out, n - n_in - n_out, rng)
    x = rng.uniform(size=n_in)
    ref = dynamics.run_reference(g, x, steps)[-1]
    np.testing.assert_allclose(run(g, x, steps), ref[n_in : n_in + n_out], rtol=0, atol=1e-12)


def test_input_length_checked():
    from diffgrn.errors import ShapeMismatch

    with pytest.raises(ShapeMismatch):
        run(make_genome(2, 1, 1), [0.1], 1)
