import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zspike import (
    NON_SPIKE,
    ContractError,
    NetworkTopology,
    causal_set,
    network_forward,
    network_forward_batch,
    neuron_first_spike,
    nth_spike_time,
    time_from_z,
    z_from_time,
)
from zspike.core import CausalSet
from zspike.train import init_weights


def brute_force_causal_set(z_in, w):
    """Independent oracle: try every sorted prefix against the closed form."""
    z_in = np.asarray(z_in, float)
    w = np.asarray(w, float)
    order = np.argsort(z_in, kind="stable")
    for i in range(1, len(z_in) + 1):
        prefix = order[:i]
        if z_in[prefix[-1]] >= NON_SPIKE:
            break
        w_sum = w[prefix].sum()
        if w_sum <= 1.0:
            continue
        z_out = (w[prefix] * z_in[prefix]).sum() / (w_sum - 1.0)
        next_spike = z_in[order[i]] if i < len(z_in) else NON_SPIKE
        if z_out < next_spike:
            return frozenset(prefix.tolist()), z_out
    return frozenset(), NON_SPIKE


class TestZTransform:
    def test_zero_time(self):
        assert z_from_time(0.0) == 1.0

    def test_dark_pixel_encoding_time(self):
        assert z_from_time(np.log(6)) == pytest.approx(6.0)

    def test_round_trip(self):
        assert z_from_time(2.0) == pytest.approx(7.389056, abs=1e-6)
        assert time_from_z(z_from_time(2.0)) == pytest.approx(2.0)

    def test_overflow_saturates(self):
        assert z_from_time(1e9) == NON_SPIKE
        assert time_from_z(NON_SPIKE) == np.inf

    def test_sentinel_is_maximal(self):
        assert NON_SPIKE > z_from_time(700.0)


class TestCausalSet:
    def test_two_of_three(self):
        c, z_out = causal_set([1, 2, 10], [0.6, 0.6, 0.6])
        assert c.indices == {0, 1}
        assert z_out == pytest.approx(9.0)

    def test_needs_all_three(self):
        # a 2-prefix would fire at 9 > 3, after the third input arrives
        c, z_out = causal_set([1, 2, 3], [0.6, 0.6, 0.6])
        assert c.indices == {0, 1, 2}
        assert z_out == pytest.approx(4.5)

    def test_tie_with_next_spike_rejects_prefix(self):
        # prefix {0} fires exactly at the second input's time: not strictly
        # before it, and the full set has weight sum 0
        c, z_out = causal_set([1, 2], [2.0, -2.0])
        assert c.is_empty
        assert z_out == NON_SPIKE

    def test_sentinel_inputs_never_members(self):
        c, z_out = causal_set([1.0, NON_SPIKE], [0.6, 10.0])
        assert c.is_empty
        c, z_out = causal_set([1.0, NON_SPIKE], [1.5, 10.0])
        assert c.indices == {0}
        assert z_out == pytest.approx(3.0)

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            causal_set([1, 2], [0.5])

    @given(
        st.lists(st.floats(0.0, 4.0), min_size=1, max_size=8),
        st.data(),
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_prefix_enumeration_oracle(self, times, data):
        z = np.exp(np.array(times))
        w = np.array(
            data.draw(
                st.lists(
                    st.floats(-1.5, 1.5), min_size=len(times), max_size=len(times)
                )
            )
        )
        expected_set, expected_z = brute_force_causal_set(z, w)
        c, z_out = causal_set(z, w)
        assert c.indices == expected_set
        assert z_out == pytest.approx(expected_z, rel=1e-12)

    def test_causal_ordering_invariant(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            n = rng.integers(1, 8)
            z = np.exp(rng.uniform(0, 3, n))
            w = rng.uniform(-1, 1.5, n)
            c, z_out = causal_set(z, w)
            if c.is_empty:
                continue
            members = np.fromiter(c.indices, dtype=int)
            excluded = np.setdiff1d(np.arange(n), members)
            assert z_out > z[members].max()
            if excluded.size:
                assert z_out < z[excluded].min()
            assert w[members].sum() > 1.0
            assert z_out > 0


class TestNeuronFirstSpike:
    def test_single_input(self):
        # matches the membrane solution 2(1 - e^-t) = 1 at t = ln 2
        assert neuron_first_spike([1.0], [2.0], CausalSet(frozenset({0}))) == pytest.approx(2.0)

    def test_matches_causal_set_search(self):
        c, z_out = causal_set([1, 2, 10], [0.6, 0.6, 0.6])
        assert neuron_first_spike([1, 2, 10], [0.6, 0.6, 0.6], c) == pytest.approx(z_out)

    def test_empty_set(self):
        assert neuron_first_spike([1.0], [0.5], CausalSet()) == NON_SPIKE

    def test_invalid_set_raises(self):
        with pytest.raises(ContractError):
            neuron_first_spike([1.0], [0.5], CausalSet(frozenset({0})))

    @given(st.floats(0.01, 1000.0))
    @settings(max_examples=100, deadline=None)
    def test_homogeneity(self, k):
        z = np.array([1.0, 2.0, 10.0])
        w = np.array([0.6, 0.6, 0.6])
        c, z_out = causal_set(k * z, w)
        assert c.indices == {0, 1}
        assert z_out == pytest.approx(9.0 * k, rel=1e-12)


class TestNetworkForward:
    def test_single_neuron_network(self):
        top = NetworkTopology((1, 1))
        trace = network_forward(top, [np.array([[2.0]])], [1.0])
        assert trace.z_out[0] == pytest.approx(2.0)
        assert [len(z) for z in trace.z_layers] == [1, 1]

    def test_zero_weights_never_spike(self):
        top = NetworkTopology((3, 4, 2))
        weights = [np.zeros(top.weight_shape(l)) for l in range(2)]
        trace = network_forward(top, weights, [1.0, 2.0, 3.0])
        assert np.all(trace.z_layers[1] == NON_SPIKE)
        assert np.all(trace.z_out == NON_SPIKE)

    def test_dimension_mismatch(self):
        top = NetworkTopology((3, 4, 2))
        weights = [np.zeros((4, 3)), np.zeros((2, 3))]
        with pytest.raises(ContractError):
            network_forward(top, weights, [1.0, 2.0, 3.0])

    def test_reference_neuron_adds_source_column(self):
        top = NetworkTopology((2, 3), use_reference_neuron=True)
        assert top.weight_shape(0) == (3, 3)
        w = np.array([[1.5, 0.0, 0.0], [0.0, 1.5, 0.0], [0.0, 0.0, 1.5]])
        trace = network_forward(top, [w], [2.0, 4.0])
        # first neuron listens only to the reference spike at z = 1
        assert trace.z_out[0] == pytest.approx(3.0)
        assert trace.z_out[1] == pytest.approx(6.0)
        assert trace.z_out[2] == pytest.approx(12.0)

    def test_relabeling_equivariance(self):
        rng = np.random.default_rng(3)
        top = NetworkTopology((4, 5, 3))
        weights = init_weights(top, 11)
        z = np.exp(rng.uniform(0, 2, 4))
        base = network_forward(top, weights, z).z_out
        perm_in = rng.permutation(4)
        perm_hidden = rng.permutation(5)
        permuted = [weights[0][perm_hidden][:, perm_in], weights[1][:, perm_hidden]]
        out = network_forward(top, permuted, z[perm_in]).z_out
        np.testing.assert_allclose(out, base, rtol=1e-12)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(5)
        top = NetworkTopology((3, 4, 2), use_reference_neuron=True)
        weights = init_weights(top, 9)
        zs = np.exp(rng.uniform(0, 2, (6, 3)))
        batch = network_forward_batch(top, weights, zs)
        for b in range(6):
            single = network_forward(top, weights, zs[b])
            np.testing.assert_array_equal(single.z_out, batch.z_out[b])

    def test_causal_sets_exposed(self):
        top = NetworkTopology((3, 1))
        trace = network_forward(top, [np.array([[0.6, 0.6, 0.6]])], [1.0, 2.0, 10.0])
        (c,) = trace.causal_sets(0)
        assert c.indices == {0, 1}


class TestNthSpikeTime:
    def test_first_spike_reduces_to_closed_form(self):
        assert nth_spike_time([1.0], [2.0], 1) == pytest.approx(2.0)

    def test_zero_denominator_never_fires_twice(self):
        assert nth_spike_time([1.0], [2.0], 2) == NON_SPIKE

    def test_second_spike(self):
        # verified against reset-to-zero time-stepped simulation (t = ln 3)
        assert nth_spike_time([1.0, 2.0], [2.0, 2.0], 2) == pytest.approx(3.0)

    def test_matches_causal_set_for_q1(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            z = np.exp(rng.uniform(0, 2, 5))
            w = rng.uniform(-1, 1.5, 5)
            _, z_out = causal_set(z, w)
            assert nth_spike_time(z, w, 1) == pytest.approx(z_out, rel=1e-12)

    def test_invalid_q(self):
        with pytest.raises(ContractError):
            nth_spike_time([1.0], [2.0], 0)
