"""Distributional checks on the system sampler: which blocks can appear
at each level and at what frequency, plus determinism and validity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdeverse.errors import InvalidLevel, InvalidParameter
from sdeverse.rng import RngStream, derive_stream
from sdeverse.sampler import sample_system
from sdeverse.systems import validate_spec


def batch(level, n, n_features=0, n_targets=3, seed=1234):
    root = derive_stream(RngStream(root_seed=seed), level)
    return [sample_system(level, n_features, n_targets, derive_stream(root, i))
            for i in range(n)]


def test_every_level_yields_valid_specs():
    for level in range(8):
        for spec in batch(level, 10, seed=500 + level):
            assert validate_spec(spec) == [], (level, validate_spec(spec))


def test_determinism_given_equal_streams():
    a = sample_system(7, 1, 4, derive_stream(RngStream(root_seed=3), 9))
    b = sample_system(7, 1, 4, derive_stream(RngStream(root_seed=3), 9))
    assert np.array_equal(a.init_state, b.init_state)
    assert np.array_equal(a.diffusion.correlation.entries,
                          b.diffusion.correlation.entries)
    assert a.drift == b.drift or all(
        x.kind == y.kind and x.rate == y.rate for x, y in zip(a.drift, b.drift))


def test_level_zero_is_deterministic_drift_only():
    for spec in batch(0, 20):
        assert np.all(spec.diffusion.base_vol == 0.0)
        assert not spec.jumps.enabled
        assert not spec.regimes.enabled
        assert all(d.kind in ("constant", "linear_mean_reversion")
                   for d in spec.drift)
        assert all(d.forcing_amplitude == 0.0 for d in spec.drift)


def test_level_one_always_has_diffusion():
    specs = batch(1, 40)
    assert all(np.all(s.diffusion.base_vol > 0) for s in specs)
    assert all(np.array_equal(s.diffusion.correlation.entries, np.eye(3))
               for s in specs)
    # optional newcomers appear both ways
    forced = [any(d.forcing_amplitude > 0 for d in s.drift) for s in specs]
    assert any(forced) and not all(forced)


def test_newest_dynamic_always_included():
    # the defining mechanism of each level is never dropped by the mixer
    assert all(s.jumps.enabled for s in batch(5, 30))
    six = batch(6, 30)
    assert all(s.regimes.enabled and s.regimes.mechanism == "telegraph"
               for s in six)
    seven = batch(7, 30)
    assert all(s.regimes.enabled and s.regimes.mechanism == "logistic"
               for s in seven)


def test_lower_dynamics_mix_in_at_half_rate():
    specs = batch(7, 200)
    jump_frac = np.mean([s.jumps.enabled for s in specs])
    assert 0.4 <= jump_frac <= 0.6


def test_correlation_modes_respect_level_ladder():
    # below level 2 correlation stays identity; level 4 can couple everything
    for spec in batch(1, 10, n_features=2, n_targets=2, seed=88):
        assert np.array_equal(spec.diffusion.correlation.entries, np.eye(4))
    four = batch(4, 60, n_features=2, n_targets=2, seed=89)
    cross = [np.abs(s.diffusion.correlation.entries[:2, 2:]).max() > 1e-12
             for s in four]
    assert any(cross)


def test_block_mode_keeps_cross_block_zero():
    two = batch(2, 40, n_features=2, n_targets=2, seed=90)
    coupled = 0
    for s in two:
        c = s.diffusion.correlation.entries
        assert np.abs(c[:2, 2:]).max() == 0.0
        coupled += np.abs(c[:2, :2] - np.eye(2)).max() > 1e-12
    assert coupled > 0


def test_parameter_ranges_hold():
    for spec in batch(7, 25, seed=4242):
        for d in spec.drift:
            assert 0.1 <= d.rate <= 4.0
            assert -2.0 <= d.level_param <= 2.0
        assert np.all(spec.diffusion.base_vol >= 0.05)
        assert np.all(spec.diffusion.base_vol <= 1.0)
        assert np.all(spec.diffusion.state_scale <= 1.0)
        assert np.all(np.abs(spec.init_state) <= 1.0)
        if spec.jumps.enabled:
            assert np.all((0.5 <= spec.jumps.intensity)
                          & (spec.jumps.intensity <= 10.0))
            assert np.all(np.abs(spec.jumps.jump_mean) <= 0.5)
            assert np.all((0.02 <= spec.jumps.jump_std)
                          & (spec.jumps.jump_std <= 0.3))
        assert spec.regimes.enabled
        assert np.all(np.abs(spec.regimes.drift_offset) <= 1.0)


@settings(max_examples=30)
@given(st.integers(min_value=0, max_value=7),
       st.integers(min_value=0, max_value=3),
       st.integers(min_value=1, max_value=5),
       st.integers(min_value=0, max_value=2**20))
def test_sampled_specs_always_validate(level, m, n, seed):
    spec = sample_system(level, m, n, RngStream(root_seed=seed))
    assert spec.dims == m + n
    assert validate_spec(spec) == []


def test_rejects_bad_arguments():
    with pytest.raises(InvalidLevel):
        sample_system(9, 0, 3, RngStream(root_seed=0))
    with pytest.raises(InvalidParameter):
        sample_system(3, 0, 0, RngStream(root_seed=0))
    with pytest.raises(InvalidParameter):
        sample_system(3, -1, 3, RngStream(root_seed=0))
