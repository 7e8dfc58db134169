import matplotlib
import numpy as np
from hypothesis import HealthCheck, settings

from sdeverse.linalg import CorrelationMatrix, cholesky
from sdeverse.systems import (CurriculumLevel, DiffusionSpec, DriftSpec,
                              JumpSpec, RegimeSpec, SdeSystemSpec)

matplotlib.use("Agg", force=True)

settings.register_profile(
    "ci",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def diag_spec(level, drift, base_vol, init, jumps=None, regimes=None,
              state_scale=None, n_features=0):
    """Spec with identity correlation, handy for analytic scenarios."""
    d = len(drift)
    corr = CorrelationMatrix.identity(d)
    return SdeSystemSpec(
        n_features=n_features,
        n_targets=d - n_features,
        level=CurriculumLevel(level),
        drift=tuple(drift),
        diffusion=DiffusionSpec(
            base_vol=np.asarray(base_vol, dtype=float),
            state_scale=(np.zeros(d) if state_scale is None
                         else np.asarray(state_scale, dtype=float)),
            correlation=corr,
            chol=cholesky(corr.entries),
        ),
        jumps=jumps if jumps is not None else JumpSpec.disabled(d),
        regimes=regimes if regimes is not None else RegimeSpec.disabled(d),
        init_state=np.asarray(init, dtype=float),
    )


def constant_drift(rate=0.0, level_param=0.0):
    return DriftSpec(kind="constant", level_param=level_param, rate=rate)


def reverting_drift(rate=1.0, level_param=0.0):
    return DriftSpec(kind="linear_mean_reversion", level_param=level_param,
                     rate=rate)
