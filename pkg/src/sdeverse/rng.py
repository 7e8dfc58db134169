"""Splittable random streams built on numpy's SeedSequence.

A stream is identified by the pair (root_seed, path). Deriving a child
appends one label to the path; SeedSequence hashes the pair into a PCG64
state, so distinct paths give statistically independent streams and the
same path always reproduces the same draws, regardless of which thread
or process asks for them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter

_U64_MAX = 2**64 - 1


def _check_label(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise InvalidParameter(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if not 0 <= value <= _U64_MAX:
        raise InvalidParameter(f"{name} must fit in an unsigned 64-bit word, got {value}")
    return value


@dataclass(frozen=True)
class RngStream:
    """Immutable handle for one reproducible random stream.

    The handle is cheap to copy and safe to share between threads.
    ``generator()`` materializes a numpy Generator positioned at the start
    of the stream; advancing that generator never touches the handle, so
    each handle should feed exactly one consumer. Hand out children via
    ``derive`` instead of sharing a live generator.
    """

    root_seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "root_seed", _check_label(self.root_seed, "root_seed"))
        object.__setattr__(
            self, "path", tuple(_check_label(p, "path label") for p in self.path)
        )

    def derive(self, label: int) -> "RngStream":
        """Child stream with ``label`` appended to this stream's path."""
        return RngStream(self.root_seed, self.path + (_check_label(label, "label"),))

    def generator(self) -> np.random.Generator:
        """Fresh Generator at the start of this stream. Every call restarts."""
        seq = np.random.SeedSequence(entropy=self.root_seed, spawn_key=self.path)
        return np.random.default_rng(seq)


def derive_stream(parent: RngStream, label: int) -> RngStream:
    """Functional alias for :meth:`RngStream.derive`; parent is unaffected."""
    return parent.derive(label)


def as_generator(rng) -> np.random.Generator:
    """Accept either a stream handle or an already-advanced Generator.

    Stream handles are materialized fresh (pure given the handle); passing
    a Generator lets callers advance one stream across repeated calls.
    """
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise InvalidParameter(
        f"expected RngStream or numpy Generator, got {type(rng).__name__}"
    )


def sample_standard(kind: str, rng, **params) -> float:
    """One draw from a named scalar law.

    kind selects the family; parameters are keyword-only:
    ``student_t(nu)``, ``poisson(lam)``, ``exponential(rate)``,
    ``uniform(a, b)``, ``chi_square(nu)``. ``normal`` takes none.
    """
    g = as_generator(rng)
    if kind == "normal":
        _reject_extras(kind, params, ())
        return float(g.standard_normal())
    if kind == "student_t":
        nu = _pull(kind, params, "nu")
        if not nu > 0:
            raise InvalidParameter(f"student_t requires nu > 0, got {nu}")
        return float(g.standard_t(nu))
    if kind == "poisson":
        lam = _pull(kind, params, "lam")
        if not lam >= 0:
            raise InvalidParameter(f"poisson requires lam >= 0, got {lam}")
        return float(g.poisson(lam))
    if kind == "exponential":
        rate = _pull(kind, params, "rate")
        if not rate > 0:
            raise InvalidParameter(f"exponential requires rate > 0, got {rate}")
        return float(g.exponential(1.0 / rate))
    if kind == "uniform":
        a = _pull(kind, params, "a", expect_more=True)
        b = _pull(kind, params, "b")
        if not a < b:
            raise InvalidParameter(f"uniform requires a < b, got a={a}, b={b}")
        return float(g.uniform(a, b))
    if kind == "chi_square":
        nu = _pull(kind, params, "nu")
        if not nu > 0:
            raise InvalidParameter(f"chi_square requires nu > 0, got {nu}")
        return float(g.chisquare(nu))
    raise InvalidParameter(f"unknown distribution kind {kind!r}")


def _pull(kind: str, params: dict, name: str, expect_more: bool = False):
    if name not in params:
        raise InvalidParameter(f"{kind} requires parameter {name!r}")
    value = params.pop(name)
    if not expect_more:
        _reject_extras(kind, params, ())
    try:
        return float(value)
    except (TypeError, ValueError):
        raise InvalidParameter(f"{kind} parameter {name!r} must be a real number") from None


def _reject_extras(kind: str, params: dict, allowed: tuple) -> None:
    extras = [k for k in params if k not in allowed]
    if extras:
        raise InvalidParameter(f"{kind} got unexpected parameters {extras}")
