"""Empirical ground truth: seeded Monte Carlo simulation under memoryless
policies, and value iteration on integer-lattice models.

Both are deliberately naive.  They share nothing with the certificate code
beyond the model representation, so agreement between them is evidence.
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .semantics import Distribution, ModelIR, as_fraction

log = logging.getLogger(__name__)

CHUNK = 1 << 17
DEFAULT_STEP_CAP = 10**6
UNRELIABLE_FRACTION = 0.01


class UnsupportedModel(ValueError):
    """The model is outside what an oracle can handle (e.g. off-lattice)."""


@dataclass(frozen=True)
class Policy:
    """Memoryless resolver of the nondeterministic choice.

    ``kind`` is ``"always"`` (block ``block``, 1-based), ``"uniform"`` or
    ``"greedy"`` (a table over an integer box, ``default`` off the table).
    """

    kind: str
    block: int | None = None
    table: np.ndarray | None = field(default=None, compare=False)
    lo: tuple[int, ...] | None = None
    default: int = 1

    @classmethod
    def always(cls, block: int) -> "Policy":
        if block < 1:
            raise ValueError("blocks are numbered from 1")
        return cls("always", block)

    @classmethod
    def uniform(cls) -> "Policy":
        return cls("uniform")

    @classmethod
    def greedy(cls, table: np.ndarray, lo: Sequence[int], default: int = 1) -> "Policy":
        return cls("greedy", None, np.asarray(table, dtype=np.int64), tuple(int(v) for v in lo), default)

    @classmethod
    def parse(cls, text: str) -> "Policy":
        """``always:L`` or ``uniform``."""
        if text == "uniform":
            return cls.uniform()
        if text.startswith("always:"):
            try:
                return cls.always(int(text.split(":", 1)[1]))
            except ValueError:
                pass
        raise ValueError(f"policy must be 'always:L' or 'uniform', not {text!r}")

    def describe(self) -> str:
        if self.kind == "always":
            return f"always({self.block})"
        return "uniform-random" if self.kind == "uniform" else "greedy-table"

    def check(self, model: ModelIR) -> None:
        if self.kind == "always" and not 1 <= self.block <= model.k:
            raise ValueError(f"always({self.block}) needs 1 <= block <= {model.k}")

    def choose(self, X: np.ndarray, u: np.ndarray | None, k: int) -> np.ndarray:
        """0-based block index per row of ``X``; ``u`` is a uniform draw per row."""
        n = X.shape[0]
        if self.kind == "always":
            return np.full(n, self.block - 1, dtype=np.int64)
        if self.kind == "uniform":
            return np.minimum((u * k).astype(np.int64), k - 1)
        idx = np.rint(X).astype(np.int64) - np.asarray(self.lo)
        shape = np.asarray(self.table.shape)
        inside = np.all((idx >= 0) & (idx < shape), axis=1) & np.all(np.isclose(X, np.rint(X)), axis=1)
        out = np.full(n, self.default - 1, dtype=np.int64)
        if inside.any():
            out[inside] = self.table[tuple(idx[inside].T)] - 1
        return out


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    stderr: float | None
    trials: int
    truncated_fraction: float
    seed: int
    policy: str = ""
    step_cap: int = DEFAULT_STEP_CAP

    @property
    def reliable(self) -> bool:
        return self.truncated_fraction <= UNRELIABLE_FRACTION

    def to_dict(self) -> dict:
        return {
            "mean": self.mean, "stderr": self.stderr, "trials": self.trials,
            "truncated_fraction": self.truncated_fraction, "seed": self.seed, "policy": self.policy,
            "step_cap": self.step_cap, "reliable": self.reliable,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimEstimate":
        return cls(d["mean"], d["stderr"], d["trials"], d["truncated_fraction"], d["seed"], d.get("policy", ""),
                   d.get("step_cap", DEFAULT_STEP_CAP))


class _Compiled:
    """Float arrays for fast stepping."""

    def __init__(self, model: ModelIR):
        self.model = model
        R = model.sampling_vars
        col = {w: j for j, w in enumerate(R)}
        self.A = np.array([[[float(v) for v in row] for row in b.fmap.A] for b in model.blocks])
        self.B = np.array([[[float(v) for v in row] for row in b.fmap.B] for b in model.blocks]).reshape(
            model.k, len(model.program_vars), len(R))
        self.c = np.array([[float(v) for v in b.fmap.c] for b in model.blocks])
        self.r = np.zeros((model.k, len(R)))
        self.r0 = np.zeros(model.k)
        for l, b in enumerate(model.blocks):
            for name, coef in b.reward.terms:
                self.r[l, col[name]] = float(coef)
            self.r0[l] = float(b.reward.const)
        g = model.guard
        self.g = np.array([float(g.lhs.coeff(v)) for v in model.program_vars])
        self.g_rhs = float(g.rhs - g.lhs.const)
        self.g_strict = g.strict
        self.dists = []
        for d in model.distributions:
            cols = [col[v] for v in d.variables]
            if d.is_discrete:
                pts = np.array([[float(v) for v in pt] for pt, _ in d.support])
                cum = np.cumsum([float(p) for _, p in d.support])
                cum[-1] = 1.0
                self.dists.append(("discrete", cols, pts, cum))
            else:
                self.dists.append(("uniform", cols, float(d.lo), float(d.hi)))
        self.n_sampling = len(R)

    def in_guard(self, X: np.ndarray) -> np.ndarray:
        s = X @ self.g
        return s < self.g_rhs if self.g_strict else s <= self.g_rhs

    def used_dists(self, l: int) -> list[int]:
        """Distributions block ``l`` reads, through its update or its reward."""
        used = np.any(self.B[l] != 0, axis=0) | (self.r[l] != 0)
        return [j for j, d in enumerate(self.dists) if used[d[1]].any()]

    def sample(self, U: np.ndarray, which: Sequence[int] | None = None) -> np.ndarray:
        """Sampling valuations from uniforms; column ``j`` of ``U`` drives ``which[j]``."""
        S = np.zeros((U.shape[0], self.n_sampling))
        which = range(len(self.dists)) if which is None else which
        for j, d in enumerate(self.dists[i] for i in which):
            if d[0] == "discrete":
                _, cols, pts, cum = d
                idx = np.minimum(np.searchsorted(cum, U[:, j], side="right"), len(cum) - 1)
                S[:, cols] = pts[idx]
            else:
                _, cols, lo, hi = d
                S[:, cols[0]] = lo + (hi - lo) * U[:, j]
        return S


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STEP = np.uint64(0xD1B54A32D192ED03)
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    # SplitMix64 finalizer
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def trial_keys(seed: int, trials: np.ndarray) -> np.ndarray:
    base = _mix(np.array([seed], dtype=np.uint64) * _GOLDEN + _GOLDEN)
    return _mix(base + trials.astype(np.uint64) * _GOLDEN)


def uniforms(keys: np.ndarray, step: int, columns: Sequence[int]) -> np.ndarray:
    """Counter-based uniforms in [0, 1): entry ``(i, j)`` depends only on
    ``(keys[i], step, columns[j])``."""
    ks = _mix(keys + np.uint64(((step + 1) * int(_STEP)) & _MASK))
    cols = ((np.asarray(columns, dtype=np.uint64) + np.uint64(1)) * _GOLDEN)[None, :]
    z = _mix(ks[:, None] + cols)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _run_chunk(comp: _Compiled, policy: Policy, x0: np.ndarray, seed: int, first: int, size: int,
               step_cap: int) -> tuple[np.ndarray, np.ndarray]:
    k = comp.model.k
    all_cols = list(range(len(comp.dists) + 1))
    if policy.kind == "always":
        l = policy.block - 1
        needed = comp.used_dists(l)
        A_l, B_l, c_l, r_l, r0_l = comp.A[l], comp.B[l], comp.c[l], comp.r[l], comp.r0[l]
    total = np.zeros(size)
    truncated = np.zeros(size, dtype=bool)
    # compacted state of the still-running trials
    ids = np.arange(size)
    if not comp.in_guard(x0[None, :])[0]:
        return total, truncated
    keys = trial_keys(seed, first + ids)
    X = np.tile(x0, (size, 1))
    acc = np.zeros(size)
    step = 0
    while ids.size:
        if step >= step_cap:
            truncated[ids] = True
            break
        if policy.kind == "always":
            # unused distributions are skipped; their streams are independent anyway
            S = comp.sample(uniforms(keys, step, needed), needed)
            X = X @ A_l.T + S @ B_l.T + c_l
            acc += S @ r_l + r0_l
        else:
            U = uniforms(keys, step, all_cols)
            S = comp.sample(U[:, :-1])
            choice = policy.choose(X, U[:, -1], k)
            X = np.einsum("nij,nj->ni", comp.A[choice], X) + np.einsum("nij,nj->ni", comp.B[choice], S) + comp.c[choice]
            acc += np.einsum("nj,nj->n", comp.r[choice], S) + comp.r0[choice]
        step += 1
        still = comp.in_guard(X)
        if not still.all():
            done = ~still
            total[ids[done]] = acc[done]
            ids, keys, X, acc = ids[still], keys[still], X[still], acc[still]
    total[ids] = acc
    return total, truncated


def simulate(model: ModelIR, policy: Policy, trials: int = 100_000, seed: int = 0,
             step_cap: int = DEFAULT_STEP_CAP, x0: Sequence | None = None, workers: int = 1) -> SimEstimate:
    """Mean total reward until the guard fails, over ``trials`` independent runs.

    Trial ``i`` always consumes the same random numbers (keyed by seed, trial
    and step), so the result is bit-identical for any ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if step_cap < 1:
        raise ValueError("step_cap must be at least 1")
    policy.check(model)
    x0 = model.init if x0 is None else x0
    if x0 is None:
        raise ValueError("no initial valuation: give x0 or declare initial values in the model")
    comp = _Compiled(model)
    start = np.array([float(as_fraction(v)) for v in x0])
    sizes = [min(CHUNK, trials - s) for s in range(0, trials, CHUNK)]

    def job(i):
        return _run_chunk(comp, policy, start, seed, i * CHUNK, sizes[i], step_cap)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]
    totals = np.concatenate([p[0] for p in parts])
    trunc = np.concatenate([p[1] for p in parts])
    mean = float(np.sum(totals) / trials)
    stderr = float(np.std(totals, ddof=1) / math.sqrt(trials)) if trials > 1 else None
    est = SimEstimate(mean, stderr, trials, float(trunc.sum() / trials), seed, policy.describe(), step_cap)
    if not est.reliable:
        log.warning("%.2f%% of trials hit the step cap; estimate unreliable", 100 * est.truncated_fraction)
    return est


# -- value iteration ------------------------------------------------------------------------------


@dataclass
class VIResult:
    values: np.ndarray
    lo: tuple[int, ...]
    in_guard: np.ndarray
    policy: Policy
    sweeps: int
    sense: str
    warnings: list[str] = field(default_factory=list)

    def value_at(self, x: Sequence) -> float:
        idx = tuple(int(round(float(v))) - l for v, l in zip(x, self.lo))
        if any(i < 0 or i >= n for i, n in zip(idx, self.values.shape)):
            raise IndexError(f"{tuple(x)} is outside the iteration box")
        return float(self.values[idx])


def _block_outcomes(model: ModelIR, l: int) -> list[tuple[Fraction, dict[str, Fraction]]]:
    blk = model.blocks[l]
    names = set(blk.fmap.used_sampling_vars()) | set(blk.reward.variables())
    dists: list[Distribution] = []
    for n in sorted(names):
        d = model.dist_of(n)
        if d not in dists:
            dists.append(d)
    if any(not d.is_discrete for d in dists):
        raise UnsupportedModel("value iteration needs discrete distributions; simulate instead")
    out = []
    for combo in itertools.product(*(d.support for d in dists)):
        p = Fraction(1)
        u: dict[str, Fraction] = {}
        for d, (pt, q) in zip(dists, combo):
            p *= q
            u.update(zip(d.variables, pt))
        out.append((p, u))
    return out


def _integer(v: Fraction) -> bool:
    return v.denominator == 1


def value_iteration(model: ModelIR, box: Sequence[tuple[int, int]], tol: float = 1e-6, sense: str = "sup",
                    boundary: Callable[[Sequence], float] | None = None, max_sweeps: int = 10**6) -> VIResult:
    """Bellman iteration ``V(x) = opt_l E[R + V(F_l(x, u))]`` on the guard within ``box``.

    Successors leaving the guard are worth 0.  Successors inside the guard but
    outside the box are scored by ``boundary`` (for instance a certificate's
    bound), or 0 with a warning.
    """
    if sense not in ("sup", "inf"):
        raise ValueError(f"sense must be 'sup' or 'inf', not {sense!r}")
    X = model.program_vars
    if len(box) != len(X):
        raise ValueError(f"box needs one interval per program variable ({len(X)})")
    lo = tuple(int(a) for a, _ in box)
    shape = tuple(int(b) - int(a) + 1 for a, b in box)
    if any(s <= 0 for s in shape):
        raise ValueError("empty box")

    # lattice check
    outcomes = [_block_outcomes(model, l) for l in range(model.k)]
    for l, blk in enumerate(model.blocks):
        f = blk.fmap
        if not all(_integer(v) for row in f.A for v in row) or not all(_integer(v) for v in f.c):
            raise UnsupportedModel(f"block {l + 1} does not map the integer lattice to itself; simulate instead")
        for _, u in outcomes[l]:
            uvec = [u.get(w, Fraction(0)) for w in f.sampling_vars]
            for i in range(len(X)):
                if not _integer(sum((b * uv for b, uv in zip(f.B[i], uvec)), Fraction(0))):
                    raise UnsupportedModel(f"block {l + 1} leaves the integer lattice; simulate instead")

    grids = np.meshgrid(*[np.arange(a, a + s, dtype=np.int64) for a, s in zip(lo, shape)], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    N = pts.shape[0]

    g = model.guard
    scale = math.lcm(*(c.denominator for _, c in g.lhs.terms), (g.rhs - g.lhs.const).denominator)
    gcoef = np.array([int(g.lhs.coeff(v) * scale) for v in X], dtype=np.int64)
    grhs = int((g.rhs - g.lhs.const) * scale)

    def guard_ok(P):
        s = P @ gcoef
        return s < grhs if g.strict else s <= grhs

    inside = guard_ok(pts)
    strides = np.array([int(np.prod(shape[i + 1:])) for i in range(len(shape))], dtype=np.int64)
    notes: list[str] = []
    warned = False

    # per block: successor index (-1 terminal, -2 boundary), probability, reward, boundary value
    tables = []
    for l, blk in enumerate(model.blocks):
        f = blk.fmap
        A = np.array([[int(v) for v in row] for row in f.A], dtype=np.int64)
        c = np.array([int(v) for v in f.c], dtype=np.int64)
        rows = []
        for p, u in outcomes[l]:
            uvec = [u.get(w, Fraction(0)) for w in f.sampling_vars]
            shift = np.array([int(sum((b * uv for b, uv in zip(f.B[i], uvec)), Fraction(0))) for i in range(len(X))],
                             dtype=np.int64)
            succ = pts @ A.T + c + shift
            reward = float(blk.reward.evaluate({n: u[n] for n in blk.reward.variables()}))
            in_box = np.all((succ >= np.asarray(lo)) & (succ < np.asarray(lo) + np.asarray(shape)), axis=1)
            alive = guard_ok(succ)
            idx = np.where(in_box, (succ - np.asarray(lo)) @ strides, 0)
            idx = np.where(alive & in_box, idx, -1)
            bval = np.zeros(N)
            off = alive & ~in_box & inside
            if off.any():
                if boundary is None:
                    if not warned:
                        notes.append("successors leave the box; scored as 0 (no certificate supplied)")
                        warned = True
                else:
                    bval[off] = [float(boundary(tuple(int(v) for v in s))) for s in succ[off]]
            rows.append((float(p), reward, idx, bval))
        tables.append(rows)

    V = np.zeros(N)
    opt = np.max if sense == "sup" else np.min
    sweeps = 0
    while True:
        Q = np.empty((model.k, N))
        for l, rows in enumerate(tables):
            acc = np.zeros(N)
            for p, reward, idx, bval in rows:
                acc += p * (reward + np.where(idx >= 0, V[np.maximum(idx, 0)], bval))
            Q[l] = acc
        Vn = np.where(inside, opt(Q, axis=0), 0.0)
        sweeps += 1
        delta = float(np.max(np.abs(Vn - V))) if N else 0.0
        V = Vn
        if delta < tol:
            break
        if sweeps >= max_sweeps:
            raise UnsupportedModel(f"value iteration did not converge within {max_sweeps} sweeps")
    best = (np.argmax(Q, axis=0) if sense == "sup" else np.argmin(Q, axis=0)) + 1
    for msg in notes:
        warnings.warn(msg)
    policy = Policy.greedy(best.reshape(shape), lo)
    return VIResult(V.reshape(shape), lo, inside.reshape(shape), policy, sweeps, sense, notes)
