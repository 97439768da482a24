"""Central finite-difference verification of the analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bankgcn.layer import diversity_penalty_and_grad
from bankgcn.model import forward_cached, log_softmax
from bankgcn.training import loss_and_gradients

DEFAULT_STEP = 1e-5
DEFAULT_TOL = 1e-4
KINK_RADIUS = 1e-6


def central_difference(func, theta, step=DEFAULT_STEP):
    """``(f(theta + h) - f(theta - h)) / 2h`` for a scalar function."""
    return (func(theta + step) - func(theta - step)) / (2.0 * step)


def relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(1.0, abs(numeric))


@dataclass
class FDReport:
    passed: bool
    n_checked: int
    n_resampled: int
    max_rel_error: float
    tolerance: float
    step: float
    failures: list = field(default_factory=list)

    def describe(self):
        lines = [
            f"FD check {'PASSED' if self.passed else 'FAILED'}: {self.n_checked} coordinates, "
            f"{self.n_resampled} resampled near kinks, max rel err {self.max_rel_error:.3e} "
            f"(tol {self.tolerance:g}, step {self.step:g})"
        ]
        for name, idx, a, n, r in self.failures[:20]:
            lines.append(f"  {name}{list(idx)}: analytic={a:.10e} fd={n:.10e} rel={r:.3e}")
        return "\n".join(lines)


def _evaluate(params, b):
    """Objective plus a signature of every non-smooth branch taken."""
    cache = forward_cached(params, b)
    lsm = log_softmax(cache.logits)
    loss = -lsm[np.arange(b.num_graphs), b.labels].mean()
    omega, pairs = 0.0, []
    for layer in params.layers:
        o, _, pair = diversity_penalty_and_grad(layer.alpha)
        omega += o
        pairs.append(pair)
    sig = [tuple(pairs)]
    for lc, arg in zip(cache.layer_caches, cache.argmaxes):
        sig.append((lc.H > 0).tobytes())
        sig.append(arg.tobytes())
    return float(loss + params.gamma * omega), sig


def _sample_coordinates(tensors, n_coords, rng):
    names = list(tensors)
    per = max(1, -(-n_coords // len(names)))
    picks = []
    for name in names:
        size = tensors[name].size
        chosen = rng.choice(size, size=min(per, size), replace=False)
        picks += [(name, int(i)) for i in chosen]
    pool = [(name, i) for name in names for i in range(tensors[name].size)]
    taken = set(picks)
    rest = [c for c in pool if c not in taken]
    order = rng.permutation(len(rest))
    rest = [rest[i] for i in order]
    short = max(0, n_coords - len(picks))
    return picks + rest[:short], rest[short:]


def finite_difference_check(params, b, step=DEFAULT_STEP, tolerance=DEFAULT_TOL, n_coords=200, seed=0, fault=None):
    """Compare analytic gradients with central differences.

    Samples at least ``n_coords`` coordinates spread over every trainable
    tensor. A coordinate whose +/- perturbation flips a ReLU, a max-readout
    winner or the diversity argmax pair is non-smooth there and is replaced
    by a fresh one. ``fault`` adds a constant to one analytic entry, for
    testing the harness itself.
    """
    if not 1e-7 <= step <= 1e-3:
        raise ValueError("step must lie in [1e-7, 1e-3]")
    rng = np.random.default_rng(seed)
    _, grads = loss_and_gradients(params, b)
    tensors = params.tensors(trainable_only=True)
    _, base_sig = _evaluate(params, b)
    picks, spare = _sample_coordinates(tensors, n_coords, rng)
    probe = max(step, KINK_RADIUS)

    checked, failures = 0, []
    resampled = 0
    max_err = 0.0
    queue = list(picks)
    faulted = False
    while queue:
        name, flat = queue.pop(0)
        arr = tensors[name]
        idx = np.unravel_index(flat, arr.shape)
        orig = arr[idx]
        smooth = True
        for delta in (probe, -probe):
            arr[idx] = orig + delta
            if _evaluate(params, b)[1] != base_sig:
                smooth = False
        if smooth:
            arr[idx] = orig + step
            f_plus = _evaluate(params, b)[0]
            arr[idx] = orig - step
            f_minus = _evaluate(params, b)[0]
        arr[idx] = orig
        if not smooth:
            resampled += 1
            replacement = next((c for c in spare if c[0] == name), None) or (spare[0] if spare else None)
            if replacement is not None:
                spare.remove(replacement)
                queue.append(replacement)
            continue
        numeric = (f_plus - f_minus) / (2.0 * step)
        analytic = float(grads[name][idx])
        if fault is not None and not faulted:
            analytic += fault
            faulted = True
        err = relative_error(analytic, numeric)
        max_err = max(max_err, err)
        checked += 1
        if err > tolerance:
            failures.append((name, tuple(int(i) for i in idx), analytic, numeric, err))
    return FDReport(not failures and checked >= min(n_coords, sum(t.size for t in tensors.values())),
                    checked, resampled, max_err, tolerance, step, failures)
