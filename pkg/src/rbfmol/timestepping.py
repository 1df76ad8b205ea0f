"""Dormand-Prince 5(4) embedded Runge-Kutta pair with step-size control.

The fifth-order solution is propagated (local extrapolation) and the
first-same-as-last property saves one stage per accepted step. States at
requested output times come from the standard fourth-order continuous
extension, so asking for output never changes the step sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = ["DOPRI_A", "DOPRI_B", "DOPRI_C", "DOPRI_E", "SolveTrace", "dopri5"]

DOPRI_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
DOPRI_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
DOPRI_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
DOPRI_E = DOPRI_B - _B4

# continuous extension (Shampine), y(t + th h) = y + h K^T P [th, th^2, th^3, th^4]
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

COMPLETED = "completed"
STIFFNESS_ABORT = "stiffness-abort"
NONFINITE_ABORT = "nonfinite-abort"


@dataclass
class SolveTrace:
    """Step log and stored states of one integration.

    ``times``/``step_sizes`` cover every accepted step. ``states`` holds the
    solution at ``times`` when dense storage was on (otherwise only at the
    endpoints), and ``output_states`` holds it at ``output_times``.
    """

    times: np.ndarray
    step_sizes: np.ndarray
    states: Optional[np.ndarray]
    state_times: np.ndarray
    output_times: np.ndarray
    output_states: np.ndarray
    accepted_steps: int
    rejected_steps: int
    status: str
    message: str = ""
    flags: dict = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED

    @property
    def coefficients(self) -> np.ndarray:
        """Stored states (alias used by the method-of-lines layer)."""
        return self.states

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def step_log(self):
        """Rows ``(step_index, t, dt)`` for every accepted step."""
        return [(i + 1, float(t), float(dt))
                for i, (t, dt) in enumerate(zip(self.times[1:], self.step_sizes))]


def _initial_step(f, t0, y0, f0, direction, order, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0 = np.linalg.norm(y0 / scale) / math.sqrt(y0.size)
    d1 = np.linalg.norm(f0 / scale) / math.sqrt(y0.size)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = f(t0 + h0 * direction, y1)
    d2 = np.linalg.norm((f1 - f0) / scale) / math.sqrt(y0.size) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1)


def dopri5(f: Callable[[float, np.ndarray], np.ndarray], t_span: Sequence[float], y0,
           rtol: float = 1e-3, atol: float = 1e-6, fixed_dt: Optional[float] = None,
           output_times: Optional[Sequence[float]] = None, store_states: bool = True,
           max_steps: int = 200_000, first_step: Optional[float] = None) -> SolveTrace:
    """Integrate ``y' = f(t, y)`` over ``t_span``.

    Adaptive mode accepts a step when
    ``max_i |y5_i - y4_i| / (atol + rtol max(|y_i|, |ynew_i|)) <= 1`` and
    rescales the step by ``min(5, max(0.2, 0.9 err^(-1/5)))``. ``fixed_dt``
    switches to uniform steps with no rejection (the last step is shortened to
    land on the end time).

    The run stops with status ``"stiffness-abort"`` when the step falls below
    ``1e-14 (T - t0)`` or ``max_steps`` accepted steps are exceeded, and with
    ``"nonfinite-abort"`` when the state stops being finite. Partial traces
    are returned in both cases.
    """
    t0, T = float(t_span[0]), float(t_span[1])
    if not T > t0:
        raise ValueError("t_span must be increasing")
    y = np.array(y0, dtype=float)
    span = T - t0
    h_min = 1e-14 * span
    outs = np.array(sorted(output_times), dtype=float) if output_times is not None else np.array([])
    if outs.size and (outs.min() < t0 - 1e-12 * span or outs.max() > T + 1e-12 * span):
        raise ValueError("output times outside t_span")
    out_states = np.full((outs.size, y.size), np.nan)
    oi = 0
    while oi < outs.size and outs[oi] <= t0:
        out_states[oi] = y
        oi += 1

    times = [t0]
    steps = []
    states = [y.copy()] if store_states else None
    rejected = 0
    status, message = COMPLETED, ""

    K = np.empty((7, y.size))
    K[0] = f(t0, y)
    t = t0
    if fixed_dt is not None:
        h = float(fixed_dt)
        if not h > 0:
            raise ValueError("fixed_dt must be positive")
    elif first_step is not None:
        h = float(first_step)
    else:
        h = _initial_step(f, t0, y, K[0], 1.0, 4, rtol, atol)

    # overflow in a diverging run is detected through the finiteness checks below
    with np.errstate(over="ignore", invalid="ignore"):
        while t < T:
            if len(steps) >= max_steps:
                status, message = STIFFNESS_ABORT, f"exceeded {max_steps} steps at t={t:.6g}"
                break
            last = False
            if t + h >= T or (fixed_dt is not None and T - (t + h) < 1e-12 * span):
                h = T - t
                last = True
            for s in range(1, 7):
                ys = y + h * (np.asarray(DOPRI_A[s]) @ K[:s])
                K[s] = f(t + DOPRI_C[s] * h, ys)
            y_new = ys  # stage 7 is evaluated at the 5th-order solution
            if fixed_dt is not None:
                accept, factor = True, 1.0
                err = 0.0
            else:
                scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
                err = float(np.max(np.abs(h * (DOPRI_E @ K)) / scale))
                if not math.isfinite(err):
                    accept, factor = False, 0.2
                else:
                    accept = err <= 1.0
                    factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            if not np.all(np.isfinite(y_new)) and (accept or fixed_dt is not None):
                status, message = NONFINITE_ABORT, f"non-finite state at t={t + h:.6g}"
                break
            if accept:
                t_new = T if last else t + h
                while oi < outs.size and outs[oi] <= t_new + 1e-12 * span:
                    theta = min(1.0, (outs[oi] - t) / h)
                    powers = np.array([theta, theta ** 2, theta ** 3, theta ** 4])
                    out_states[oi] = y + h * (K.T @ (_P @ powers))
                    oi += 1
                steps.append(h)
                t = t_new
                y = y_new
                times.append(t)
                if store_states:
                    states.append(y.copy())
                K[0] = K[6]
                if fixed_dt is None:
                    h = h * factor
                elif not last:
                    h = float(fixed_dt)
            else:
                rejected += 1
                h = h * min(1.0, factor)
                if h < h_min:
                    status, message = STIFFNESS_ABORT, f"step size {h:.3e} underflow at t={t:.6g}"
                    break

    if not store_states:
        states = [np.array(y0, dtype=float), y.copy()]
        state_times = np.array([t0, t])
    else:
        state_times = np.array(times)
    return SolveTrace(
        times=np.array(times), step_sizes=np.array(steps), states=np.array(states),
        state_times=state_times, output_times=outs, output_states=out_states,
        accepted_steps=len(steps), rejected_steps=rejected, status=status, message=message,
    )
