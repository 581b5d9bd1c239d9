"""Embedded Runge-Kutta-Fehlberg 4(5) stepper.

The solution is advanced with the fourth-order weights; the difference to the
fifth-order weights drives step-size control.  Deterministic: no wall-clock or
random inputs influence step selection.
"""
from __future__ import annotations

import numpy as np

_A = tuple(np.array(row) for row in (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
))
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_E = _B5 - _B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class StepUnderflow(RuntimeError):
    pass


class RKF45:
    """Adaptive stepper for autonomous systems ``y' = f(y)``.

    ``f`` may raise ``ValueError`` for states outside its domain; the trial
    step is then rejected and retried with a quarter of the size.
    """

    def __init__(self, f, rtol=1e-8, atol=1e-9, max_step=np.inf, h_min=1e-15):
        self.f = f
        self.rtol = rtol
        self.atol = atol
        self.max_step = max_step
        self.h_min = h_min
        self.steps = 0
        self.rejections = 0
        self._K = None

    def _trial(self, y, h, k1):
        K = self._K
        K[0] = k1
        for s in range(1, 6):
            K[s] = self.f(y + h * (_A[s] @ K[:s]))
        y4 = y + h * (_B4 @ K)
        err_vec = h * (_E @ K)
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y4))
        err = float(np.max(np.abs(err_vec) / scale))
        return y4, err

    def advance(self, t, y, t_target, h):
        """Integrate from ``t`` to exactly ``t_target``.  Returns ``(y, h_next)``."""
        if self._K is None or self._K.shape[1] != y.size:
            self._K = np.empty((6, y.size))
        k1 = self.f(y)
        self.t, self.y = t, y
        last_error = None
        while t < t_target:
            remaining = t_target - t
            h = min(h, self.max_step)
            final = h >= remaining * (1 - 1e-12)
            h_try = remaining if final else h
            try:
                y_new, err = self._trial(y, h_try, k1)
                ok = np.isfinite(err) and err <= 1.0
                if ok:
                    k1_new = self.f(y_new)
            except ValueError as exc:
                last_error = exc
                ok, err = False, np.inf
            if ok:
                t = t_target if final else t + h_try
                y, k1 = y_new, k1_new
                self.t, self.y = t, y
                self.steps += 1
                fac = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** -0.2)
                # a step clipped to hit t_target says little about the natural size
                h = max(h, h_try * fac) if final else h_try * fac
            else:
                self.rejections += 1
                if not np.isfinite(err):
                    h = h_try * 0.25
                else:
                    h = h_try * max(MIN_FACTOR, SAFETY * err ** -0.2)
                if h < self.h_min * max(1.0, abs(t)):
                    if last_error is not None:
                        raise last_error
                    raise StepUnderflow(f"step size underflow at t={t:.9g}")
        return y, h
