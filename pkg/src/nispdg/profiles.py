"""Initial-data profiles: named families with a deterministic part and a y-coupling.

A profile is a callable ``u0(x, y) -> (len(x), m)`` for scalar parameter
values ``y``; sine-type profiles expose analytic x-derivatives, value ranges,
and Burgers shock-formation times for the characteristics oracle.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


class InitialProfile:
    name: str = "profile"
    m: int = 1
    supports_characteristics: bool = False

    def __call__(self, x, y: float) -> np.ndarray:
        raise NotImplementedError

    def x_derivative(self, x, y: float) -> np.ndarray:
        raise NotImplementedError

    def value_range(self, y: float) -> tuple[float, float]:
        raise NotImplementedError

    def shock_time(self, y: float) -> float:
        """Gradient-blowup time of the Burgers solution started from this profile."""
        return np.inf

    def params(self) -> dict:
        return {}


class SineProfile(InitialProfile):
    """u0(x, y) = (amp + amp_y y) sin(freq x) + offset + offset_y y."""

    name = "sine"
    m = 1
    supports_characteristics = True

    def __init__(self, amp=1.0, amp_y=0.0, freq=1.0, offset=0.0, offset_y=0.0):
        self.amp = float(amp)
        self.amp_y = float(amp_y)
        self.freq = float(freq)
        self.offset = float(offset)
        self.offset_y = float(offset_y)

    def _amplitude(self, y: float) -> float:
        return self.amp + self.amp_y * y

    def __call__(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = (
            self._amplitude(y) * np.sin(self.freq * x)
            + self.offset
            + self.offset_y * y
        )
        return vals[:, None]

    def x_derivative(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return (self._amplitude(y) * self.freq * np.cos(self.freq * x))[:, None]

    def value_range(self, y):
        base = self.offset + self.offset_y * y
        a = abs(self._amplitude(y))
        return base - a, base + a

    def shock_time(self, y):
        slope = abs(self._amplitude(y)) * self.freq
        return np.inf if slope == 0.0 else 1.0 / slope

    def params(self):
        return {
            "amp": self.amp,
            "amp_y": self.amp_y,
            "freq": self.freq,
            "offset": self.offset,
            "offset_y": self.offset_y,
        }


class ConstantProfile(InitialProfile):
    """u0(x, y) = offset + offset_y y."""

    name = "constant"
    m = 1
    supports_characteristics = True

    def __init__(self, offset=0.0, offset_y=0.0):
        self.offset = float(offset)
        self.offset_y = float(offset_y)

    def __call__(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.full((x.size, 1), self.offset + self.offset_y * y)

    def x_derivative(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.zeros((x.size, 1))

    def value_range(self, y):
        v = self.offset + self.offset_y * y
        return v, v

    def params(self):
        return {"offset": self.offset, "offset_y": self.offset_y}


class LakeSineProfile(InitialProfile):
    """Shallow-water initial state: perturbed height, constant discharge."""

    name = "lake-sine"
    m = 2

    def __init__(self, h_base=1.0, amp=0.1, amp_y=0.0, freq=1.0, hu_base=0.0):
        self.h_base = float(h_base)
        self.amp = float(amp)
        self.amp_y = float(amp_y)
        self.freq = float(freq)
        self.hu_base = float(hu_base)

    def __call__(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        h = self.h_base + (self.amp + self.amp_y * y) * np.sin(self.freq * x)
        hu = np.full_like(h, self.hu_base)
        return np.stack([h, hu], axis=-1)

    def x_derivative(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        dh = (self.amp + self.amp_y * y) * self.freq * np.cos(self.freq * x)
        return np.stack([dh, np.zeros_like(dh)], axis=-1)

    def value_range(self, y):
        a = abs(self.amp + self.amp_y * y)
        return self.h_base - a, self.h_base + a

    def params(self):
        return {
            "h_base": self.h_base,
            "amp": self.amp,
            "amp_y": self.amp_y,
            "freq": self.freq,
            "hu_base": self.hu_base,
        }


PROFILES = {
    "sine": SineProfile,
    "constant": ConstantProfile,
    "lake-sine": LakeSineProfile,
}


def make_profile(name: str, **coeffs) -> InitialProfile:
    try:
        cls = PROFILES[name]
    except KeyError:
        raise ConfigError(f"unknown initial profile {name!r}") from None
    try:
        return cls(**coeffs)
    except TypeError as exc:
        raise ConfigError(f"bad coefficients for profile {name!r}: {exc}") from None
