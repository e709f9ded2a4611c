"""
Second-order Butterworth low-pass filters for the INDI measurement path.

Coefficients come from scipy.signal; the recursion is a direct-form-II
transposed biquad over any number of channels and environments at once.
"""
from dataclasses import dataclass

import numpy as np
from scipy import signal


@dataclass(frozen=True, eq=False)
class ButterworthFilter:
    """Biquad coefficients for one (cutoff, sample rate) pair."""
    b: np.ndarray
    a: np.ndarray
    zi_unit: np.ndarray

    @classmethod
    def design(cls, cutoff_hz: float, sample_rate_hz: float) -> "ButterworthFilter":
        if not 0 < cutoff_hz < 0.5 * sample_rate_hz:
            raise ValueError(f"cutoff {cutoff_hz} Hz must lie in (0, Nyquist={0.5 * sample_rate_hz} Hz)")
        b, a = signal.butter(2, cutoff_hz, btype="low", fs=sample_rate_hz)
        return cls(b=b, a=a, zi_unit=signal.lfilter_zi(b, a))

    def initial_state(self, first_sample: np.ndarray) -> np.ndarray:
        """Delay-line state that makes a constant input pass through unchanged."""
        first_sample = np.asarray(first_sample, dtype=float)
        return first_sample[..., None] * self.zi_unit

    def step(self, x: np.ndarray, z: np.ndarray):
        """
        Filter one sample per channel.

        Returns:
            (y, z_next) with z of shape x.shape + (2,)
        """
        b0, b1, b2 = self.b
        _, a1, a2 = self.a
        y = b0 * x + z[..., 0]
        z_next = np.stack([b1 * x - a1 * y + z[..., 1], b2 * x - a2 * y], axis=-1)
        return y, z_next
