import numpy as np
import pytest

from voicebench import RoomSpec, estimate_rt60, generate_rir, rt60_to_reflection
from voicebench.errors import UnachievableRT60

FS = 16000


def room(dims=(4, 5, 3), src=(1, 1, 1), mic=(2.4, 1.8, 1.7), **kw):
    defaults = dict(sample_rate_hz=FS, rir_length_samples=4800, rt60_s=0.3)
    defaults.update(kw)
    return RoomSpec(dims, src, mic, **defaults)


class TestSabineInversion:
    def test_reference_room(self):
        # 4x5x3 m: V=60, S=94; rt60 0.3 s -> alpha 0.34255, beta 0.81084
        beta = rt60_to_reflection(room())
        assert len(beta) == 6
        assert len(set(beta)) == 1
        assert beta[0] == pytest.approx(0.81084, abs=1e-4)

    def test_tiny_room(self):
        spec = room(dims=(1, 1, 1), src=(0.3, 0.3, 0.3), mic=(0.7, 0.7, 0.7), rt60_s=2.0)
        assert rt60_to_reflection(spec)[0] == pytest.approx(0.99329, abs=1e-4)

    def test_long_rt60_limit(self):
        beta = rt60_to_reflection(room(rt60_s=1000.0))[0]
        assert beta == pytest.approx(1.0, abs=1e-3)

    def test_unachievable(self):
        with pytest.raises(UnachievableRT60):
            rt60_to_reflection(room(rt60_s=0.01))


class TestGenerateRir:
    def anechoic(self, mic, length=2000, fs=FS):
        return RoomSpec(
            (5, 4, 3), (1.0, 1.0, 1.0), mic,
            sample_rate_hz=fs, rir_length_samples=length,
            reflection_coeffs=(0.0,) * 6, max_order=0,
        )

    def test_direct_path_peak(self):
        # d = 1.715 m -> delay exactly 80 samples at 16 kHz, amp 1/(4 pi d)
        rir = generate_rir(self.anechoic((2.715, 1.0, 1.0)))
        h = rir.samples[0]
        peak = int(np.argmax(np.abs(h)))
        assert peak == 80
        assert h[peak] == pytest.approx(1.0 / (4 * np.pi * 1.715), rel=0.02)
        assert rir.n_frames == 2000

    def test_inverse_distance_law(self):
        h1 = generate_rir(self.anechoic((2.715, 1.0, 1.0))).samples[0]
        h2 = generate_rir(self.anechoic((4.43, 1.0, 1.0))).samples[0]
        p1, p2 = np.abs(h1).max(), np.abs(h2).max()
        assert p2 / p1 == pytest.approx(0.5, rel=0.02)

    def test_fractional_delay_peak(self):
        # non-integer delay: peak lands on the nearest sample at the
        # sinc-interpolated height
        spec = self.anechoic((2.7, 1.0, 1.0))
        h = generate_rir(spec).samples[0]
        d = 1.7
        delay = d / 343.0 * FS
        frac = delay - np.floor(delay)
        peak = int(np.argmax(np.abs(h)))
        assert abs(peak - delay) <= 1.0
        amp = 1.0 / (4 * np.pi * d)
        expected_peak = amp * abs(np.sinc(min(frac, 1 - frac)))
        assert np.abs(h).max() == pytest.approx(expected_peak, rel=0.02)

    def test_order_energy_and_decay(self):
        base = dict(
            dimensions_m=(5, 4, 3), source_pos_m=(1, 1, 1), mic_pos_m=(3, 2.5, 1.6),
            sample_rate_hz=FS, rir_length_samples=8000,
            reflection_coeffs=(0.9,) * 6,
        )
        h0 = generate_rir(RoomSpec(**base, max_order=0)).samples[0]
        h10 = generate_rir(RoomSpec(**base, max_order=10)).samples[0]
        assert np.sum(h10**2) > np.sum(h0**2)
        # energy in consecutive 50 ms windows decreases along the tail
        win = int(0.05 * FS)
        tail = h10[400:]
        windows = [np.sum(tail[i * win : (i + 1) * win] ** 2) for i in range(len(tail) // win)]
        assert all(a > b for a, b in zip(windows, windows[1:]))

    def test_deterministic(self):
        spec = room(max_order=8)
        a = generate_rir(spec).samples[0]
        b = generate_rir(spec).samples[0]
        np.testing.assert_array_equal(a, b)

    def test_energy_monotone_in_absorption(self):
        base = dict(
            dimensions_m=(5, 4, 3), source_pos_m=(1, 1, 1), mic_pos_m=(3, 2.5, 1.6),
            sample_rate_hz=FS, rir_length_samples=6000, max_order=10,
        )
        energies = [
            np.sum(generate_rir(RoomSpec(**base, reflection_coeffs=(b,) * 6)).samples[0] ** 2)
            for b in (0.5, 0.7, 0.9)
        ]
        assert energies[0] < energies[1] < energies[2]


SCHROEDER_COMBOS = [
    (0.3, (4, 5, 3)),
    (0.35, (5, 4, 3)),
    (0.45, (6, 5, 4)),
    (0.5, (6, 5, 4)),
    (0.55, (7, 5, 4)),
]


@pytest.mark.parametrize("rt,dims", SCHROEDER_COMBOS)
def test_schroeder_rt60_within_20_percent(rt, dims):
    order = int(np.ceil(343 * rt * 0.85 / (2 * min(dims)))) * 2 + 2
    spec = RoomSpec(
        dims, (1.2, 1.1, 1.3), (dims[0] - 1.5, dims[1] - 1.2, 1.6),
        sample_rate_hz=FS, rir_length_samples=int(FS * rt * 1.3),
        rt60_s=rt, max_order=order,
    )
    estimated = estimate_rt60(generate_rir(spec))
    assert estimated == pytest.approx(rt, rel=0.2)


class TestRoomSpecValidation:
    def test_source_outside(self):
        with pytest.raises(ValueError):
            room(src=(6, 1, 1))

    def test_source_on_wall(self):
        with pytest.raises(ValueError):
            room(src=(0.0, 1, 1))

    def test_source_equals_mic(self):
        with pytest.raises(ValueError):
            room(mic=(1.0, 1.0, 1.005))

    def test_needs_rt60_or_coeffs(self):
        with pytest.raises(ValueError):
            RoomSpec((4, 5, 3), (1, 1, 1), (2, 2, 2), sample_rate_hz=FS, rir_length_samples=100)

    def test_bad_coeffs(self):
        with pytest.raises(ValueError):
            room(rt60_s=None, reflection_coeffs=(1.0,) * 6)
