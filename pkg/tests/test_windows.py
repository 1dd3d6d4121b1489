import numpy as np
import pytest

from onebit_radar.windows import WindowSpec, coherent_gain_db, make_window, peak_sidelobe_db, snr_loss_db


@pytest.mark.parametrize("n", [24, 100, 200, 1000])
@pytest.mark.parametrize("sll", [30.0, 50.0, 60.0])
def test_chebyshev_sidelobes_equal_design(n, sll):
    w = make_window("chebyshev", n, sll)
    assert peak_sidelobe_db(w) == pytest.approx(-sll, abs=0.2)


@pytest.mark.parametrize("n", [10, 24, 100])
def test_taylor_sidelobes_bounded(n):
    w = make_window("taylor", n, 30.0, 4)
    assert peak_sidelobe_db(w) <= -30.0 + 1.0


def test_rect_window():
    w = make_window("rect", 512)
    assert np.all(w == 1) and coherent_gain_db(w) == 0 and snr_loss_db(w) == pytest.approx(0, abs=1e-12)
    assert peak_sidelobe_db(w) == pytest.approx(-13.26, abs=0.02)


def test_window_symmetric_unit_peak():
    for kind in ("chebyshev", "taylor"):
        w = make_window(kind, 31, 40.0)
        assert np.allclose(w, w[::-1]) and w.max() == pytest.approx(1.0)


def test_taper_losses_positive():
    w = make_window("chebyshev", 200, 60.0)
    assert coherent_gain_db(w) < 0 and snr_loss_db(w) > 0


def test_bad_windows():
    with pytest.raises(ValueError):
        WindowSpec("hann")
    with pytest.raises(ValueError):
        make_window("chebyshev", 0)
    assert np.array_equal(make_window("taylor", 1), [1.0])
