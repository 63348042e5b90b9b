import math

import pytest

import carfollow as cf


def test_lv_acceleration_steady():
    # gap unchanged over the step, ego cruising: leader cruises too
    assert cf.lv_acceleration(0.0, 0.0, 0.0, 0.1) == 0.0
    assert cf.lv_acceleration(0.01, 0.0, 0.0, 0.1) == pytest.approx(-2.0)


def test_triangle_and_selection():
    assert cf.point_in_triangle(160, 170, 320, 180)
    assert not cf.point_in_triangle(5, 175, 320, 180)
    assert cf.select_model([("model 1", 6.23), ("model 2", 58), ("model 3", 1.79)]) == "model 3"


def test_calibration_fit():
    fit = cf.fit_calibration([1, 2, 3, 4], [3, 5, 7, 9])
    assert fit["scale"] == pytest.approx(2)
    assert fit["offset"] == pytest.approx(1)


def test_losses():
    y = [[float(r * 8 + c + 1) for c in range(8)] for r in range(8)]
    assert cf.loss_depth(y, y) == 0
    assert cf.loss_ssim(y, y) == pytest.approx(0.5)
    scaled = [[2 * v for v in row] for row in y]
    assert cf.loss_silog(y, scaled) == pytest.approx(math.log(2) ** 2 / 2, abs=1e-12)


def test_t_test():
    r = cf.t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert r["t"] == -1.0
    assert r["pooled"]
    assert r["p"] == pytest.approx(0.3465935, abs=1e-6)


def test_density_integrates_to_one():
    grid = cf.density_estimate([0.0, 1.0, 2.0, 2.5, 4.0], 400)
    dx = grid[1][0] - grid[0][0]
    assert sum(f for _, f in grid) * dx == pytest.approx(1, abs=0.02)


def test_gbt_round_trip():
    x = [[float(i), float(i % 3)] for i in range(40)]
    y = [2.0 * row[0] for row in x]
    model = cf.train_gbt(["a", "b"], x, y, rounds=20)
    assert model.n_trees == 20
    assert model.importance()[0][0] == "a"
    back = cf.BoostedModel.from_text(model.to_text())
    assert back.predict([7.0, 1.0]) == model.predict([7.0, 1.0])


def test_errors_surface_as_value_errors():
    with pytest.raises(ValueError):
        cf.lv_acceleration(0.0, 0.0, 0.0, 0.0)


def test_default_truth():
    rows = cf.default_truth()
    assert len(rows) == 601
    assert min(r[1] for r in rows) == pytest.approx(9)
