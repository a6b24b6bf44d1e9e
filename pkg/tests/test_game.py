import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mostackelberg.game import (
    Constraint,
    GameFormatError,
    Manipulation,
    UtilityKind,
    UtilityModel,
    best_response,
    follower_respond,
    game_from_dict,
    game_to_dict,
    load_game,
    save_game,
    utility,
)
from tests.conftest import make_game


def test_linear_utility_values():
    assert utility(UtilityModel("linear", [0.4, 0.6]), np.array([2.4, 1.0]) - [0.4, 0]) == pytest.approx(1.4)
    assert utility(UtilityModel("linear", [0.3, 0.7]), [0, 0]) == 0.0


def test_cobb_douglas_utility():
    assert utility(UtilityModel("cobb-douglas", [0.5, 0.5]), [4, 1]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        utility(UtilityModel("cobb-douglas", [0.5, 0.5]), [4, 0])


def test_weight_validation():
    with pytest.raises(ValueError):
        UtilityModel("linear", [0.5, 0.6])
    with pytest.raises(ValueError):
        UtilityModel("linear", [1.2, -0.2])


def test_best_response_examples(high_risk, play_safe):
    assert best_response(high_risk, 0) == 0
    assert best_response(play_safe, 1) == 0
    single = make_game([[[1, 2]]], [[[3, 4]]], [0.5, 0.5], [0.5, 0.5])
    assert best_response(single, 0) == 0


def test_best_response_ties_lowest_index():
    g = make_game(np.zeros((1, 3, 2)), [[[1, 0], [0, 1], [1, 0]]], [0.5, 0.5], [0.5, 0.5])
    assert best_response(g, 0) == 0


def test_follower_respond(high_risk, play_safe):
    # indifference is resolved in the leader's favour
    assert follower_respond(high_risk, Manipulation(0, 1, [0.4, 0])) == 1
    assert follower_respond(play_safe, Manipulation(0, 1, [0.1, 0])) == 0
    assert follower_respond(high_risk, Manipulation(1, 1, [0.2, 0.8])) == 1


def test_view_check_rejects_bad_costs(high_risk):
    view = high_risk.view
    with pytest.raises(ValueError):
        view.check(Manipulation(0, 1, [-0.1, 0]))
    with pytest.raises(ValueError):
        view.check(Manipulation(2, 0, [0, 0]))
    c2 = high_risk.with_constraint("c2").view
    with pytest.raises(ValueError):
        c2.check(Manipulation(1, 1, [2.5, 0]))
    c2.check(Manipulation(1, 1, [2.4, 1.0]))


def test_cost_upper_bound(high_risk):
    assert np.all(np.isinf(high_risk.view.cost_upper_bound(1, 1)))
    ub = high_risk.with_constraint(Constraint.C2).view.cost_upper_bound(1, 1)
    np.testing.assert_allclose(ub, [2.4, 1.0])


def test_json_roundtrip(tmp_path, high_risk):
    path = tmp_path / "g.json"
    save_game(high_risk, path)
    again = load_game(path)
    assert game_to_dict(again) == game_to_dict(high_risk)
    assert again.follower_model.kind is UtilityKind.LINEAR


def test_malformed_game(tmp_path, high_risk):
    data = game_to_dict(high_risk)
    del data["follower_weight"]
    with pytest.raises(GameFormatError):
        game_from_dict(data)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(GameFormatError, match="bad.json"):
        load_game(bad)
    data = game_to_dict(high_risk)
    data["leader_payoffs"] = [[1, 2]]
    with pytest.raises(GameFormatError):
        game_from_dict(json.loads(json.dumps(data)))


payoff = st.floats(0.0, 5.0, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(payoff, min_size=2, max_size=2), min_size=3, max_size=3),
       st.floats(0.0, 1.0), st.integers(0, 2))
def test_dominating_offer_is_accepted(rows, w1, f):
    xf = np.array([rows])
    g = make_game(np.ones_like(xf), xf, [0.5, 0.5], [w1, 1 - w1])
    br = best_response(g, 0)
    gap = np.clip(xf[0, br] - xf[0, f], 0, None)
    assert follower_respond(g, Manipulation(0, f, gap)) == f
